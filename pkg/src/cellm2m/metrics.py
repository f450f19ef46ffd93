"""Outage and reliability estimation over report outcomes and replications."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .access import Outcome, Report

Z_95 = 1.959963984540054


@dataclass(frozen=True)
class OutageEstimate:
    mean: float
    ci95_halfwidth: float | None
    n_reports: int
    n_replications: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.mean <= 1.0:
            raise ValueError("outage mean must lie in [0, 1]")
        if self.ci95_halfwidth is not None and self.ci95_halfwidth < 0:
            raise ValueError("CI half-width must be >= 0")


@dataclass(frozen=True)
class WindowCounts:
    total: int
    delivered: int
    failed_deadline: int
    failed_retries: int

    @property
    def failed(self) -> int:
        return self.failed_deadline + self.failed_retries


def window_counts(reports: Iterable[Report], warmup_s: float, horizon_s: float) -> WindowCounts:
    """Tally terminal outcomes of reports created in [warmup, horizon)."""
    if horizon_s <= warmup_s:
        raise ValueError("horizon must exceed warmup")
    total = delivered = f_deadline = f_retries = 0
    for r in reports:
        if not warmup_s <= r.created_at < horizon_s:
            continue
        total += 1
        if r.outcome is Outcome.DELIVERED:
            delivered += 1
        elif r.outcome is Outcome.FAILED_DEADLINE:
            f_deadline += 1
        elif r.outcome is Outcome.FAILED_MAX_RETRIES:
            f_retries += 1
        else:
            raise ValueError(f"report still pending at evaluation time: {r!r}")
    return WindowCounts(total, delivered, f_deadline, f_retries)


def outage(reports: Iterable[Report], warmup_s: float, horizon_s: float) -> float | None:
    """Per-replication outage: failed/total among reports created in the window.

    ``None`` (absent, not zero) when the window holds no reports.
    """
    counts = window_counts(reports, warmup_s, horizon_s)
    if counts.total == 0:
        return None
    return counts.failed / counts.total


def aggregate(replication_outages: Sequence[float], n_reports: int = 0) -> OutageEstimate:
    """Mean and normal-approximation 95% CI across replication outages."""
    values = [v for v in replication_outages if v is not None]
    if not values:
        raise ValueError("no replication outages to aggregate")
    n = len(values)
    mean = sum(values) / n
    ci = None
    if n >= 2:
        var = sum((v - mean) ** 2 for v in values) / (n - 1)
        ci = Z_95 * math.sqrt(var / n)
    return OutageEstimate(mean=mean, ci95_halfwidth=ci, n_reports=n_reports, n_replications=n)


@dataclass(frozen=True)
class ReliabilityRow:
    use_case: str
    delivered: int
    total: int
    ratio: float
    target: float
    meets_target: bool


def reliability_by_usecase(
    reports: Iterable[Report],
    targets: Mapping[str, float],
    default_target: float = 0.98,
) -> list[ReliabilityRow]:
    """Delivery ratio per use case, judged against its reliability target."""
    totals: dict[str, int] = {}
    delivered: dict[str, int] = {}
    for r in reports:
        totals[r.use_case] = totals.get(r.use_case, 0) + 1
        if r.outcome is Outcome.DELIVERED:
            delivered[r.use_case] = delivered.get(r.use_case, 0) + 1
    rows = []
    for use_case in sorted(totals):
        total = totals[use_case]
        ok = delivered.get(use_case, 0)
        target = targets.get(use_case, default_target)
        ratio = ok / total
        rows.append(ReliabilityRow(use_case, ok, total, ratio, target, ratio >= target))
    return rows
