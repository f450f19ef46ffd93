"""Outage estimation and per-use-case reliability."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellm2m.access import Outcome, Report
from cellm2m.engine import derive_stream
from cellm2m.metrics import aggregate, outage, reliability_by_usecase, window_counts


def make_reports(n: int, n_failed: int, created_at: float = 10.0,
                 use_case: str = "t") -> list[Report]:
    reports = []
    for i in range(n):
        r = Report(i, use_case, created_at, 100, created_at + 60.0)
        if i < n_failed:
            r.outcome = Outcome.FAILED_DEADLINE
        else:
            r.outcome = Outcome.DELIVERED
            r.delivered_at = created_at + 1.0
        reports.append(r)
    return reports


def test_all_delivered_is_zero_outage():
    assert outage(make_reports(10, 0), 0.0, 100.0) == 0.0


def test_half_failed_is_half_outage():
    assert outage(make_reports(10, 5), 0.0, 100.0) == 0.5


def test_empty_window_is_absent_not_zero():
    assert outage(make_reports(10, 5, created_at=10.0), 50.0, 100.0) is None


def test_warmup_reports_are_excluded():
    early = make_reports(10, 10, created_at=1.0)
    late = make_reports(10, 0, created_at=50.0)
    assert outage(early + late, 40.0, 100.0) == 0.0


def test_both_failure_modes_count():
    reports = make_reports(4, 0)
    reports[0].outcome = Outcome.FAILED_MAX_RETRIES
    reports[1].outcome = Outcome.FAILED_DEADLINE
    counts = window_counts(reports, 0.0, 100.0)
    assert (counts.failed_deadline, counts.failed_retries) == (1, 1)
    assert outage(reports, 0.0, 100.0) == 0.5


def test_aggregate_of_constant_replications_has_zero_width():
    est = aggregate([0.1, 0.1, 0.1])
    assert est.mean == pytest.approx(0.1)
    assert est.ci95_halfwidth == pytest.approx(0.0, abs=1e-12)
    assert est.n_replications == 3


def test_two_extreme_replications():
    est = aggregate([0.0, 1.0])
    assert est.mean == 0.5
    assert est.ci95_halfwidth is not None


def test_single_replication_has_no_interval():
    assert aggregate([0.3]).ci95_halfwidth is None


def test_aggregate_matches_binomial_sampling_oracle():
    rng = derive_stream(21, 0)
    replications = [(rng.random(1000) < 0.2).mean() for _ in range(10)]
    est = aggregate(replications)
    assert abs(est.mean - 0.2) < 0.03
    assert est.ci95_halfwidth < 0.03


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 200), st.integers(0, 200)), min_size=1, max_size=8))
def test_pooled_outage_equals_report_weighted_mean(spec):
    spec = [(n, min(f, n)) for n, f in spec]
    pooled: list[Report] = []
    weighted = 0.0
    total = 0
    for n, f in spec:
        pooled.extend(make_reports(n, f))
        weighted += f
        total += n
    assert outage(pooled, 0.0, 100.0) == pytest.approx(weighted / total)


def test_reliability_rows_judge_targets():
    ok = make_reports(100, 1, use_case="meter_reading")       # 99% delivered
    bad = make_reports(100, 3, use_case="idcs_alarm")          # 97% delivered
    rows = reliability_by_usecase(ok + bad, {"meter_reading": 0.98, "idcs_alarm": 0.99})
    by_name = {r.use_case: r for r in rows}
    assert by_name["meter_reading"].meets_target
    assert by_name["meter_reading"].ratio == pytest.approx(0.99)
    assert not by_name["idcs_alarm"].meets_target


def test_reliability_default_target():
    rows = reliability_by_usecase(make_reports(100, 1), {})
    assert rows[0].target == 0.98
    assert rows[0].meets_target
