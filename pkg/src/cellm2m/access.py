"""Technology-agnostic three-stage access reservation: contend -> grant -> data.

A device with a pending report picks a random-access opportunity on the
cell's slot grid. The base station decodes an opportunity only when exactly
one device chose it (and the control channel did not err); collided or
errored devices learn nothing and only give up after a grant timeout, then
back off and retry until the retry budget is exhausted. Granting is bounded
by the cell's grant budget and by the pool of uplink identifiers that
coordinate concurrent transfers. Reports that outlive their deadline are
withdrawn wherever they are.

``CellSim`` implements the shared machinery (slot buckets scheduled lazily,
backoff bookkeeping, deadline expiry, identifier accounting); the GPRS and
LTE modules subclass it with their grant discipline and data schedulers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .engine import Simulator, derive_stream
from .traffic import DeviceClass, DevicePopulation, UseCaseProfile, next_arrival

# Stream-id layout within one replication seed.
POPULATION_STREAM = 0
CELL_STREAM = 1
DEVICE_STREAM_BASE = 16


class Outcome(Enum):
    PENDING = "pending"
    DELIVERED = "delivered"
    FAILED_DEADLINE = "failed-deadline"
    FAILED_MAX_RETRIES = "failed-max-retries"


class AttemptState(Enum):
    BACKLOGGED = "backlogged"
    CONTENDING = "contending"
    AWAITING_GRANT = "awaiting-grant"
    CONNECTED = "connected"
    TRANSMITTING = "transmitting"
    DONE = "done"


class ContentionResult(Enum):
    SINGLETON_SUCCESS = "singleton-success"
    COLLISION = "collision"
    CONTROL_ERROR = "control-error"


@dataclass(slots=True)
class Report:
    device_id: int
    use_case: str
    created_at: float
    size_bytes: int
    deadline_at: float
    outcome: Outcome = Outcome.PENDING
    delivered_at: float | None = None


@dataclass(slots=True)
class AccessAttempt:
    report: Report
    rng: np.random.Generator
    state: AttemptState = AttemptState.BACKLOGGED
    retries_used: int = 0


@dataclass(slots=True)
class CellModel:
    """Technology parameterization consumed by the access state machine."""

    rao_slot_spacing_s: float
    opportunities_per_slot: int
    grant_budget_per_s: float
    grant_queue_capacity: int | None
    identifier_limit: int
    p_control_error: float
    p_data_error: float
    data_capacity_bytes_per_s: float
    max_retransmissions: int
    backoff_window_s: float
    grant_timeout_s: float

    def __post_init__(self) -> None:
        if self.rao_slot_spacing_s <= 0 or self.opportunities_per_slot < 1:
            raise ValueError("invalid random-access opportunity grid")
        for p in (self.p_control_error, self.p_data_error):
            if not 0 <= p < 1:
                raise ValueError("error probabilities must lie in [0, 1)")
        if self.grant_budget_per_s <= 0 or self.identifier_limit < 0:
            raise ValueError("invalid grant budget or identifier limit")

    @property
    def rao_rate_per_s(self) -> float:
        return self.opportunities_per_slot / self.rao_slot_spacing_s


def contend(
    cell: CellModel,
    attempts: Sequence[AccessAttempt],
    rng: np.random.Generator | None = None,
) -> list[ContentionResult]:
    """Resolve one random-access slot.

    Every attempt picks one of the slot's opportunities uniformly at random
    (from its own stream, falling back to ``rng``). An opportunity chosen by
    exactly one attempt is decoded with probability 1 - p_control_error;
    shared opportunities collide for everyone involved.
    """
    nopp = cell.opportunities_per_slot
    if nopp == 1:
        choices = [0] * len(attempts)
    else:
        choices = [int((a.rng if a.rng is not None else rng).integers(0, nopp)) for a in attempts]
    occupancy: dict[int, int] = {}
    for c in choices:
        occupancy[c] = occupancy.get(c, 0) + 1
    results: list[ContentionResult] = []
    p_err = cell.p_control_error
    for attempt, c in zip(attempts, choices):
        if occupancy[c] > 1:
            results.append(ContentionResult.COLLISION)
        else:
            r = attempt.rng if attempt.rng is not None else rng
            if p_err > 0 and r.random() < p_err:
                results.append(ContentionResult.CONTROL_ERROR)
            else:
                results.append(ContentionResult.SINGLETON_SUCCESS)
    return results


def backoff_delay(cell: CellModel, attempt: AccessAttempt,
                  rng: np.random.Generator | None = None) -> float | None:
    """Uniform backoff before the next try; ``None`` once retries are exhausted
    (the report is then marked failed-max-retries)."""
    if attempt.retries_used >= cell.max_retransmissions:
        if attempt.report.outcome is Outcome.PENDING:
            attempt.report.outcome = Outcome.FAILED_MAX_RETRIES
        attempt.state = AttemptState.DONE
        return None
    attempt.retries_used += 1
    r = attempt.rng if attempt.rng is not None else rng
    return float(r.uniform(0.0, cell.backoff_window_s))


def expire_deadlines(reports: Iterable[Report], now: float) -> list[Report]:
    """Mark every pending report whose deadline has passed as failed-deadline."""
    expired = []
    for report in reports:
        if report.outcome is Outcome.PENDING and report.deadline_at <= now:
            report.outcome = Outcome.FAILED_DEADLINE
            expired.append(report)
    return expired


class CellSim:
    """Shared simulation runtime for one cell; subclassed per technology.

    Subclasses implement ``_on_singletons`` (grant stage entry) and
    ``_withdraw_active`` (release data-phase resources on deadline expiry),
    and call ``_deliver``/``_fail_retries`` plus the identifier accounting
    helpers as transfers progress.
    """

    def __init__(
        self,
        cell: CellModel,
        population: DevicePopulation,
        rep_seed: int,
        horizon_s: float,
        *,
        sm_background: bool = True,
        bypass_access: bool = False,
        audit: bool = False,
    ) -> None:
        self.sim = Simulator()
        self.cell = cell
        self.population = population
        self.rep_seed = rep_seed
        self.horizon_s = horizon_s
        self.sm_background = sm_background
        self.bypass_access = bypass_access
        self.audit = audit

        self.reports: list[Report] = []
        self._buckets: dict[int, list[AccessAttempt]] = {}
        self._last_slot = -1
        self.active_identifiers = 0
        self.max_active_identifiers = 0
        self.grant_times: list[float] = []

    # -- traffic generation ----------------------------------------------

    def device_stream(self, device_id: int) -> np.random.Generator:
        return derive_stream(self.rep_seed, DEVICE_STREAM_BASE + device_id)

    def start(self) -> None:
        for device in self.population.devices:
            if not self.sm_background and device.device_class is not DeviceClass.ESM:
                continue
            rng = self.device_stream(device.device_id)
            for profile in device.profiles:
                t = next_arrival(profile.arrival, rng, 0.0)
                if t < self.horizon_s:
                    self.sim.schedule(t, self._make_arrival(device.device_id, profile, rng, t))

    def _make_arrival(self, device_id: int, profile: UseCaseProfile,
                      rng: np.random.Generator, t: float):
        def fire() -> None:
            self._arrival(device_id, profile, rng, t)
        return fire

    def _arrival(self, device_id: int, profile: UseCaseProfile,
                 rng: np.random.Generator, t: float) -> None:
        report = Report(
            device_id=device_id,
            use_case=profile.name,
            created_at=t,
            size_bytes=profile.size_bytes,
            deadline_at=t + profile.deadline_s,
        )
        self.reports.append(report)
        attempt = AccessAttempt(report, rng)
        self.sim.schedule(report.deadline_at, lambda: self._expire(report, attempt))
        if self.bypass_access:
            attempt.state = AttemptState.TRANSMITTING
            self._submit_data(attempt)
        else:
            self._enter_contention(attempt, t)
        t_next = next_arrival(profile.arrival, rng, t)
        if t_next < self.horizon_s:
            self.sim.schedule(t_next, self._make_arrival(device_id, profile, rng, t_next))

    def run(self) -> None:
        """Generate load up to the horizon, then drain every in-flight report."""
        self.start()
        self.sim.run_until(self.horizon_s)
        self.sim.run_to_exhaustion()

    def verify_conservation(self) -> None:
        dangling = sum(1 for r in self.reports if r.outcome is Outcome.PENDING)
        if dangling:
            raise RuntimeError(f"{dangling} reports never reached a terminal state")

    # -- contention stage ---------------------------------------------------

    def _enter_contention(self, attempt: AccessAttempt, earliest: float) -> None:
        spacing = self.cell.rao_slot_spacing_s
        k = math.ceil(earliest / spacing)
        if k * spacing < earliest:
            k += 1
        if k <= self._last_slot:
            k = self._last_slot + 1
        attempt.state = AttemptState.CONTENDING
        bucket = self._buckets.get(k)
        if bucket is None:
            self._buckets[k] = [attempt]
            self.sim.schedule(k * spacing, lambda: self._resolve_slot(k))
        else:
            bucket.append(attempt)

    def _resolve_slot(self, k: int) -> None:
        self._last_slot = k
        attempts = [a for a in self._buckets.pop(k)
                    if a.report.outcome is Outcome.PENDING and a.state is AttemptState.CONTENDING]
        if not attempts:
            return
        slot_t = self.sim.now
        results = contend(self.cell, attempts)
        winners: list[AccessAttempt] = []
        timeout_at = slot_t + self.cell.grant_timeout_s
        for attempt, result in zip(attempts, results):
            attempt.state = AttemptState.AWAITING_GRANT
            # losers discover the failure only via the grant timeout
            self.sim.schedule(timeout_at, self._make_timeout(attempt))
            if result is ContentionResult.SINGLETON_SUCCESS:
                winners.append(attempt)
        if winners:
            self._on_singletons(slot_t, winners)

    def _make_timeout(self, attempt: AccessAttempt):
        def fire() -> None:
            if (attempt.report.outcome is Outcome.PENDING
                    and attempt.state is AttemptState.AWAITING_GRANT):
                self._backoff(attempt, self.sim.now)
        return fire

    def _backoff(self, attempt: AccessAttempt, at: float) -> None:
        delay = backoff_delay(self.cell, attempt)
        if delay is None:
            return
        attempt.state = AttemptState.BACKLOGGED
        self._enter_contention(attempt, at + delay)

    # -- terminal transitions and identifier accounting ----------------------

    def _deliver(self, report: Report, at: float) -> None:
        if report.outcome is Outcome.PENDING and at <= report.deadline_at:
            report.outcome = Outcome.DELIVERED
            report.delivered_at = at
        elif report.outcome is Outcome.PENDING:
            report.outcome = Outcome.FAILED_DEADLINE

    def _expire(self, report: Report, attempt: AccessAttempt) -> None:
        if report.outcome is not Outcome.PENDING:
            return
        report.outcome = Outcome.FAILED_DEADLINE
        state = attempt.state
        attempt.state = AttemptState.DONE
        if state in (AttemptState.CONNECTED, AttemptState.TRANSMITTING):
            self._withdraw_active(attempt)

    def _acquire_identifier(self) -> None:
        self.active_identifiers += 1
        if self.active_identifiers > self.max_active_identifiers:
            self.max_active_identifiers = self.active_identifiers

    def _release_identifier(self) -> None:
        self.active_identifiers -= 1

    def _record_grant(self, at: float) -> None:
        if self.audit:
            self.grant_times.append(at)

    # -- technology hooks -----------------------------------------------------

    def _on_singletons(self, slot_t: float, winners: list[AccessAttempt]) -> None:
        raise NotImplementedError

    def _submit_data(self, attempt: AccessAttempt) -> None:
        raise NotImplementedError

    def _withdraw_active(self, attempt: AccessAttempt) -> None:
        raise NotImplementedError
