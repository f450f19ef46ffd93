"""GPRS cell: single 200 kHz carrier, AGCH-limited granting, PDCH/USF data phase.

Carrier layout is the single-carrier convention: one of the eight timeslots
carries the common control channel (random access plus the access-grant
channel), the remaining seven are packet data channels. Each PDCH multiplexes
up to seven concurrent uplink transfers through uplink state flags and serves
them round-robin, one radio block per 20 ms block period, at the CS-4 rate
(devices always use the highest coding scheme). Grant messages consume one
signaling block on the assigned PDCH, which preempts data for that block.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .access import AccessAttempt, AttemptState, CellModel, CellSim, Outcome
from .traffic import DevicePopulation


@dataclass(frozen=True)
class GprsConfig:
    rao_rate_per_s: float = 217.0
    agch_rate_per_s: float = 28.0       # simulated grant budget (channel ceiling ~32/s)
    n_pdch: int = 7
    usf_per_pdch: int = 7               # 3-bit USF, one value reserved
    per_pdch_rate_bps: float = 21_400.0  # CS-4
    block_period_s: float = 0.02
    p_control_error: float = 1e-2
    p_data_error: float = 1e-1
    max_retransmissions: int = 7
    backoff_window_s: float = 1.0
    grant_timeout_s: float = 1.0
    grant_queue_capacity: int | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.n_pdch <= 7:
            raise ValueError("a single carrier with one signaling timeslot offers 1..7 PDCHs")
        if self.usf_per_pdch < 1:
            raise ValueError("usf_per_pdch must be >= 1")
        if self.rao_rate_per_s <= 0 or self.agch_rate_per_s <= 0:
            raise ValueError("rates must be positive")

    @property
    def identifier_limit(self) -> int:
        return self.n_pdch * self.usf_per_pdch

    @property
    def data_capacity_bytes_per_s(self) -> float:
        return self.n_pdch * self.per_pdch_rate_bps / 8.0

    @property
    def block_bits(self) -> float:
        return self.per_pdch_rate_bps * self.block_period_s


def gprs_cell(config: GprsConfig = GprsConfig()) -> CellModel:
    """Map the GPRS configuration onto the generic cell model."""
    return CellModel(
        rao_slot_spacing_s=1.0 / config.rao_rate_per_s,
        opportunities_per_slot=1,
        grant_budget_per_s=config.agch_rate_per_s,
        grant_queue_capacity=config.grant_queue_capacity,
        identifier_limit=config.identifier_limit,
        p_control_error=config.p_control_error,
        p_data_error=config.p_data_error,
        data_capacity_bytes_per_s=config.data_capacity_bytes_per_s,
        max_retransmissions=config.max_retransmissions,
        backoff_window_s=config.backoff_window_s,
        grant_timeout_s=config.grant_timeout_s,
    )


class UplinkTbf:
    """One uplink transfer holding a USF on its PDCH.

    ``completed`` marks the final block as sent (awaiting acknowledgment, USF
    still held); ``dead`` marks withdrawal before completion.
    """

    __slots__ = ("attempt", "remaining_bits", "rng", "dead", "completed")

    def __init__(self, attempt: AccessAttempt):
        self.attempt = attempt
        self.remaining_bits = attempt.report.size_bytes * 8.0
        self.rng = attempt.rng
        self.dead = False
        self.completed = False


class _Pdch:
    __slots__ = ("index", "ring", "live", "signaling_pending", "running")

    def __init__(self, index: int):
        self.index = index
        self.ring: deque[UplinkTbf] = deque()
        self.live = 0
        self.signaling_pending = 0
        self.running = False


class PdchScheduler:
    """Round-robin RLC block scheduler over the carrier's PDCHs.

    One block per block period per PDCH; pending signaling blocks preempt
    data. Block delivery succeeds with 1 - p_data_error, failed blocks are
    retransmitted immediately (acknowledged mode). A transfer's USF is
    released when its final block is acknowledged, one block period after
    that block was sent.
    """

    def __init__(self, sim, config: GprsConfig, on_deliver, audit_blocks=None):
        self.sim = sim
        self.config = config
        self.on_deliver = on_deliver
        self.audit_blocks = audit_blocks
        self.pdchs = [_Pdch(i) for i in range(config.n_pdch)]

    def assign(self, attempt: AccessAttempt, *, enforce_usf: bool = True) -> tuple[UplinkTbf, int] | None:
        """Attach a transfer to the least-loaded PDCH (free USF required)."""
        best = min(self.pdchs, key=lambda p: (p.live, p.index))
        if enforce_usf and best.live >= self.config.usf_per_pdch:
            return None
        tbf = UplinkTbf(attempt)
        best.ring.append(tbf)
        best.live += 1
        self._ensure_running(best)
        return tbf, best.index

    def add_signaling(self, pdch_index: int) -> None:
        pdch = self.pdchs[pdch_index]
        pdch.signaling_pending += 1
        self._ensure_running(pdch)

    def withdraw(self, tbf: UplinkTbf, pdch_index: int) -> None:
        """Drop a not-yet-completed transfer (deadline expiry)."""
        tbf.dead = True
        self.pdchs[pdch_index].live -= 1

    def _ensure_running(self, pdch: _Pdch) -> None:
        if pdch.running:
            return
        pdch.running = True
        period = self.config.block_period_s
        t = math.ceil(self.sim.now / period) * period
        if t < self.sim.now:
            t += period
        self.sim.schedule(t, lambda: self._block(pdch))

    def _block(self, pdch: _Pdch) -> None:
        t = self.sim.now
        period = self.config.block_period_s
        if pdch.signaling_pending > 0:
            pdch.signaling_pending -= 1
        else:
            ring = pdch.ring
            tbf = None
            while ring:
                head = ring[0]
                if head.dead or head.completed or head.attempt.report.outcome is not Outcome.PENDING:
                    ring.popleft()
                    continue
                tbf = head
                break
            if tbf is None:
                pdch.running = False
                return
            ring.rotate(-1)
            if tbf.rng.random() >= self.config.p_data_error:
                tbf.remaining_bits -= self.config.block_bits
                if self.audit_blocks is not None:
                    self.audit_blocks.append((pdch.index, t))
                if tbf.remaining_bits <= 0:
                    tbf.completed = True
                    self.sim.schedule(t + period, self._make_ack(tbf, pdch))
        if pdch.signaling_pending or pdch.live:
            self.sim.schedule(t + period, lambda: self._block(pdch))
        else:
            pdch.running = False

    def _make_ack(self, tbf: UplinkTbf, pdch: _Pdch):
        def fire() -> None:
            pdch.live -= 1
            self.on_deliver(tbf.attempt, self.sim.now)
        return fire


class GprsSim(CellSim):
    """Full access-reservation-plus-data simulation of one GPRS cell."""

    def __init__(self, config: GprsConfig, population: DevicePopulation,
                 rep_seed: int, horizon_s: float, **kwargs):
        super().__init__(gprs_cell(config), population, rep_seed, horizon_s, **kwargs)
        self.config = config
        self.audit_blocks: list[tuple[int, float]] | None = [] if self.audit else None
        self.scheduler = PdchScheduler(self.sim, config, self._on_acked, self.audit_blocks)
        self._grant_queue: deque[AccessAttempt] = deque()
        # grant instants sit on anchor + k/rate to keep the per-second budget
        # exact (accumulating += 1/rate drifts below the true spacing)
        self._grant_anchor = 0.0
        self._grants_since_anchor = 0
        self._grant_event_armed = False
        self._tbf_of: dict[int, tuple[UplinkTbf, int]] = {}

    # -- grant stage (AGCH rate limiter over a FIFO queue) --------------------

    def _on_singletons(self, slot_t: float, winners: list[AccessAttempt]) -> None:
        cap = self.cell.grant_queue_capacity
        for attempt in winners:
            if cap is not None and len(self._grant_queue) >= cap:
                continue  # dropped request; the device's grant timeout handles it
            self._grant_queue.append(attempt)
        self._pump_grants()

    def _next_grant_time(self) -> float:
        return self._grant_anchor + self._grants_since_anchor / self.cell.grant_budget_per_s

    def _pump_grants(self) -> None:
        if self._grant_event_armed or not self._grant_queue:
            return
        if self.active_identifiers >= self.cell.identifier_limit:
            return  # re-pumped when an identifier is released
        self._grant_event_armed = True
        at = max(self.sim.now, self._next_grant_time())
        self.sim.schedule(at, self._grant_one)

    def _grant_one(self) -> None:
        self._grant_event_armed = False
        if self.active_identifiers >= self.cell.identifier_limit:
            return
        queue = self._grant_queue
        attempt = None
        while queue:
            head = queue.popleft()
            if (head.report.outcome is Outcome.PENDING
                    and head.state is AttemptState.AWAITING_GRANT):
                attempt = head
                break
        if attempt is None:
            return
        now = self.sim.now
        if now > self._next_grant_time():
            self._grant_anchor = now
            self._grants_since_anchor = 0
        self._grants_since_anchor += 1
        self._record_grant(now)
        self._acquire_identifier()
        # identifier gate keeps some PDCH below its USF cap (sum of live <= limit)
        tbf, pdch_index = self.scheduler.assign(attempt, enforce_usf=False)
        self._tbf_of[id(attempt)] = (tbf, pdch_index)
        self.scheduler.add_signaling(pdch_index)  # assignment signaling preempts data
        attempt.state = AttemptState.TRANSMITTING
        self._pump_grants()

    # -- data phase ------------------------------------------------------------

    def _submit_data(self, attempt: AccessAttempt) -> None:
        # access bypass mode: straight onto a PDCH, no USF bound
        tbf, pdch_index = self.scheduler.assign(attempt, enforce_usf=False)
        self._tbf_of[id(attempt)] = (tbf, pdch_index)

    def _on_acked(self, attempt: AccessAttempt, at: float) -> None:
        self._tbf_of.pop(id(attempt), None)
        self._deliver(attempt.report, at)
        attempt.state = AttemptState.DONE
        if not self.bypass_access:
            self._release_identifier()
            self._pump_grants()

    def _withdraw_active(self, attempt: AccessAttempt) -> None:
        entry = self._tbf_of.pop(id(attempt), None)
        if entry is None:
            return
        tbf, pdch_index = entry
        if tbf.completed:
            return  # final block already sent; the pending ack event cleans up
        self.scheduler.withdraw(tbf, pdch_index)
        if not self.bypass_access:
            self._release_identifier()
            self._pump_grants()


def gprs_outage_curve(n_sm_values, reporting_interval, seed, **kwargs):
    """Sweep population sizes at one reporting interval; returns result rows."""
    from .experiment import Scenario, run_scenario

    scenario = Scenario(
        technology="gprs",
        n_sm=list(n_sm_values),
        ri=[reporting_interval],
        seed=seed,
        **kwargs,
    )
    return run_scenario(scenario)
