"""LTE cell: PRACH contention, PDCCH-limited RAR granting, PUSCH data phase.

Random access follows the contention-based four-message handshake: preamble
(msg1) on one of 54 preambles per 5 ms PRACH occasion, random-access response
(msg2) bounded by the PDCCH grant budget per response window, the scheduled
msg3 on PUSCH (HARQ retransmitted on data errors), and contention resolution
(msg4). Connected transfers share the uplink shared channel, modeled as a
FIFO bit-server that drains one transport block per TTI for the head-of-line
transfer and passes leftover capacity to the next queued transfer; msg3
signaling takes its resource-block share ahead of data.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .access import AccessAttempt, AttemptState, CellModel, CellSim, Outcome, Report
from .traffic import DevicePopulation

BANDWIDTH_PRB = {1_400_000.0: 6, 10_000_000.0: 50}

# Transport block bits per TTI at the highest modulation and coding. The
# 1.4 MHz value is the 6-PRB ceiling of the shared-channel transport-block
# table; at 10 MHz the 50 PRBs are taken at the uncoded 64QAM symbol budget
# (12 subcarriers x 14 symbols x 6 bits per PRB), which a dedicated carrier
# needs in order to sustain full-rate phasor streams from a third of the
# meter locations.
TBS_PER_TTI_DEFAULT = {1_400_000.0: 4392, 10_000_000.0: 50_400}


@dataclass(frozen=True)
class LteConfig:
    bandwidth_hz: float = 1_400_000.0
    n_preambles: int = 54
    prach_period_s: float = 0.005
    rar_grant_budget_per_s: float = 3000.0
    tti_s: float = 0.001
    tbs_per_tti_bits: int | None = None  # derived from bandwidth when None
    msg3_prbs: int = 1
    msg_step_s: float = 0.005            # msg1->msg2, msg3->msg4 spacing
    harq_rtt_s: float = 0.008            # msg3 retransmission turnaround
    contention_timeout_s: float = 0.048
    p_control_error: float = 1e-2
    p_data_error: float = 1e-1
    max_retransmissions: int = 10
    backoff_window_s: float = 0.02
    grant_timeout_s: float = 0.04        # RAR window a device waits before backoff
    identifier_limit: int = 65536        # uplink identifier space; not binding by default
    grant_queue_capacity: int | None = None

    def __post_init__(self) -> None:
        if self.bandwidth_hz not in BANDWIDTH_PRB:
            raise ValueError(f"unsupported bandwidth: {self.bandwidth_hz!r} Hz")
        if self.n_preambles < 1 or self.prach_period_s <= 0:
            raise ValueError("invalid PRACH configuration")
        if self.msg3_prbs < 1 or self.msg3_prbs > self.n_prb:
            raise ValueError("msg3_prbs must lie in [1, n_prb]")

    @property
    def n_prb(self) -> int:
        return BANDWIDTH_PRB[self.bandwidth_hz]

    @property
    def tbs_bits(self) -> int:
        if self.tbs_per_tti_bits is not None:
            return self.tbs_per_tti_bits
        return TBS_PER_TTI_DEFAULT[self.bandwidth_hz]

    @property
    def rar_window_budget(self) -> int:
        return int(round(self.rar_grant_budget_per_s * self.prach_period_s))

    @property
    def pusch_rate_bps(self) -> float:
        return self.tbs_bits / self.tti_s

    @property
    def msg3_bits(self) -> float:
        return self.msg3_prbs * self.tbs_bits / self.n_prb

    @property
    def data_capacity_bytes_per_s(self) -> float:
        return self.pusch_rate_bps / 8.0


def lte_cell(config: LteConfig = LteConfig()) -> CellModel:
    """Map the LTE configuration onto the generic cell model."""
    return CellModel(
        rao_slot_spacing_s=config.prach_period_s,
        opportunities_per_slot=config.n_preambles,
        grant_budget_per_s=config.rar_grant_budget_per_s,
        grant_queue_capacity=config.grant_queue_capacity,
        identifier_limit=config.identifier_limit,
        p_control_error=config.p_control_error,
        p_data_error=config.p_data_error,
        data_capacity_bytes_per_s=config.data_capacity_bytes_per_s,
        max_retransmissions=config.max_retransmissions,
        backoff_window_s=config.backoff_window_s,
        grant_timeout_s=config.grant_timeout_s,
    )


class PuschJob:
    __slots__ = ("report", "bits", "signaling", "callback")

    def __init__(self, report: Report, bits: float, signaling: bool,
                 callback: Callable[[float], None]):
        self.report = report
        self.bits = bits
        self.signaling = signaling
        self.callback = callback


class PuschServer:
    """Shared-channel capacity as a two-class FIFO bit-server.

    Signaling (msg3) is served ahead of data; within a class, strict FIFO.
    A job's bits already include its retransmission inflation, so completion
    is a single scheduled event instead of a per-TTI tick.
    """

    def __init__(self, sim, rate_bps: float):
        self.sim = sim
        self.rate_bps = rate_bps
        self.sig: deque[PuschJob] = deque()
        self.data: deque[PuschJob] = deque()
        self.current: PuschJob | None = None
        self._event = None

    def submit(self, job: PuschJob) -> None:
        (self.sig if job.signaling else self.data).append(job)
        if self.current is None:
            self._dispatch()

    def abort_if_serving(self, report: Report) -> None:
        if self.current is not None and self.current.report is report:
            self._event.cancel()
            self.current = None
            self._dispatch()

    def queued_bits(self) -> float:
        return sum(j.bits for j in self.sig) + sum(j.bits for j in self.data)

    def _dispatch(self) -> None:
        while True:
            queue = self.sig if self.sig else self.data
            if not queue:
                self.current = None
                return
            job = queue.popleft()
            if job.report.outcome is not Outcome.PENDING:
                continue  # withdrawn while queued
            self.current = job
            done = self.sim.now + job.bits / self.rate_bps
            self._event = self.sim.schedule(done, self._complete)
            return

    def _complete(self) -> None:
        job = self.current
        self.current = None
        job.callback(self.sim.now)
        self._dispatch()


def draw_transfer_cost_bits(size_bits: float, tbs_bits: float, p_error: float,
                            rng: np.random.Generator) -> float:
    """Channel bits needed to deliver a transfer, transport block by block.

    A transfer of B bits is sliced into full transport blocks plus a trailing
    partial block; each block is retransmitted independently until received,
    so the surplus is negative-binomial in the block counts.
    """
    if p_error <= 0:
        return size_bits
    n_full, rem = divmod(size_bits, tbs_bits)
    n_full = int(n_full)
    cost = size_bits
    if n_full:
        cost += float(rng.negative_binomial(n_full, 1.0 - p_error)) * tbs_bits
    if rem > 0:
        cost += float(rng.negative_binomial(1, 1.0 - p_error)) * rem
    return cost


class LteSim(CellSim):
    """Full access-reservation-plus-data simulation of one LTE cell."""

    def __init__(self, config: LteConfig, population: DevicePopulation,
                 rep_seed: int, horizon_s: float, **kwargs):
        super().__init__(lte_cell(config), population, rep_seed, horizon_s, **kwargs)
        self.config = config
        self.pusch = PuschServer(self.sim, config.pusch_rate_bps)
        self.rar_window_counts: list[int] | None = [] if self.audit else None

    # -- grant stage: per-window RAR budget ------------------------------------

    def _on_singletons(self, slot_t: float, winners: list[AccessAttempt]) -> None:
        self.sim.schedule(slot_t + self.config.msg_step_s,
                          lambda: self._rar_window(winners))

    def _rar_window(self, winners: list[AccessAttempt]) -> None:
        budget = self.config.rar_window_budget
        granted = 0
        now = self.sim.now
        for attempt in winners:
            if (attempt.report.outcome is not Outcome.PENDING
                    or attempt.state is not AttemptState.AWAITING_GRANT):
                continue
            if granted >= budget or self.active_identifiers >= self.cell.identifier_limit:
                break  # the rest never hear a response and back off at the timeout
            granted += 1
            self._record_grant(now)
            if attempt.rng.random() < self.cell.p_control_error:
                continue  # msg2 lost; budget spent, device times out
            self._acquire_identifier()
            attempt.state = AttemptState.CONNECTED
            self.sim.schedule(now + self.config.msg_step_s,
                              self._make_step(attempt, self._msg3))
        if self.rar_window_counts is not None:
            self.rar_window_counts.append(granted)

    def _make_step(self, attempt: AccessAttempt, step):
        def fire() -> None:
            if attempt.report.outcome is Outcome.PENDING:
                step(attempt)
        return fire

    # -- msg3 / msg4 -------------------------------------------------------------

    def _msg3(self, attempt: AccessAttempt) -> None:
        if attempt.state is not AttemptState.CONNECTED:
            return
        cfg = self.config
        start = self.sim.now
        if cfg.p_data_error > 0:
            tries = int(attempt.rng.geometric(1.0 - cfg.p_data_error))
        else:
            tries = 1
        exhausted = tries > cfg.max_retransmissions
        tries_eff = min(tries, cfg.max_retransmissions)

        def done(t: float) -> None:
            if attempt.report.outcome is not Outcome.PENDING:
                return
            t_eff = t + (tries_eff - 1) * cfg.harq_rtt_s
            if exhausted or t_eff - start > cfg.contention_timeout_s:
                self.sim.schedule(t_eff, self._make_step(attempt, self._handshake_failed))
            else:
                self.sim.schedule(t_eff + cfg.msg_step_s, self._make_step(attempt, self._msg4))

        self.pusch.submit(PuschJob(attempt.report, tries_eff * cfg.msg3_bits, True, done))

    def _handshake_failed(self, attempt: AccessAttempt) -> None:
        if attempt.state is not AttemptState.CONNECTED:
            return
        self._release_identifier()
        self._backoff(attempt, self.sim.now)

    def _msg4(self, attempt: AccessAttempt) -> None:
        if attempt.state is not AttemptState.CONNECTED:
            return
        if attempt.rng.random() < self.cell.p_control_error:
            self._handshake_failed(attempt)
            return
        attempt.state = AttemptState.TRANSMITTING
        self._submit_data(attempt)

    # -- data phase ---------------------------------------------------------------

    def _submit_data(self, attempt: AccessAttempt) -> None:
        report = attempt.report
        bits = draw_transfer_cost_bits(report.size_bytes * 8.0, self.config.tbs_bits,
                                       self.cell.p_data_error, attempt.rng)

        def done(t: float) -> None:
            self._deliver(report, t)
            attempt.state = AttemptState.DONE
            if not self.bypass_access:
                self._release_identifier()

        self.pusch.submit(PuschJob(report, bits, False, done))

    def _withdraw_active(self, attempt: AccessAttempt) -> None:
        self.pusch.abort_if_serving(attempt.report)
        if not self.bypass_access:
            self._release_identifier()


def lte_outage_curve(esm_penetrations, rs_bytes, bandwidth_hz, seed, **kwargs):
    """Sweep eSM penetration at one report size and bandwidth; returns result rows."""
    from .experiment import Scenario, run_scenario

    scenario = Scenario(
        technology="lte",
        bandwidth_hz=bandwidth_hz,
        esm_penetration=list(esm_penetrations),
        rs=[rs_bytes],
        seed=seed,
        **kwargs,
    )
    return run_scenario(scenario)
