"""Sweep runner: expands a scenario into sweep points, executes replications
(serially or across worker processes), and assembles deterministic result rows.

One scenario describes a cartesian sweep over population size, reporting
interval, eSM penetration, and eSM report size, executed in one or both of
two modes: the full access-reservation-plus-data simulation ("ARP+D") and the
data-capacity-only reference ("D", analytic deficit by default, optionally a
simulation with the access protocol bypassed).
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from .access import CellSim, POPULATION_STREAM
from .capacity import LoadSummary, d_only_outage
from .engine import derive_stream, replication_seed
from .gprs import GprsConfig, GprsSim
from .lte import LteConfig, LteSim
from .metrics import OutageEstimate, aggregate, window_counts
from .traffic import DAY_S, DeviceClass, build_population

logger = logging.getLogger(__name__)

MODE_ARP_D = "ARP+D"
MODE_D = "D"

GPRS_CARRIER_HZ = 200_000.0

RESULTS_HEADER = (
    "scenario_id,technology,bandwidth_hz,n_sm,ri_s,esm_penetration_pct,rs_bytes,"
    "mode,replication,seed,outage,ci95,reports_total,reports_failed_deadline,"
    "reports_failed_retries"
)

# Fields accepted as overrides for the technology configurations.
ACCESS_OVERRIDE_KEYS = {
    "p_control_error", "p_data_error", "max_retransmissions",
    "backoff_window_s", "grant_timeout_s", "grant_queue_capacity",
}


@dataclass(frozen=True)
class SweepPoint:
    technology: str
    bandwidth_hz: float
    n_sm: int
    ri: object            # "default" or seconds
    esm_penetration_pct: float
    rs_bytes: int

    @property
    def scenario_id(self) -> str:
        tech = self.technology
        if tech == "lte":
            tech = f"lte{self.bandwidth_hz / 1e6:g}"
        return (f"{tech}-n{self.n_sm}-ri{self.ri}"
                f"-pen{self.esm_penetration_pct:g}-rs{self.rs_bytes}")


@dataclass
class Scenario:
    technology: str = "gprs"
    bandwidth_hz: float = 1_400_000.0
    n_sm: list[int] = field(default_factory=lambda: [4500])
    ri: list = field(default_factory=lambda: ["default"])
    esm_penetration: list[float] = field(default_factory=lambda: [0.0])
    rs: list[int] = field(default_factory=lambda: [3848])
    seed: int = 1
    replications: int = 10
    horizon_s: float | None = None
    warmup_s: float | None = None
    mode: str = "both"                 # arp+d | d-only | both
    sm_background: bool = True
    d_only_method: str = "analytic"    # analytic | sim
    workers: int | None = None
    audit: bool = False
    validate_days: int = 30
    emit_traffic_validation: bool = False
    gprs: dict = field(default_factory=dict)
    lte: dict = field(default_factory=dict)
    access: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.technology not in ("gprs", "lte"):
            raise ValueError(f"unknown technology: {self.technology!r}")
        if self.mode not in ("arp+d", "d-only", "both"):
            raise ValueError(f"unknown mode: {self.mode!r}")
        if self.d_only_method not in ("analytic", "sim"):
            raise ValueError(f"unknown d_only_method: {self.d_only_method!r}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if any(not 0 <= p <= 100 for p in self.esm_penetration):
            raise ValueError("esm penetration values must lie in [0, 100]")

    def resolved_horizon(self) -> float:
        if self.horizon_s is not None:
            return self.horizon_s
        # phasor streams mix in seconds; meter-reading sweeps need hours
        return 600.0 if any(p > 0 for p in self.esm_penetration) else 7200.0

    def resolved_warmup(self) -> float:
        if self.warmup_s is not None:
            return self.warmup_s
        return 0.1 * self.resolved_horizon()

    def sweep_points(self) -> list[SweepPoint]:
        points: list[SweepPoint] = []
        seen = set()
        for n_sm in self.n_sm:
            for ri in self.ri:
                for pen in self.esm_penetration:
                    for rs in self.rs:
                        key = (n_sm, ri, pen, rs if pen > 0 else None)
                        if key in seen:
                            continue  # report size is moot without eSMs
                        seen.add(key)
                        points.append(SweepPoint(
                            technology=self.technology,
                            bandwidth_hz=(self.bandwidth_hz if self.technology == "lte"
                                          else GPRS_CARRIER_HZ),
                            n_sm=n_sm,
                            ri=ri,
                            esm_penetration_pct=pen,
                            rs_bytes=rs,
                        ))
        return points

    def resolved_workers(self) -> int:
        if self.workers is not None:
            return max(1, self.workers)
        env = os.environ.get("CELLM2M_THREADS")
        if env:
            return max(1, int(env))
        return 1


@dataclass
class ResultRow:
    point: SweepPoint
    mode: str
    replication: int
    seed: int
    outage: float | None
    ci95: float | None
    reports_total: int | None
    reports_failed_deadline: int | None
    reports_failed_retries: int | None


@dataclass
class SweepResult:
    scenario: Scenario
    rows: list[ResultRow]
    estimates: dict[tuple[str, str], OutageEstimate]

    def estimate(self, point: SweepPoint, mode: str) -> OutageEstimate:
        return self.estimates[(point.scenario_id, mode)]


def build_cell_config(scenario: Scenario, point: SweepPoint):
    overrides = {k: v for k, v in scenario.access.items() if k in ACCESS_OVERRIDE_KEYS}
    if scenario.technology == "gprs":
        overrides.update(scenario.gprs)
        return GprsConfig(**overrides)
    overrides.update(scenario.lte)
    overrides.setdefault("bandwidth_hz", point.bandwidth_hz)
    if "identifier_limit" in scenario.access:
        overrides["identifier_limit"] = scenario.access["identifier_limit"]
    return LteConfig(**overrides)


def build_point_population(scenario: Scenario, point: SweepPoint, rep_seed: int):
    rng = derive_stream(rep_seed, POPULATION_STREAM)
    return build_population(point.n_sm, point.esm_penetration_pct,
                            point.rs_bytes, point.ri, rng)


def _build_sim(scenario: Scenario, point: SweepPoint, rep_seed: int,
               bypass_access: bool) -> CellSim:
    population = build_point_population(scenario, point, rep_seed)
    config = build_cell_config(scenario, point)
    cls = GprsSim if scenario.technology == "gprs" else LteSim
    return cls(config, population, rep_seed, scenario.resolved_horizon(),
               sm_background=scenario.sm_background,
               bypass_access=bypass_access,
               audit=scenario.audit)


def run_point_replication(scenario: Scenario, point: SweepPoint, replication: int,
                          mode: str) -> ResultRow:
    """Execute one simulated replication of one sweep point (pool work item)."""
    rep_seed = replication_seed(scenario.seed, replication)
    sim = _build_sim(scenario, point, rep_seed, bypass_access=(mode == MODE_D))
    sim.run()
    sim.verify_conservation()
    counts = window_counts(sim.reports, scenario.resolved_warmup(),
                           scenario.resolved_horizon())
    outage_value = counts.failed / counts.total if counts.total else None
    return ResultRow(
        point=point, mode=mode, replication=replication, seed=rep_seed,
        outage=outage_value, ci95=None,
        reports_total=counts.total,
        reports_failed_deadline=counts.failed_deadline,
        reports_failed_retries=counts.failed_retries,
    )


def analytic_d_rows(scenario: Scenario, point: SweepPoint) -> list[ResultRow]:
    """Deficit-model rows, repeated per replication to keep the CSV shape uniform."""
    rep_seed = replication_seed(scenario.seed, 0)
    population = build_point_population(scenario, point, rep_seed)
    config = build_cell_config(scenario, point)
    offered = 0.0
    for device in population.devices:
        if not scenario.sm_background and device.device_class is not DeviceClass.ESM:
            continue
        offered += sum(p.mean_daily_bytes() for p in device.profiles) / DAY_S
    value = d_only_outage(LoadSummary(offered, config.data_capacity_bytes_per_s))
    return [
        ResultRow(point=point, mode=MODE_D, replication=rep,
                  seed=replication_seed(scenario.seed, rep),
                  outage=value, ci95=0.0,
                  reports_total=None, reports_failed_deadline=None,
                  reports_failed_retries=None)
        for rep in range(scenario.replications)
    ]


def run_scenario(scenario: Scenario) -> SweepResult:
    points = scenario.sweep_points()
    modes = {"arp+d": [MODE_ARP_D], "d-only": [MODE_D], "both": [MODE_ARP_D, MODE_D]}[scenario.mode]

    tasks: list[tuple[SweepPoint, int, str]] = []
    rows: list[ResultRow] = []
    for point in points:
        for mode in modes:
            if mode == MODE_D and scenario.d_only_method == "analytic":
                rows.extend(analytic_d_rows(scenario, point))
                continue
            for rep in range(scenario.replications):
                tasks.append((point, rep, mode))

    workers = scenario.resolved_workers()
    if workers > 1 and len(tasks) > 1:
        logger.info("running %d replications on %d workers", len(tasks), workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_point_replication, scenario, p, r, m)
                       for p, r, m in tasks]
            rows.extend(f.result() for f in futures)
    else:
        for i, (point, rep, mode) in enumerate(tasks):
            logger.info("replication %d/%d: %s %s rep %d",
                        i + 1, len(tasks), point.scenario_id, mode, rep)
            rows.append(run_point_replication(scenario, point, rep, mode))

    rows.sort(key=lambda r: (r.point.scenario_id, r.mode, r.replication))

    estimates: dict[tuple[str, str], OutageEstimate] = {}
    for point in points:
        for mode in modes:
            group = [r for r in rows if r.point.scenario_id == point.scenario_id and r.mode == mode]
            outages = [r.outage for r in group if r.outage is not None]
            if not outages:
                continue
            n_reports = sum(r.reports_total or 0 for r in group)
            est = aggregate(outages, n_reports)
            estimates[(point.scenario_id, mode)] = est
            if est.ci95_halfwidth is not None:
                for r in group:
                    if r.ci95 is None:
                        r.ci95 = est.ci95_halfwidth
    return SweepResult(scenario=scenario, rows=rows, estimates=estimates)


def _fmt(value, pattern: str = "{:.6f}") -> str:
    if value is None:
        return ""
    return pattern.format(value)


def results_to_csv(result: SweepResult) -> str:
    lines = [RESULTS_HEADER]
    for r in result.rows:
        p = r.point
        lines.append(",".join([
            p.scenario_id,
            p.technology,
            f"{p.bandwidth_hz:.0f}",
            str(p.n_sm),
            str(p.ri),
            f"{p.esm_penetration_pct:g}",
            str(p.rs_bytes),
            r.mode,
            str(r.replication),
            str(r.seed),
            _fmt(r.outage),
            _fmt(r.ci95),
            "" if r.reports_total is None else str(r.reports_total),
            "" if r.reports_failed_deadline is None else str(r.reports_failed_deadline),
            "" if r.reports_failed_retries is None else str(r.reports_failed_retries),
        ]))
    return "\n".join(lines) + "\n"
