"""Uplink traffic model for smart meters (SM) and PMU-like enhanced smart meters (eSM).

Two SM device classes are modeled: residential meters (90% of a cell) and
commercial/industrial (C/I) meters (10%). Each meter runs one periodic
meter-reading stream plus a set of Poisson event-driven streams (real-time
pricing confirmations, firmware updates, alarms, ...). The eSM adds a 1 Hz
phasor-measurement report stream with a hard 1 s delivery deadline.

Message sizes for the event-driven streams are calibrated so that the mean
daily uplink volume per meter reproduces the OpenSG reference volumes (see
``UPLINK_REFERENCE``); streams for which the reference gives a daily byte
budget but no event rate are carried as 50-byte messages at a rate that
preserves the budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

DAY_S = 86400.0

#: Supported meter-reading reporting intervals (seconds); "default" resolves
#: per device class (4 h residential, 1 h commercial/industrial).
RI_DEFAULT = "default"
SUPPORTED_RIS: tuple = (RI_DEFAULT, 300, 60, 30, 15)

EVENT_DEADLINE_S = 60.0          # delivery bound for event-driven messages
READ_RELIABILITY = 0.995         # periodic reads: top of the 98-99.5% band
DEFAULT_RELIABILITY = 0.98
ALARM_RELIABILITY = 0.99         # islanded distributed customer storage alarms


class DeviceClass(str, Enum):
    RESIDENTIAL = "residential"
    COMMERCIAL_INDUSTRIAL = "commercial-industrial"
    ESM = "esm"


@dataclass(frozen=True)
class ArrivalProcess:
    """Either a fixed-period schedule (with phase offset) or a Poisson stream."""

    kind: str                    # "periodic" | "poisson"
    period_s: float = 0.0
    rate_per_day: float = 0.0
    phase_s: float = 0.0

    @classmethod
    def periodic(cls, period_s: float, phase_s: float = 0.0) -> "ArrivalProcess":
        if period_s <= 0:
            raise ValueError("periodic arrivals need period_s > 0")
        return cls(kind="periodic", period_s=period_s, phase_s=phase_s)

    @classmethod
    def poisson(cls, rate_per_day: float) -> "ArrivalProcess":
        if rate_per_day < 0:
            raise ValueError("poisson rate must be >= 0")
        return cls(kind="poisson", rate_per_day=rate_per_day)


def next_arrival(process: ArrivalProcess, rng: np.random.Generator, now: float) -> float:
    """Next arrival strictly after ``now``; ``inf`` for a zero-rate stream."""
    if now < 0:
        raise ValueError("now must be >= 0")
    if process.kind == "periodic":
        period = process.period_s
        k = math.floor((now - process.phase_s) / period) + 1
        t = process.phase_s + k * period
        while t <= now:  # float guard at period boundaries
            t += period
        return t
    if process.rate_per_day == 0:
        return math.inf
    return now + rng.exponential(DAY_S / process.rate_per_day)


@dataclass(frozen=True)
class UseCaseProfile:
    """One uplink message stream: arrival law, size, deadline, reliability target."""

    name: str
    arrival: ArrivalProcess
    size_bytes: int
    deadline_s: float
    reliability_target: float = DEFAULT_RELIABILITY

    def __post_init__(self) -> None:
        if self.size_bytes <= 0:
            raise ValueError(f"{self.name}: size_bytes must be > 0")
        if self.deadline_s <= 0:
            raise ValueError(f"{self.name}: deadline_s must be > 0")
        if not 0 < self.reliability_target <= 1:
            raise ValueError(f"{self.name}: reliability_target must be in (0, 1]")

    def mean_daily_bytes(self) -> float:
        if self.arrival.kind == "periodic":
            return self.size_bytes * DAY_S / self.arrival.period_s
        return self.size_bytes * self.arrival.rate_per_day


# --- eSM report sizing -------------------------------------------------------

@dataclass(frozen=True)
class EsmFrameSpec:
    """Phasor-measurement framing: per-sample frame plus transport headers.

    Defaults give a 76 B frame (22 B framing overhead + 6 phasors x 8 B +
    1 analog x 4 B + 1 digital x 2 B); 50 samples plus UDP/IPv6 headers
    (8 + 40 B) yield the 3848 B full-rate report.
    """

    n_phasors: int = 6
    n_analogs: int = 1
    n_digitals: int = 1
    samples_per_report: int = 50
    per_frame_overhead_bytes: int = 22
    transport_header_bytes: int = 48

    def __post_init__(self) -> None:
        for name in ("n_phasors", "n_analogs", "n_digitals", "samples_per_report",
                     "per_frame_overhead_bytes", "transport_header_bytes"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def frame_bytes(self) -> int:
        return (self.per_frame_overhead_bytes
                + 8 * self.n_phasors + 4 * self.n_analogs + 2 * self.n_digitals)


def esm_report_size(spec: EsmFrameSpec = EsmFrameSpec()) -> int:
    """Report bytes: samples x frame size plus transport headers."""
    return spec.samples_per_report * spec.frame_bytes + spec.transport_header_bytes


def esm_profile(report_size_bytes: int) -> UseCaseProfile:
    """1 Hz phasor report stream with a 1 s deadline and the given payload."""
    if report_size_bytes <= 0:
        raise ValueError("report size must be positive")
    return UseCaseProfile(
        name="esm_phasor_report",
        arrival=ArrivalProcess.periodic(1.0),
        size_bytes=int(report_size_bytes),
        deadline_s=1.0,
    )


# --- SM profiles -------------------------------------------------------------

# Poisson event-driven streams shared by both SM classes:
# (name, events/day, size bytes, reliability target)
# Sizes either derive from a reference daily byte budget divided by the event
# rate (rtp_price 2400/96, dr_dlc 0.5/0.015, pna_join 1/(5/365), firmware
# group 5/(16/365)) or, for budget-only rows (meter events, service switch,
# prepay, IDCS) and rate-only rows (on-demand read, capped energy), are
# carried as nominal 50 B messages at the budget-preserving rate.
EVENT_STREAMS: tuple[tuple[str, float, int, float], ...] = (
    ("rtp_price", 96.0, 25, DEFAULT_RELIABILITY),
    ("on_demand_read", 0.025, 50, DEFAULT_RELIABILITY),
    ("capped_energy", 5.0 / 365.0, 50, DEFAULT_RELIABILITY),
    ("dr_dlc", 0.015, 33, DEFAULT_RELIABILITY),
    ("pna_join", 5.0 / 365.0, 73, DEFAULT_RELIABILITY),
    ("fw_metrology", 4.0 / 365.0, 114, DEFAULT_RELIABILITY),
    ("prog_metrology", 4.0 / 365.0, 114, DEFAULT_RELIABILITY),
    ("fw_nic", 4.0 / 365.0, 114, DEFAULT_RELIABILITY),
    ("prog_nic", 4.0 / 365.0, 114, DEFAULT_RELIABILITY),
    ("meter_events", 1.0, 50, DEFAULT_RELIABILITY),
    ("service_switch", 0.12, 50, DEFAULT_RELIABILITY),
    ("prepay", 0.16, 50, DEFAULT_RELIABILITY),
    ("idcs_alarm", 0.1, 50, ALARM_RELIABILITY),
)

# Meter-reading payloads: (residential, commercial/industrial) bytes.
READ_SIZE_DEFAULT = {DeviceClass.RESIDENTIAL: 1200, DeviceClass.COMMERCIAL_INDUSTRIAL: 2400}
READ_SIZE_REDUCED = {DeviceClass.RESIDENTIAL: 300, DeviceClass.COMMERCIAL_INDUSTRIAL: 600}
READ_PERIOD_DEFAULT = {DeviceClass.RESIDENTIAL: 14400.0, DeviceClass.COMMERCIAL_INDUSTRIAL: 3600.0}


def _normalize_ri(reporting_interval) -> object:
    if reporting_interval in (None, RI_DEFAULT, "default"):
        return RI_DEFAULT
    ri = int(reporting_interval)
    if ri not in (300, 60, 30, 15):
        raise ValueError(f"unsupported reporting interval: {reporting_interval!r}")
    return ri


def sm_profiles(device_class: DeviceClass, reporting_interval=RI_DEFAULT) -> tuple[UseCaseProfile, ...]:
    """All uplink streams of one SM: periodic meter reading plus event streams."""
    device_class = DeviceClass(device_class)
    if device_class is DeviceClass.ESM:
        raise ValueError("eSM streams come from esm_profile(), not sm_profiles()")
    ri = _normalize_ri(reporting_interval)
    if ri is RI_DEFAULT:
        period = READ_PERIOD_DEFAULT[device_class]
        size = READ_SIZE_DEFAULT[device_class]
    else:
        period = float(ri)
        size = READ_SIZE_REDUCED[device_class]
    reading = UseCaseProfile(
        name="meter_reading",
        arrival=ArrivalProcess.periodic(period),
        size_bytes=size,
        deadline_s=period,
        reliability_target=READ_RELIABILITY,
    )
    events = tuple(
        UseCaseProfile(
            name=name,
            arrival=ArrivalProcess.poisson(rate),
            size_bytes=size_b,
            deadline_s=EVENT_DEADLINE_S,
            reliability_target=target,
        )
        for name, rate, size_b, target in EVENT_STREAMS
    )
    return (reading,) + events


# --- Population --------------------------------------------------------------

@dataclass(frozen=True)
class DeviceSpec:
    device_id: int
    device_class: DeviceClass
    profiles: tuple[UseCaseProfile, ...]
    location: int

    def __post_init__(self) -> None:
        if not self.profiles:
            raise ValueError("every device needs at least one profile")


@dataclass
class DevicePopulation:
    devices: list[DeviceSpec]
    n_residential: int
    n_ci: int
    n_esm: int

    @property
    def n_sm(self) -> int:
        return self.n_residential + self.n_ci

    def iter_sm(self) -> Iterable[DeviceSpec]:
        return (d for d in self.devices if d.device_class is not DeviceClass.ESM)

    def iter_esm(self) -> Iterable[DeviceSpec]:
        return (d for d in self.devices if d.device_class is DeviceClass.ESM)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def build_population(
    n_sm: int,
    esm_penetration_pct: float,
    rs_bytes: int = 3848,
    reporting_interval=RI_DEFAULT,
    rng: np.random.Generator | None = None,
) -> DevicePopulation:
    """Cell population: 90/10 residential/C-I split plus eSMs at random SM locations.

    Periodic streams get an independent uniform phase offset per device.
    Draw order is stable (SM phases first, in device order, then eSM placement)
    so that growing the population never perturbs existing devices.
    """
    if n_sm < 0:
        raise ValueError("n_sm must be >= 0")
    if not 0 <= esm_penetration_pct <= 100:
        raise ValueError("esm penetration must be within [0, 100]")
    rng = rng if rng is not None else np.random.default_rng(0)

    n_residential = _round_half_up(0.9 * n_sm)
    n_ci = n_sm - n_residential
    n_esm = _round_half_up(esm_penetration_pct / 100.0 * n_sm)

    devices: list[DeviceSpec] = []
    for device_id in range(n_sm):
        cls = DeviceClass.RESIDENTIAL if device_id < n_residential else DeviceClass.COMMERCIAL_INDUSTRIAL
        profiles = list(sm_profiles(cls, reporting_interval))
        reading = profiles[0]
        phase = float(rng.uniform(0.0, reading.arrival.period_s))
        profiles[0] = replace(reading, arrival=replace(reading.arrival, phase_s=phase))
        devices.append(DeviceSpec(device_id, cls, tuple(profiles), location=device_id))

    if n_esm:
        locations = rng.choice(n_sm, size=n_esm, replace=False)
        base = esm_profile(rs_bytes)
        for i in range(n_esm):
            phase = float(rng.uniform(0.0, base.arrival.period_s))
            profile = replace(base, arrival=replace(base.arrival, phase_s=phase))
            devices.append(DeviceSpec(n_sm + i, DeviceClass.ESM, (profile,), location=int(locations[i])))

    return DevicePopulation(devices, n_residential, n_ci, n_esm)


# --- Daily volume validation --------------------------------------------------

#: Reference mean uplink volumes, bytes per meter per day, keyed by use case.
#: Meter reading and the total depend on the reporting interval.
UPLINK_REFERENCE: dict[str, object] = {
    "meter_reading": {RI_DEFAULT: 11_000, 300: 95_000, 60: 475_000, 30: 950_000, 15: 1_900_000},
    "service_switch": 6,
    "prepay": 8,
    "meter_events": 50,
    "idcs_alarm": 5,
    "dr_dlc": 0.5,
    "pna_join": 1,
    "rtp_price": 2400,
    "fw_updates": 5,
    "total": {RI_DEFAULT: 13_400, 300: 97_000, 60: 477_000, 30: 952_000, 15: 1_900_000},
}

#: Reference downlink volumes (bytes per meter per day). Downlink is not
#: simulated; it is carried through for reporting only.
DOWNLINK_REFERENCE: dict[str, float] = {
    "meter_reading": 1.25,
    "service_switch": 3,
    "prepay": 3.5,
    "meter_events": 0,
    "idcs_alarm": 2,
    "dr_dlc": 400,
    "pna_join": 1,
    "rtp_price": 10_000,
    "fw_updates": 30_000,
    "total": 40_400,
}

# validation rows aggregate the four firmware/program streams
_FW_GROUP = {"fw_metrology", "prog_metrology", "fw_nic", "prog_nic"}


@dataclass(frozen=True)
class VolumeRow:
    use_case: str
    direction: str
    model_bytes_per_meter_day: float
    reference_bytes_per_meter_day: float | None
    relative_error: float | None


def _periodic_count(phases: np.ndarray, period: float, horizon: float) -> int:
    """Arrivals strictly inside (0, horizon) at phase + k*period, k >= 0."""
    if phases.size == 0:
        return 0
    counts = np.where(
        phases > 0,
        np.ceil((horizon - phases) / period),
        np.ceil(horizon / period) - 1,
    )
    return int(counts.sum())


def validate_daily_volume(
    population: DevicePopulation,
    simulated_days: int,
    rng: np.random.Generator,
) -> list[VolumeRow]:
    """Generate arrival counts only (no protocol) and tabulate bytes/meter/day.

    Poisson streams are sampled as aggregate arrival counts over the horizon
    (exactly equivalent to drawing individual arrivals); periodic streams are
    counted from their per-device phase offsets. Rows compare against the
    reference table where a reference value exists.
    """
    if simulated_days < 1:
        raise ValueError("simulated_days must be >= 1")
    horizon = simulated_days * DAY_S
    n_sm = population.n_sm
    meter_days = max(n_sm, 1) * simulated_days

    model: dict[str, float] = {}
    ri_key: object = RI_DEFAULT

    # periodic meter readings, by phase
    for cls in (DeviceClass.RESIDENTIAL, DeviceClass.COMMERCIAL_INDUSTRIAL):
        members = [d for d in population.iter_sm() if d.device_class is cls]
        if not members:
            continue
        reading = members[0].profiles[0]
        if reading.arrival.period_s in (300.0, 60.0, 30.0, 15.0):
            ri_key = int(reading.arrival.period_s)
        phases = np.array([d.profiles[0].arrival.phase_s for d in members])
        count = _periodic_count(phases, reading.arrival.period_s, horizon)
        model["meter_reading"] = model.get("meter_reading", 0.0) + count * reading.size_bytes

    # Poisson event streams: one aggregate count per stream
    if n_sm:
        for name, rate, size_b, _target in EVENT_STREAMS:
            count = int(rng.poisson(rate * simulated_days * n_sm))
            key = "fw_updates" if name in _FW_GROUP else name
            model[key] = model.get(key, 0.0) + count * size_b

    rows: list[VolumeRow] = []
    total_model = 0.0
    order = ["meter_reading", "service_switch", "prepay", "meter_events", "idcs_alarm",
             "dr_dlc", "pna_join", "rtp_price", "fw_updates", "on_demand_read", "capped_energy"]
    for use_case in order:
        if use_case not in model:
            continue
        per_meter_day = model[use_case] / meter_days
        total_model += per_meter_day
        ref = UPLINK_REFERENCE.get(use_case)
        if isinstance(ref, dict):
            ref = ref[ri_key]
        rel = (per_meter_day - ref) / ref if ref else None
        rows.append(VolumeRow(use_case, "uplink", per_meter_day, ref, rel))

    ref_total = UPLINK_REFERENCE["total"][ri_key]  # type: ignore[index]
    rows.append(VolumeRow("total", "uplink",
                          total_model, ref_total, (total_model - ref_total) / ref_total))

    # eSM stream normalized per eSM, not per meter
    if population.n_esm:
        esm = next(iter(population.iter_esm()))
        rs = esm.profiles[0].size_bytes
        rows.append(VolumeRow("esm_phasor_report", "uplink", rs * DAY_S, None, None))

    # downlink is accounted analytically: pass the reference volumes through
    for use_case, ref in DOWNLINK_REFERENCE.items():
        rows.append(VolumeRow(use_case, "downlink", float(ref), float(ref), 0.0))

    return rows


def volume_rows_to_csv(rows: Sequence[VolumeRow]) -> str:
    lines = ["use_case,direction,bytes_per_meter_per_day_model,bytes_per_meter_per_day_paper,relative_error"]
    for r in rows:
        ref = "" if r.reference_bytes_per_meter_day is None else f"{r.reference_bytes_per_meter_day:.6g}"
        rel = "" if r.relative_error is None else f"{r.relative_error:.6f}"
        lines.append(f"{r.use_case},{r.direction},{r.model_bytes_per_meter_day:.6f},{ref},{rel}")
    return "\n".join(lines) + "\n"
