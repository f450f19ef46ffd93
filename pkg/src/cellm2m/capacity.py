"""Data-capacity-only outage model, the analytic twin of the full simulation.

The protocol-free view asks only whether the cell's data channel can carry
the mean offered load: below capacity the deficit model reports zero outage,
above it the unservable fraction of the load. Full-protocol simulation adds
the contention, grant, and identifier failure modes on top, so its outage
should dominate this curve everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

from .traffic import DAY_S, DevicePopulation


@dataclass(frozen=True)
class LoadSummary:
    offered_bytes_per_s: float
    capacity_bytes_per_s: float

    def __post_init__(self) -> None:
        if self.offered_bytes_per_s < 0 or self.capacity_bytes_per_s < 0:
            raise ValueError("loads must be non-negative")


def offered_load(population: DevicePopulation) -> float:
    """Mean uplink load in bytes/second over every stream of every device."""
    total_daily = 0.0
    for device in population.devices:
        for profile in device.profiles:
            total_daily += profile.mean_daily_bytes()
    return total_daily / DAY_S


def d_only_outage(load: LoadSummary) -> float:
    """Deficit outage: the fraction of offered load the data channel cannot carry."""
    if load.offered_bytes_per_s <= load.capacity_bytes_per_s:
        return 0.0
    return 1.0 - load.capacity_bytes_per_s / load.offered_bytes_per_s
