"""cellm2m: discrete-event simulation of GPRS/LTE cells under metering traffic."""

from .access import (
    AccessAttempt,
    AttemptState,
    CellModel,
    ContentionResult,
    Outcome,
    Report,
    backoff_delay,
    contend,
    expire_deadlines,
)
from .capacity import LoadSummary, d_only_outage, offered_load
from .engine import Simulator, derive_stream, replication_seed
from .experiment import Scenario, SweepPoint, run_scenario
from .gprs import GprsConfig, GprsSim, gprs_cell, gprs_outage_curve
from .lte import LteConfig, LteSim, lte_cell, lte_outage_curve
from .metrics import OutageEstimate, aggregate, outage, reliability_by_usecase
from .traffic import (
    ArrivalProcess,
    DeviceClass,
    DevicePopulation,
    DeviceSpec,
    EsmFrameSpec,
    UseCaseProfile,
    build_population,
    esm_profile,
    esm_report_size,
    next_arrival,
    sm_profiles,
    validate_daily_volume,
)

__version__ = "0.1.0"
