"""Scenario configuration files: flat ``key = value`` lines with sections.

Grammar: ``# comment`` lines, ``[section]`` headers (organizational), and
``key = value`` pairs; list values are comma-separated. Unknown keys and
out-of-range values are rejected with line-numbered diagnostics. Every
parameter has a default matching the reference evaluation scenario (4500
meters, 90/10 residential split, control/data error probabilities 1e-2/1e-1),
so a minimal file only names the technology.
"""

from __future__ import annotations

from pathlib import Path

from .experiment import Scenario

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


class ConfigError(ValueError):
    """Configuration file problem, with file/line context."""

    def __init__(self, path, line_no: int | None, message: str):
        where = f"{path}:{line_no}: " if line_no is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line_no = line_no


def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _parse_ri(raw: str):
    if raw == "default":
        return "default"
    value = int(raw)
    if value not in (300, 60, 30, 15):
        raise ValueError("reporting interval must be one of default, 300, 60, 30, 15")
    return value


def _positive_int(raw: str) -> int:
    value = int(raw)
    if value <= 0:
        raise ValueError("must be a positive integer")
    return value


def _non_negative_int(raw: str) -> int:
    value = int(raw)
    if value < 0:
        raise ValueError("must be >= 0")
    return value


def _positive_float(raw: str) -> float:
    value = float(raw)
    if value <= 0:
        raise ValueError("must be > 0")
    return value


def _probability(raw: str) -> float:
    value = float(raw)
    if not 0 <= value < 1:
        raise ValueError("must lie in [0, 1)")
    return value


def _penetration_list(raw: str) -> list[float]:
    values = [float(v) for v in raw.split(",") if v.strip() != ""]
    if not values:
        raise ValueError("needs at least one value")
    for v in values:
        if not 0 <= v <= 100:
            raise ValueError("penetration values must lie in [0, 100]")
    return values


def _int_list(raw: str) -> list[int]:
    values = [int(v) for v in raw.split(",") if v.strip() != ""]
    if not values:
        raise ValueError("needs at least one value")
    for v in values:
        if v < 0:
            raise ValueError("values must be >= 0")
    return values


def _bandwidth(raw: str) -> float:
    mhz = float(raw)
    if mhz not in (1.4, 10):
        raise ValueError("bandwidth_mhz must be 1.4 or 10")
    return mhz * 1e6


def _queue_capacity(raw: str):
    if raw.lower() in ("none", "unbounded"):
        return None
    return _positive_int(raw)


# key -> (destination, attribute, converter); destination "" writes a Scenario
# field directly, otherwise the named override dict.
_KEYS = {
    "technology": ("", "technology", lambda r: r),
    "bandwidth_mhz": ("", "bandwidth_hz", _bandwidth),
    "n_sm": ("", "n_sm", _int_list),
    "ri": ("", "ri", lambda r: [_parse_ri(v.strip()) for v in r.split(",") if v.strip()]),
    "esm_penetration": ("", "esm_penetration", _penetration_list),
    "rs": ("", "rs", lambda r: [_positive_int(v.strip()) for v in r.split(",") if v.strip()]),
    "seed": ("", "seed", _non_negative_int),
    "replications": ("", "replications", _positive_int),
    "horizon_s": ("", "horizon_s", _positive_float),
    "warmup_s": ("", "warmup_s", lambda r: float(r)),
    "mode": ("", "mode", lambda r: r),
    "sm_background": ("", "sm_background", _parse_bool),
    "d_only_method": ("", "d_only_method", lambda r: r),
    "workers": ("", "workers", _positive_int),
    "audit": ("", "audit", _parse_bool),
    "validate_days": ("", "validate_days", _positive_int),
    "emit_traffic_validation": ("", "emit_traffic_validation", _parse_bool),

    "p_control_error": ("access", "p_control_error", _probability),
    "p_data_error": ("access", "p_data_error", _probability),
    "max_retransmissions": ("access", "max_retransmissions", _non_negative_int),
    "backoff_window_s": ("access", "backoff_window_s", _positive_float),
    "grant_timeout_s": ("access", "grant_timeout_s", _positive_float),
    "grant_queue_capacity": ("access", "grant_queue_capacity", _queue_capacity),
    "identifier_limit": ("access", "identifier_limit", _positive_int),

    "rao_rate_per_s": ("gprs", "rao_rate_per_s", _positive_float),
    "agch_rate_per_s": ("gprs", "agch_rate_per_s", _positive_float),
    "n_pdch": ("gprs", "n_pdch", _positive_int),
    "usf_per_pdch": ("gprs", "usf_per_pdch", _positive_int),
    "per_pdch_rate_bps": ("gprs", "per_pdch_rate_bps", _positive_float),
    "block_period_s": ("gprs", "block_period_s", _positive_float),

    "n_preambles": ("lte", "n_preambles", _positive_int),
    "prach_period_s": ("lte", "prach_period_s", _positive_float),
    "rar_grant_budget_per_s": ("lte", "rar_grant_budget_per_s", _positive_float),
    "tbs_per_tti_bits": ("lte", "tbs_per_tti_bits", _positive_int),
    "msg3_prbs": ("lte", "msg3_prbs", _positive_int),
    "msg_step_s": ("lte", "msg_step_s", _positive_float),
    "harq_rtt_s": ("lte", "harq_rtt_s", _positive_float),
    "contention_timeout_s": ("lte", "contention_timeout_s", _positive_float),
    "tti_s": ("lte", "tti_s", _positive_float),
}


def parse_config(path) -> Scenario:
    """Parse a scenario file; raises ConfigError with line-numbered diagnostics."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(path, None, "no such file")

    fields: dict[str, object] = {}
    overrides: dict[str, dict] = {"access": {}, "gprs": {}, "lte": {}}

    for line_no, raw_line in enumerate(path.read_text().splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            continue  # section headers organize, keys are globally unique
        if "=" not in line:
            raise ConfigError(path, line_no, f"malformed line (expected key = value): {line!r}")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.split("#", 1)[0].strip()
        if key not in _KEYS:
            raise ConfigError(path, line_no, f"unknown key: {key!r}")
        dest, attr, convert = _KEYS[key]
        try:
            value = convert(raw_value)
        except ValueError as exc:
            raise ConfigError(path, line_no, f"bad value for {key!r}: {exc}") from None
        if dest:
            overrides[dest][attr] = value
        else:
            fields[attr] = value

    try:
        scenario = Scenario(
            access=overrides["access"], gprs=overrides["gprs"], lte=overrides["lte"],
            **fields,
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(path, None, str(exc)) from None
    if scenario.horizon_s is not None and scenario.warmup_s is not None:
        if scenario.warmup_s >= scenario.horizon_s:
            raise ConfigError(path, None, "warmup_s must be smaller than horizon_s")
    return scenario
