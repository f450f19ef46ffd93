"""Figure rendering for sweep results and traffic validation tables.

Figures are written next to the delimited output so a run leaves both the raw
rows and a rendered outage curve per scenario. Rendering is headless (Agg).
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .experiment import MODE_ARP_D, MODE_D, SweepResult
from .traffic import VolumeRow

_SWEEP_FIELDS = ("esm_penetration_pct", "n_sm", "ri", "rs_bytes")
_AXIS_LABEL = {
    "esm_penetration_pct": "eSM penetration [%]",
    "n_sm": "smart meters in cell",
    "ri": "reporting interval [s]",
    "rs_bytes": "report size [bytes]",
}
_MODE_STYLE = {MODE_ARP_D: dict(linestyle="-", marker="o"),
               MODE_D: dict(linestyle="--", marker="s")}


def _sweep_field(points) -> str:
    for name in _SWEEP_FIELDS:
        if len({getattr(p, name) for p in points}) > 1:
            return name
    return "esm_penetration_pct"


def render_outage_figure(result: SweepResult, out_path) -> Path:
    """Outage versus the swept dimension, one line per (mode, fixed-parameter set)."""
    out_path = Path(out_path)
    points = sorted({r.point for r in result.rows},
                    key=lambda p: p.scenario_id)
    field = _sweep_field(points)
    categorical = field == "ri"

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    groups: dict[tuple, list] = {}
    for point in points:
        rest = tuple(getattr(point, n) for n in _SWEEP_FIELDS if n != field)
        for mode in (MODE_ARP_D, MODE_D):
            if (point.scenario_id, mode) in result.estimates:
                groups.setdefault((mode, rest), []).append(point)

    x_labels: list[str] = []
    for (mode, _rest), group in sorted(groups.items(), key=lambda kv: str(kv[0])):
        group.sort(key=lambda p: (str(getattr(p, field)) if categorical
                                  else float(getattr(p, field))))
        xs = []
        for p in group:
            if categorical:
                label = str(getattr(p, field))
                if label not in x_labels:
                    x_labels.append(label)
                xs.append(x_labels.index(label))
            else:
                xs.append(float(getattr(p, field)))
        ys = [result.estimate(p, mode).mean for p in group]
        errs = [result.estimate(p, mode).ci95_halfwidth or 0.0 for p in group]
        label = mode if len({g for (_, g) in groups}) <= 2 else f"{mode} {_rest}"
        ax.errorbar(xs, ys, yerr=errs, capsize=3, label=label, **_MODE_STYLE[mode])

    if categorical and x_labels:
        ax.set_xticks(range(len(x_labels)))
        ax.set_xticklabels(x_labels)
    ax.axhline(0.1, color="gray", linewidth=0.8, linestyle=":")
    ax.set_xlabel(_AXIS_LABEL[field])
    ax.set_ylabel("outage probability")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    title = result.scenario.technology.upper()
    if result.scenario.technology == "lte":
        title += f" {result.scenario.bandwidth_hz / 1e6:g} MHz"
    ax.set_title(f"{title} outage vs {_AXIS_LABEL[field]}")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_traffic_figure(rows: Sequence[VolumeRow], out_path) -> Path:
    """Modeled versus reference daily uplink volume per use case (log scale)."""
    out_path = Path(out_path)
    uplink = [r for r in rows
              if r.direction == "uplink" and r.reference_bytes_per_meter_day]
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    xs = range(len(uplink))
    width = 0.4
    ax.bar([x - width / 2 for x in xs], [r.model_bytes_per_meter_day for r in uplink],
           width=width, label="model")
    ax.bar([x + width / 2 for x in xs], [r.reference_bytes_per_meter_day for r in uplink],
           width=width, label="reference")
    ax.set_xticks(list(xs))
    ax.set_xticklabels([r.use_case for r in uplink], rotation=30, ha="right", fontsize=8)
    ax.set_yscale("log")
    ax.set_ylabel("bytes per meter per day")
    ax.grid(alpha=0.3, axis="y")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
