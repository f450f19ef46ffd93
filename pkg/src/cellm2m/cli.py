"""Command-line experiment runner.

Subcommands:
  run               execute a sweep scenario; writes results.csv (and figures)
  validate-traffic  generate uplink arrivals only and compare daily volumes
  capacity          data-capacity-only curves for a scenario, no simulation

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .access import POPULATION_STREAM
from .config import ConfigError, parse_config
from .engine import derive_stream, replication_seed
from .experiment import Scenario, build_point_population, results_to_csv, run_scenario
from .traffic import validate_daily_volume, volume_rows_to_csv

logger = logging.getLogger(__name__)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="scenario configuration file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cellm2m", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a sweep scenario")
    _add_common(run_p)
    run_p.add_argument("--seed", type=int, help="override the scenario seed")
    run_p.add_argument("--replications", type=int, help="override replication count")
    run_p.add_argument("--mode", choices=["arp+d", "d-only", "both"],
                       help="override run mode")
    run_p.add_argument("--workers", type=int, help="concurrent replication workers")
    run_p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True,
                       help="render outage figures alongside the CSV")

    vt_p = sub.add_parser("validate-traffic", help="compare generated daily volumes")
    _add_common(vt_p)
    vt_p.add_argument("--days", type=int, help="simulated days (default from config)")
    vt_p.add_argument("--seed", type=int, help="override the scenario seed")
    vt_p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True,
                      help="render the volume comparison figure")

    cap_p = sub.add_parser("capacity", help="analytic data-capacity-only curves")
    _add_common(cap_p)
    cap_p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True)
    return parser


def _apply_overrides(scenario: Scenario, args: argparse.Namespace) -> Scenario:
    updates = {}
    for name in ("seed", "replications", "mode", "workers"):
        value = getattr(args, name, None)
        if value is not None:
            updates[name] = value
    if getattr(args, "days", None) is not None:
        updates["validate_days"] = args.days
    return replace(scenario, **updates) if updates else scenario


def _write_traffic_validation(scenario: Scenario, out_dir: Path, plot: bool) -> Path:
    rep_seed = replication_seed(scenario.seed, 0)
    rng = derive_stream(rep_seed, POPULATION_STREAM)
    point = scenario.sweep_points()[0]
    population = build_point_population(scenario, point, rep_seed)
    rows = validate_daily_volume(population, scenario.validate_days, rng)
    path = out_dir / "traffic_validation.csv"
    path.write_text(volume_rows_to_csv(rows))
    if plot:
        from .plots import render_traffic_figure

        render_traffic_figure(rows, out_dir / "traffic_validation.png")
    return path


def _cmd_run(scenario: Scenario, out_dir: Path, plot: bool) -> None:
    result = run_scenario(scenario)
    (out_dir / "results.csv").write_text(results_to_csv(result))
    if scenario.emit_traffic_validation:
        _write_traffic_validation(scenario, out_dir, plot)
    if plot:
        from .plots import render_outage_figure

        render_outage_figure(result, out_dir / "outage.png")


def _cmd_capacity(scenario: Scenario, out_dir: Path, plot: bool) -> None:
    scenario = replace(scenario, mode="d-only", d_only_method="analytic", replications=1)
    result = run_scenario(scenario)
    (out_dir / "results.csv").write_text(results_to_csv(result))
    if plot:
        from .plots import render_outage_figure

        render_outage_figure(result, out_dir / "outage.png")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        scenario = _apply_overrides(parse_config(args.config), args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "run":
            _cmd_run(scenario, out_dir, args.plot)
        elif args.command == "validate-traffic":
            _write_traffic_validation(scenario, out_dir, args.plot)
        else:
            _cmd_capacity(scenario, out_dir, args.plot)
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit code 3
        logger.exception("run failed")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
