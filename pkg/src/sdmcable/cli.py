"""Command-line front end: ``study run|validate|calibrate-feed CONFIG``.

Exit codes: 0 success, 1 invalid config, 2 a required anchor point
(baseline or feed calibration) is numerically infeasible.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError
from .study import AnchorError, calibrated_feed, load_config, run_study

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INFEASIBLE = 2


def _load(path: str):
    try:
        return load_config(path)
    except FileNotFoundError:
        raise ConfigError([f"{path}: no such file"]) from None


def _report_config_error(path, exc: ConfigError) -> int:
    print(f"{path}: invalid config", file=sys.stderr)
    for problem in exc.problems:
        print(f"  - {problem}", file=sys.stderr)
    return EXIT_INVALID


def cmd_validate(args) -> int:
    try:
        cfg = _load(args.config)
    except ConfigError as exc:
        return _report_config_error(args.config, exc)
    print(f"{args.config}: ok ({cfg.study_kind})")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg = _load(args.config)
        if args.workers is not None:
            cfg = cfg.model_copy(update={"execution": cfg.execution.model_copy(update={"workers": args.workers})})
        base = Path(args.config).resolve().parent if args.relative_to_config else None
        report = run_study(cfg, base_dir=base)
    except ConfigError as exc:
        return _report_config_error(args.config, exc)
    except AnchorError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    print(f"wrote {len(report.rows)} rows to {report.table_path}")
    print(f"wrote metadata to {report.metadata_path}")
    return EXIT_OK


def cmd_calibrate_feed(args) -> int:
    try:
        cfg = _load(args.config)
        if cfg.study_kind != "cable-sweep" or cfg.calibration is None:
            raise ConfigError(["calibrate-feed needs a cable-sweep config with a calibration block"])
        feed, cal = calibrated_feed(cfg)
    except ConfigError as exc:
        return _report_config_error(args.config, exc)
    except AnchorError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    out = {
        "boundary_fiber_pairs": cal.boundary_fiber_pairs,
        "calibration_voltage_kv": cfg.calibration.voltage_kv,
        "cable_resistance_ohm_per_km": feed.cable_resistance_ohm_per_km,
        "control_fraction": feed.control_fraction,
        "eo_efficiency": feed.eo_efficiency,
        "eo_efficiency_min": cal.eo_efficiency_min,
        "eo_efficiency_max": cal.eo_efficiency_max,
        "availability_model": feed.availability_model,
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="study", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a study and write its table and metadata")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=None, help="override execution.workers")
    p.add_argument(
        "--relative-to-config",
        action="store_true",
        help="resolve output paths against the config's directory instead of the working directory",
    )
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("calibrate-feed", help="fit the power-feed efficiency to a fibre-pair boundary")
    p.add_argument("config")
    p.set_defaults(func=cmd_calibrate_feed)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)
