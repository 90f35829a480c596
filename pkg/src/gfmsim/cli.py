"""Command-line front end.

Subcommands: run (simulate a preset or JSON config), compare (deviation
reduction between two traces), check (scenario acceptance thresholds),
preset (list shipped scenarios). Exit codes: 0 success, 1 failed checks,
2 bad configuration or arguments, 3 simulation fault.

The output directory can also be set through the GFMSIM_OUT environment
variable; an explicit --out wins.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import checks as checks_mod
from .config_io import (
    ConfigError,
    apply_override,
    config_from_dict,
    config_to_dict,
    load_config_file,
)
from .engine import PRESET_NAMES, compare, preset, run
from .network import SimulationFault
from .trace_io import read_trace_csv, write_metrics_json, write_trace_csv

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_CONFIG = 2
EXIT_SIM_FAULT = 3


def _resolve_out_dir(args) -> Path:
    if args.out is not None:
        return Path(args.out)
    env = os.environ.get("GFMSIM_OUT")
    return Path(env) if env else Path(".")


def cmd_run(args) -> int:
    if (args.preset is None) == (args.config is None):
        print("error: exactly one of --preset / --config is required", file=sys.stderr)
        return EXIT_BAD_CONFIG
    try:
        if args.preset is not None:
            config = preset(args.preset)
        else:
            config = load_config_file(args.config)
        # All overrides go through the dict form so presets and files behave
        # identically.
        data = config_to_dict(config)
        if args.dt is not None:
            data["dt_s"] = args.dt
        if args.duration is not None:
            data["duration_s"] = args.duration
        if args.seed is not None:
            data["seed"] = args.seed
            if isinstance(data.get("load"), dict) and "profile" in data["load"]:
                data["load"]["profile"]["seed"] = args.seed
        for item in args.set or []:
            if "=" not in item:
                print(f"error: --set expects key=value, got {item!r}", file=sys.stderr)
                return EXIT_BAD_CONFIG
            key, value = item.split("=", 1)
            apply_override(data, key, value)
        config = config_from_dict(data)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG

    out_dir = _resolve_out_dir(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        trace, metrics = run(config)
    except SimulationFault as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.trace is not None and exc.trace.t.size:
            write_trace_csv(exc.trace, out_dir / "trace.csv")
            print(f"partial trace written to {out_dir / 'trace.csv'}", file=sys.stderr)
        if exc.metrics is not None:
            write_metrics_json(exc.metrics, out_dir / "metrics.json")
        return EXIT_SIM_FAULT

    write_trace_csv(trace, out_dir / "trace.csv")
    write_metrics_json(metrics, out_dir / "metrics.json")
    print(f"trace: {out_dir / 'trace.csv'}")
    print(f"metrics: {out_dir / 'metrics.json'}")
    if args.plot:
        from .plots import write_plots

        for path in write_plots(trace, out_dir):
            print(f"plot: {path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        trace_a = read_trace_csv(args.trace_with)
        trace_b = read_trace_csv(args.trace_without)
        report = compare(trace_a, trace_b)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    print(
        f"under-frequency: {report.f_min_without_hz:.3f} Hz -> "
        f"{report.f_min_with_hz:.3f} Hz ({report.under_reduction_pct:.1f}% reduction)"
    )
    print(
        f"over-frequency:  {report.f_max_without_hz:.3f} Hz -> "
        f"{report.f_max_with_hz:.3f} Hz ({report.over_reduction_pct:.1f}% reduction)"
    )
    print(
        f"voltage dip:     {report.v_dip_without_pu:.4f} pu -> "
        f"{report.v_dip_with_pu:.4f} pu ({report.v_dip_reduction_pct:.1f}% reduction)"
    )
    payload = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    if args.json is not None:
        Path(args.json).write_text(payload + "\n")
        print(f"report: {args.json}")
    else:
        print(payload)
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        results = checks_mod.run_checks(args.preset)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except SimulationFault as exc:
        print(f"error: simulation fault during checks: {exc}", file=sys.stderr)
        return EXIT_SIM_FAULT
    for result in results:
        print(result.line())
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} of {len(results)} checks failed")
        return EXIT_CHECK_FAILED
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def cmd_preset(args) -> int:
    if args.action == "list":
        for name in PRESET_NAMES:
            print(name)
        return EXIT_OK
    print(f"error: unknown preset action {args.action!r}", file=sys.stderr)
    return EXIT_BAD_CONFIG


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gfmsim",
        description="Grid-forming BESS / data-center dynamics simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario")
    p_run.add_argument("--preset", choices=PRESET_NAMES)
    p_run.add_argument("--config", type=Path, help="JSON scenario config")
    p_run.add_argument("--out", type=Path, help="output directory (default: . or $GFMSIM_OUT)")
    p_run.add_argument("--dt", type=float, help="override dt [s]")
    p_run.add_argument("--duration", type=float, help="override duration [s]")
    p_run.add_argument("--seed", type=int, help="override the load-profile seed")
    p_run.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override a config field by dotted path, e.g. grid.x_th_pu=0.3",
    )
    p_run.add_argument("--plot", action="store_true", help="emit SVG panels")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="deviation reduction between two traces")
    p_cmp.add_argument("trace_with", type=Path)
    p_cmp.add_argument("trace_without", type=Path)
    p_cmp.add_argument("--json", type=Path, help="write the JSON report here")
    p_cmp.set_defaults(func=cmd_compare)

    p_chk = sub.add_parser("check", help="run a preset's acceptance checks")
    p_chk.add_argument("preset", choices=PRESET_NAMES)
    p_chk.set_defaults(func=cmd_check)

    p_pre = sub.add_parser("preset", help="preset utilities")
    p_pre.add_argument("action", choices=["list"])
    p_pre.set_defaults(func=cmd_preset)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
