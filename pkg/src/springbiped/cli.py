"""Experiment runner: ``springbiped run | analyze | compare | trajectories``.

Exit codes: 0 success, 1 domain error (bad configuration, fall, unusable
log), 2 usage error.  All outputs are plain CSV/JSON data files; plotting is
left to external tools.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import cpg as cpg_mod
from .analysis import (
    AnalysisError,
    analyze,
    compare_table,
    format_table,
    load_report,
    write_report,
)
from .config import Bundle, ConfigError, resolve
from .dynamics import SimulationError, run_trial
from .triallog import TrialLog

_CPG_FLAGS = (
    ("frequency", "frequency_hz", "gait frequency in Hz"),
    ("hip-duty-factor", "hip_duty", "stance fraction of the hip trajectory"),
    ("knee-duty-factor", "knee_duty", "hold fraction of the knee trajectory"),
    ("hip-amplitude", "hip_amplitude_deg", "hip cosine amplitude in deg"),
    ("knee-amplitude", "knee_amplitude_deg", "knee sine amplitude in deg"),
    ("hip-offset", "hip_offset_deg", "hip offset in deg"),
    ("knee-offset", "knee_offset_deg", "knee offset in deg"),
    ("hip-swing-steady", "hip_swing_steady", "end-of-swing hold fraction"),
)


def _add_cpg_flags(parser: argparse.ArgumentParser):
    for flag, _, help_text in _CPG_FLAGS:
        parser.add_argument(f"--{flag}", type=float, default=None, help=help_text)


def _apply_cpg_flags(bundle: Bundle, args) -> Bundle:
    overrides = {}
    for flag, attr, _ in _CPG_FLAGS:
        value = getattr(args, flag.replace("-", "_"))
        if value is not None:
            overrides[attr] = value
    if overrides:
        bundle = replace(bundle, cpg=replace(bundle.cpg, **overrides))
    return bundle


def _slug(name: str) -> str:
    return name.lower().replace("+", "_")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="springbiped",
        description="simulate and analyze walking trials of the spring-tendon biped",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one trial per configuration")
    p_run.add_argument(
        "--preset",
        default=None,
        help="comma-separated preset names or config file paths (e.g. 'GAS+SOL,SOL')",
    )
    p_run.add_argument("--config", default=None, help="single configuration file")
    p_run.add_argument("--duration", type=float, default=None, help="trial duration in s")
    p_run.add_argument("--timestep", type=float, default=None, help="integration step in s")
    p_run.add_argument("--integrator", choices=("semi-implicit-euler", "rk4"), default=None)
    p_run.add_argument("--out", default=".", help="output directory")
    _add_cpg_flags(p_run)

    p_an = sub.add_parser("analyze", help="compute a gait report from a trial log")
    p_an.add_argument("log", help="trial log CSV (with its .meta.json sidecar)")
    p_an.add_argument("--out", default=None, help="output directory (default: next to the log)")

    p_cmp = sub.add_parser("compare", help="tabulate metrics across gait reports")
    p_cmp.add_argument("reports", nargs="+", help="two or more *_metrics.json files")
    p_cmp.add_argument("--out", default=None, help="also write the table as CSV here")

    p_tr = sub.add_parser("trajectories", help="dump commanded joint trajectories as CSV")
    p_tr.add_argument("--preset", default="GAS+SOL", help="preset name or config file")
    p_tr.add_argument("--cycles", type=float, default=1.0, help="number of gait cycles")
    p_tr.add_argument("--timestep", type=float, default=1e-3, help="sampling step in s")
    p_tr.add_argument("--out", default=None, help="output CSV (default: stdout)")
    _add_cpg_flags(p_tr)

    return parser


def cmd_run(args) -> int:
    sources = []
    if args.config:
        sources.append(args.config)
    if args.preset:
        sources.extend(s.strip() for s in args.preset.split(",") if s.strip())
    if not sources:
        print("run: provide --preset and/or --config", file=sys.stderr)
        return 2

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    status = 0
    for source in sources:
        bundle = resolve(source)
        bundle = _apply_cpg_flags(bundle, args)
        sim = bundle.sim
        if args.duration is not None:
            sim = replace(sim, duration_s=args.duration, discard_s=min(sim.discard_s, args.duration))
        if args.timestep is not None:
            sim = replace(sim, timestep_s=args.timestep)
        if args.integrator is not None:
            sim = replace(sim, integrator=args.integrator)

        log = run_trial(bundle.robot, bundle.tendons, bundle.cpg, sim)
        stem = _slug(bundle.tendons.name if bundle.tendons.name != "custom" else Path(source).stem)
        csv_path = out_dir / f"{stem}_log.csv"
        log.save(csv_path)
        if log.meta["fall"]:
            print(
                f"{source}: robot fell at t={log.meta['fall_time_s']:.2f} s; "
                f"log written to {csv_path} (flagged non-steady)",
                file=sys.stderr,
            )
            status = 1
        else:
            print(f"{source}: wrote {csv_path} ({log.meta['n_rows']} rows)")
    return status


def cmd_analyze(args) -> int:
    log = TrialLog.load(args.log)
    report = analyze(log)
    out_dir = Path(args.out) if args.out else Path(args.log).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = out_dir / Path(args.log).stem.replace("_log", "")
    metrics_path, curves_path = write_report(report, stem)
    amp = report.amplification
    print(f"configuration:        {report.meta.get('configuration')}")
    print(f"cycles averaged:      {report.n_cycles}")
    print(f"walking speed:        {report.speed_mps:.3f} m/s")
    print(f"power amplification:  {'undefined' if amp is None else f'{amp:.2f}'}")
    print(f"positive peak at:     {report.positive_peak_pct:.1f} % cycle")
    print(f"negative peak at:     {report.negative_peak_pct:.1f} % cycle")
    print(f"toe-off at:           {report.toe_off_pct:.1f} % cycle")
    print(f"total positive CoT:   {report.cot_total:.3f}")
    print(f"net positive CoT:     {report.cot_net:.3f}")
    print(f"wrote {metrics_path} and {curves_path}")
    return 0


def cmd_compare(args) -> int:
    reports = [load_report(p) for p in args.reports]
    header, rows = compare_table(reports)
    print(format_table(header, rows))
    if args.out:
        pd.DataFrame(rows, columns=header).to_csv(args.out, index=False, lineterminator="\n")
        print(f"wrote {args.out}")
    return 0


def cmd_trajectories(args) -> int:
    bundle = resolve(args.preset)
    bundle = _apply_cpg_flags(bundle, args)
    table = cpg_mod.trajectory_table(bundle.cpg, cycles=args.cycles, dt=args.timestep)
    frame = pd.DataFrame(table, columns=list(cpg_mod.TRAJECTORY_COLUMNS))
    if args.out:
        frame.to_csv(args.out, index=False, float_format="%.10g", lineterminator="\n")
        print(f"wrote {args.out}")
    else:
        frame.to_csv(sys.stdout, index=False, float_format="%.10g", lineterminator="\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "analyze":
            return cmd_analyze(args)
        if args.command == "compare":
            return cmd_compare(args)
        if args.command == "trajectories":
            return cmd_trajectories(args)
    except (ConfigError, AnalysisError, SimulationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
