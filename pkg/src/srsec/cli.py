"""Command-line surface: `srsec <experiment> [options]`.

Subcommands: solve, converge, region, alpha-sweep, validate, oma-compare.
Exit codes: 0 success, 2 configuration error, 3 nothing feasible anywhere,
4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .cccp import SolveStatus
from .experiments import (
    ConfigError,
    emit_outputs,
    parse_config,
    run_alpha_sweep,
    run_converge,
    run_oma_compare,
    run_region,
    run_solve,
    run_validate,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4

_DRIVERS = {
    "converge": run_converge,
    "region": run_region,
    "alpha-sweep": run_alpha_sweep,
    "validate": run_validate,
    "oma-compare": run_oma_compare,
}

_HELP = {
    "solve": "solve one seeded instance and print the report as JSON",
    "converge": "objective trace per iteration for each target pair",
    "region": "achieved-rate comparison against the TDMA baseline over a target grid",
    "alpha-sweep": "achieved rate versus the reflection coefficient",
    "validate": "Monte Carlo check of the closed-form outage probability",
    "oma-compare": "paired per-instance comparison against the TDMA baseline",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srsec",
        description="Secrecy beamforming for a backscatter-aided NOMA downlink.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "converge", "region", "alpha-sweep", "validate", "oma-compare"):
        sp = sub.add_parser(name, help=_HELP[name])
        sp.add_argument("--config", metavar="PATH", help="YAML config file")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", metavar="DIR", help="output directory")
        sp.add_argument("--format", choices=("csv", "json"), help="table format")
        sp.add_argument("--emit-svg", action="store_const", const=True,
                        help="also write a minimal SVG line plot")
        sp.add_argument("--dump-subproblem", metavar="PATH",
                        help="write the first assembled subproblem as text")
    return parser


def _report_as_dict(rep) -> dict:
    out = {
        "status": rep.status.value,
        "r_b": rep.r_b,
        "zeta": rep.zeta,
        "iterations": len(rep.omega_trace),
        "omega_trace": list(rep.omega_trace),
        "rank_ratios": rep.rank_ratios,
        "residuals": rep.residuals,
        "wall_time": rep.wall_time,
        "diagnostics": {k: v for k, v in rep.diagnostics.items()
                        if isinstance(v, (str, int, float, bool, type(None)))},
    }
    if rep.beams is not None:
        out["w_c"] = [[z.real, z.imag] for z in rep.beams.w_c]
        out["w_e"] = [[z.real, z.imag] for z in rep.beams.w_e]
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        "seed": args.seed,
        "out_dir": args.out,
        "format": args.format,
        "emit_svg": args.emit_svg,
        "dump_subproblem": args.dump_subproblem,
    }
    try:
        cfg = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "solve":
        rep = run_solve(cfg)
        print(json.dumps(_report_as_dict(rep), indent=2))
        if rep.status is SolveStatus.INFEASIBLE:
            return EXIT_INFEASIBLE
        if rep.status is SolveStatus.SOLVER_FAILURE:
            return EXIT_SOLVER
        return EXIT_OK

    rows = _DRIVERS[args.command](cfg)
    try:
        paths = emit_outputs(rows, cfg, args.command)
    except ConfigError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for p in paths:
        print(p)

    if args.command in ("converge", "validate"):
        nothing = not rows
    elif args.command == "alpha-sweep":
        nothing = all(r["feasible_frac"] == 0 for r in rows)
    elif args.command == "region":
        nothing = all(r["feasible_frac_noma"] == 0 and r["feasible_frac_oma"] == 0
                      for r in rows)
    else:  # oma-compare
        nothing = all(r["feasible_noma"] == 0 and r["feasible_oma"] == 0 for r in rows)
    return EXIT_INFEASIBLE if nothing else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
