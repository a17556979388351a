"""Experiment drivers and file outputs behind the command-line surface.

Each driver returns plain row dictionaries with a fixed column schema;
``emit_outputs`` writes them as CSV (17 significant digits) or JSON next to an
echo of the effective configuration, optionally with a minimal self-contained
SVG line plot.  For a fixed (config, seed) pair every byte of the CSV output
is reproducible.
"""

from __future__ import annotations

import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .cccp import CccpOptions, SolveStatus, _mrt_candidates, run
from .model import SecrecyTargets
from .montecarlo import ChannelProfile, estimate_outage, sample_instance
from .oma import solve_oma
from .subproblem import SolverOptions, assemble
from .transform import build_coeff_tables

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "run_converge",
    "run_region",
    "run_alpha_sweep",
    "run_validate",
    "run_oma_compare",
    "run_solve",
    "emit_outputs",
    "HEADERS",
]

HEADERS = {
    "converge": ("iter", "r_c", "r_e", "omega", "r_b"),
    "region": ("r_target", "r_b_noma_mean", "r_b_oma_mean",
               "feasible_frac_noma", "feasible_frac_oma"),
    "alpha-sweep": ("alpha", "r_b_mean", "r_b_ci95", "feasible_frac"),
    "validate": ("trial", "r_b", "closedform_success", "empirical_success", "pass"),
    "oma-compare": ("trial", "r_b_noma", "r_b_oma", "feasible_noma", "feasible_oma"),
}


class ConfigError(ValueError):
    """Invalid experiment configuration (unknown key, bad type or range)."""


def _grid(start: float, stop: float, step: float) -> tuple:
    n = int(round((stop - start) / step))
    return tuple(round(start + i * step, 12) for i in range(n + 1))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an experiment needs: channel profile, target pairs, sweep
    grids, trial counts, seed, output controls and solver/loop overrides."""

    profile: ChannelProfile = field(default_factory=ChannelProfile)
    targets: tuple = ((1.0, 0.1), (2.0, 0.2))
    alpha_grid: tuple = _grid(0.0, 1.0, 0.05)
    target_grid: tuple = _grid(0.0, 3.0, 0.1)
    trials: int = 50
    seed: int = 0
    out_dir: str = "."
    format: str = "csv"
    emit_svg: bool = False
    region_mode: str = "equal"  # equal | sweep-rc | sweep-re
    region_fixed: float = 0.1
    validate_draws: int = 100_000
    cccp: CccpOptions = field(default_factory=CccpOptions)
    dump_subproblem: str = ""

    def region_targets(self, r_target: float) -> SecrecyTargets:
        if self.region_mode == "equal":
            return SecrecyTargets(r_target, r_target, self.profile.epsilon)
        if self.region_mode == "sweep-rc":
            return SecrecyTargets(r_target, self.region_fixed, self.profile.epsilon)
        return SecrecyTargets(self.region_fixed, r_target, self.profile.epsilon)

    def first_targets(self) -> SecrecyTargets:
        r_c, r_e = self.targets[0]
        return SecrecyTargets(r_c, r_e, self.profile.epsilon)


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {message}")


def _check_keys(data: dict, allowed, path: str) -> None:
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown key: {path}{key}")


def _build_profile(data: dict) -> ChannelProfile:
    fields = {f.name for f in dataclasses.fields(ChannelProfile)}
    _check_keys(data, fields, "profile.")
    try:
        profile = ChannelProfile(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"profile: {exc}") from exc
    return profile


def _build_cccp(data: dict, solver_data: dict, seed: int) -> CccpOptions:
    allowed = {"max_iterations", "tol", "init_splits", "randomization_count",
               "rank_tol", "slack_iterations"}
    _check_keys(data, allowed, "cccp.")
    _check_keys(solver_data, {"feas_tol", "gap_tol", "max_iter"}, "solver.")
    try:
        solver = SolverOptions(**solver_data)
        if "init_splits" in data:
            data = {**data, "init_splits": tuple(data["init_splits"])}
        return CccpOptions(**data, seed=seed, solver=solver)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cccp/solver options: {exc}") from exc


def parse_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Load a YAML config file (missing path = all defaults), apply CLI-level
    overrides, validate every key and range, and return the frozen config."""
    data = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = yaml.safe_load(p.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigError(f"config parse error: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("config root must be a mapping")
        data = loaded
    if overrides:
        data = {**data, **{k: v for k, v in overrides.items() if v is not None}}

    top = {"profile", "targets", "alpha_grid", "target_grid", "trials", "seed",
           "out_dir", "format", "emit_svg", "region_mode", "region_fixed",
           "validate_draws", "cccp", "solver", "dump_subproblem"}
    _check_keys(data, top, "")

    profile = _build_profile(dict(data.get("profile") or {}))
    seed = data.get("seed", 0)
    _require(isinstance(seed, int), "seed", "must be an integer")
    cccp = _build_cccp(dict(data.get("cccp") or {}), dict(data.get("solver") or {}), seed)

    targets = data.get("targets", [[1.0, 0.1], [2.0, 0.2]])
    _require(isinstance(targets, (list, tuple)) and len(targets) >= 1,
             "targets", "must be a nonempty list of [r_c, r_e] pairs")
    norm_targets = []
    for i, pair in enumerate(targets):
        _require(isinstance(pair, (list, tuple)) and len(pair) == 2,
                 f"targets[{i}]", "must be a [r_c, r_e] pair")
        r_c, r_e = float(pair[0]), float(pair[1])
        _require(r_c >= 0.0 and r_e >= 0.0, f"targets[{i}]", "rates must be >= 0")
        norm_targets.append((r_c, r_e))

    def norm_grid(name, default):
        grid = data.get(name, default)
        _require(isinstance(grid, (list, tuple)) and len(grid) >= 1,
                 name, "must be a nonempty list")
        vals = tuple(float(v) for v in grid)
        _require(all(b > a for a, b in zip(vals, vals[1:])),
                 name, "must be strictly increasing")
        return vals

    alpha_grid = norm_grid("alpha_grid", list(_grid(0.0, 1.0, 0.05)))
    _require(all(0.0 <= a <= 1.0 for a in alpha_grid), "alpha_grid",
             "values must lie in [0, 1]")
    target_grid = norm_grid("target_grid", list(_grid(0.0, 3.0, 0.1)))
    _require(all(t >= 0.0 for t in target_grid), "target_grid", "values must be >= 0")

    trials = data.get("trials", 50)
    _require(isinstance(trials, int) and trials >= 1, "trials", "must be an integer >= 1")
    fmt = data.get("format", "csv")
    _require(fmt in ("csv", "json"), "format", "must be 'csv' or 'json'")
    region_mode = data.get("region_mode", "equal")
    _require(region_mode in ("equal", "sweep-rc", "sweep-re"), "region_mode",
             "must be one of: equal, sweep-rc, sweep-re")
    region_fixed = float(data.get("region_fixed", 0.1))
    _require(region_fixed >= 0.0, "region_fixed", "must be >= 0")
    validate_draws = data.get("validate_draws", 100_000)
    _require(isinstance(validate_draws, int) and validate_draws >= 1,
             "validate_draws", "must be an integer >= 1")
    emit_svg = bool(data.get("emit_svg", False))

    return ExperimentConfig(
        profile=profile, targets=tuple(norm_targets), alpha_grid=alpha_grid,
        target_grid=target_grid, trials=trials, seed=seed,
        out_dir=str(data.get("out_dir", ".")), format=fmt, emit_svg=emit_svg,
        region_mode=region_mode, region_fixed=region_fixed,
        validate_draws=validate_draws, cccp=cccp,
        dump_subproblem=str(data.get("dump_subproblem", "")))


def _progress(label: str, done: int, total: int) -> None:
    if sys.stderr.isatty():
        end = "\n" if done == total else ""
        print(f"\r{label}: {done}/{total}", end=end, file=sys.stderr, flush=True)


def _feasible(status: SolveStatus) -> bool:
    return status in (SolveStatus.CONVERGED, SolveStatus.MAX_ITERATIONS)


def _mean_or_nan(values) -> float:
    return float(np.mean(values)) if values else math.nan


def run_converge(cfg: ExperimentConfig) -> list:
    """Full objective trace of one seeded instance per target pair."""
    inst = sample_instance(cfg.profile, cfg.seed)
    rows = []
    for idx, (r_c, r_e) in enumerate(cfg.targets):
        rep = run(inst, SecrecyTargets(r_c, r_e, cfg.profile.epsilon), cfg.cccp)
        for i, omega in enumerate(rep.omega_trace, start=1):
            rows.append({"iter": i, "r_c": r_c, "r_e": r_e, "omega": omega,
                         "r_b": math.log2(omega)})
        _progress("converge", idx + 1, len(cfg.targets))
    return rows


def run_region(cfg: ExperimentConfig) -> list:
    """Mean achieved rate and feasible fraction of both schemes over the
    target grid, averaged over paired seeded instances (infeasible draws are
    excluded from the means and reflected in the fractions)."""
    insts = [sample_instance(cfg.profile, (cfg.seed, t)) for t in range(cfg.trials)]
    rows = []
    for k, r_target in enumerate(cfg.target_grid):
        targets = cfg.region_targets(r_target)
        noma_vals, oma_vals = [], []
        for inst in insts:
            nrep = run(inst, targets, cfg.cccp)
            if _feasible(nrep.status):
                noma_vals.append(nrep.r_b)
            orep = solve_oma(inst, targets, cfg.cccp)
            if _feasible(orep.status):
                oma_vals.append(orep.r_b)
        rows.append({
            "r_target": r_target,
            "r_b_noma_mean": _mean_or_nan(noma_vals),
            "r_b_oma_mean": _mean_or_nan(oma_vals),
            "feasible_frac_noma": len(noma_vals) / cfg.trials,
            "feasible_frac_oma": len(oma_vals) / cfg.trials,
        })
        _progress("region", k + 1, len(cfg.target_grid))
    return rows


def run_alpha_sweep(cfg: ExperimentConfig) -> list:
    """Mean achieved rate vs. reflection coefficient with paired seeds (the
    channel draw does not depend on alpha)."""
    r_c, r_e = cfg.targets[0]
    rows = []
    for k, alpha in enumerate(cfg.alpha_grid):
        profile = replace(cfg.profile, alpha=alpha)
        targets = SecrecyTargets(r_c, r_e, profile.epsilon)
        vals = []
        for t in range(cfg.trials):
            inst = sample_instance(profile, (cfg.seed, t))
            rep = run(inst, targets, cfg.cccp)
            if _feasible(rep.status):
                vals.append(rep.r_b)
        n = len(vals)
        ci = 1.96 * float(np.std(vals, ddof=1)) / math.sqrt(n) if n >= 2 else 0.0
        rows.append({"alpha": alpha, "r_b_mean": _mean_or_nan(vals),
                     "r_b_ci95": ci, "feasible_frac": n / cfg.trials})
        _progress("alpha-sweep", k + 1, len(cfg.alpha_grid))
    return rows


def run_validate(cfg: ExperimentConfig) -> list:
    """Solve seeded instances and compare the closed-form success probability
    of the reported rate against a fresh Monte Carlo estimate."""
    targets = cfg.first_targets()
    rows = []
    for t in range(cfg.trials):
        inst = sample_instance(cfg.profile, (cfg.seed, t))
        rep = run(inst, targets, cfg.cccp)
        if not _feasible(rep.status):
            continue
        mc = estimate_outage(inst, rep.beams, rep.r_b, cfg.validate_draws,
                             (cfg.seed, t, 1))
        rows.append({"trial": t, "r_b": rep.r_b,
                     "closedform_success": mc.closed_form,
                     "empirical_success": mc.empirical, "pass": mc.passed})
        _progress("validate", t + 1, cfg.trials)
    return rows


def run_oma_compare(cfg: ExperimentConfig) -> list:
    """Paired per-instance comparison of the joint scheme and the TDMA
    baseline at the first target pair."""
    targets = cfg.first_targets()
    rows = []
    for t in range(cfg.trials):
        inst = sample_instance(cfg.profile, (cfg.seed, t))
        nrep = run(inst, targets, cfg.cccp)
        orep = solve_oma(inst, targets, cfg.cccp)
        rows.append({
            "trial": t,
            "r_b_noma": nrep.r_b if _feasible(nrep.status) else math.nan,
            "r_b_oma": orep.r_b if _feasible(orep.status) else math.nan,
            "feasible_noma": int(_feasible(nrep.status)),
            "feasible_oma": int(_feasible(orep.status)),
        })
        _progress("oma-compare", t + 1, cfg.trials)
    return rows


def run_solve(cfg: ExperimentConfig):
    """Solve one seeded instance; optionally dump the first assembled
    subproblem for external cross-checking.  Returns the report."""
    inst = sample_instance(cfg.profile, cfg.seed)
    targets = cfg.first_targets()
    if cfg.dump_subproblem:
        tab = build_coeff_tables(inst)
        candidates = _mrt_candidates(inst, cfg.cccp)
        anchor = candidates[len(candidates) // 2][1]
        if inst.bd_gain_c > 0.0:
            spec = assemble(inst, targets, anchor, tab)
        else:
            spec = assemble(inst, targets, anchor, tab, include_outage=False, slack=True)
        spec.dump_text(cfg.dump_subproblem)
    return run(inst, targets, cfg.cccp)


# --------------------------------------------------------------------------
# output files

def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def config_as_dict(cfg: ExperimentConfig) -> dict:
    prof = dataclasses.asdict(cfg.profile)
    cccp = dataclasses.asdict(cfg.cccp)
    solver = cccp.pop("solver")
    cccp.pop("seed")
    cccp["init_splits"] = list(cccp["init_splits"])
    return {
        "profile": prof,
        "targets": [list(t) for t in cfg.targets],
        "alpha_grid": list(cfg.alpha_grid),
        "target_grid": list(cfg.target_grid),
        "trials": cfg.trials,
        "seed": cfg.seed,
        "out_dir": cfg.out_dir,
        "format": cfg.format,
        "emit_svg": cfg.emit_svg,
        "region_mode": cfg.region_mode,
        "region_fixed": cfg.region_fixed,
        "validate_draws": cfg.validate_draws,
        "cccp": cccp,
        "solver": solver,
        "dump_subproblem": cfg.dump_subproblem,
    }


def _write_svg(path: Path, rows: list, header: tuple, title: str) -> None:
    """Minimal self-contained line plot of the first two columns."""
    xs = [float(r[header[0]]) for r in rows]
    ys = [float(r[header[1]]) for r in rows]
    pts = [(x, y) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
    w, h, m = 640, 480, 60
    if pts:
        x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
        y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
        dx = (x1 - x0) or 1.0
        dy = (y1 - y0) or 1.0
        scaled = [(m + (x - x0) / dx * (w - 2 * m), h - m - (y - y0) / dy * (h - 2 * m))
                  for x, y in pts]
        poly = " ".join(f"{px:.2f},{py:.2f}" for px, py in scaled)
    else:
        x0 = x1 = y0 = y1 = 0.0
        poly = ""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<line x1="{m}" y1="{h - m}" x2="{w - m}" y2="{h - m}" stroke="black"/>',
        f'<line x1="{m}" y1="{m}" x2="{m}" y2="{h - m}" stroke="black"/>',
        f'<text x="{w // 2}" y="24" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{w // 2}" y="{h - 16}" text-anchor="middle" font-size="12">{header[0]}</text>',
        f'<text x="16" y="{h // 2}" font-size="12" transform="rotate(-90 16 {h // 2})" '
        f'text-anchor="middle">{header[1]}</text>',
        f'<text x="{m}" y="{h - m + 16}" font-size="10">{x0:.4g}</text>',
        f'<text x="{w - m}" y="{h - m + 16}" font-size="10" text-anchor="end">{x1:.4g}</text>',
        f'<text x="{m - 4}" y="{h - m}" font-size="10" text-anchor="end">{y0:.4g}</text>',
        f'<text x="{m - 4}" y="{m}" font-size="10" text-anchor="end">{y1:.4g}</text>',
    ]
    if poly:
        parts.append(f'<polyline points="{poly}" fill="none" stroke="steelblue" '
                     f'stroke-width="1.5"/>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")


def emit_outputs(rows: list, cfg: ExperimentConfig, name: str) -> list:
    """Write the result table, the effective-config echo and (optionally) the
    SVG plot into the output directory; returns the written paths."""
    header = HEADERS[name]
    out_dir = Path(cfg.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out_dir}: {exc}") from exc
    written = []

    if cfg.format == "csv":
        data_path = out_dir / f"{name}.csv"
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_format_value(row[col]) for col in header))
        data_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        data_path = out_dir / f"{name}.json"
        clean = [{col: (None if isinstance(row[col], float) and math.isnan(row[col])
                        else row[col]) for col in header} for row in rows]
        data_path.write_text(json.dumps(clean, indent=2) + "\n", encoding="utf-8")
    written.append(data_path)

    echo_path = out_dir / f"{name}_config.yaml"
    echo_path.write_text(yaml.safe_dump(config_as_dict(cfg), sort_keys=True),
                         encoding="utf-8")
    written.append(echo_path)

    if cfg.emit_svg and rows:
        svg_path = out_dir / f"{name}.svg"
        _write_svg(svg_path, rows, header, name)
        written.append(svg_path)
    return written
