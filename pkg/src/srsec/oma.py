"""Two-slot TDMA baseline for the same network.

Slot A carries only the central-user message at up to full power; the BD
reflects and its message is decoded there, so the slot runs the same
linearize-and-solve machinery with the edge-user beam fixed to zero, the
cross-decoding row dropped and the central-user rate floor doubled (equal
slots halve every rate).  Slot B carries only the edge-user message; the BD
still reflects (a passive device cannot stop) but contributes interference
only, so the slot is a pure feasibility certification of the doubled
edge-user floor.  The reported BD rate is half the slot-A rate.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .cccp import (
    CccpOptions,
    SolveStatus,
    _loop,
    _mrt_candidates,
    _slack_phase,
    _zf_candidates,
    recover_rank_one,
)
from .model import (
    NetworkInstance,
    SecrecyTargets,
    max_outage_rate,
    rb_outage_success,
    secrecy_rates,
)
from .transform import CccpIterate, build_coeff_tables

__all__ = ["OmaReport", "solve_oma"]

VERIFY_TOL = 1e-6


@dataclass(frozen=True)
class OmaReport:
    """Outcome of the TDMA baseline: the certified half-slot BD rate, the two
    per-slot beams, slot-wise verification residuals and diagnostics."""

    status: SolveStatus
    r_b: float
    w_c: np.ndarray | None
    w_e: np.ndarray | None
    residuals: dict
    wall_time: float
    diagnostics: dict


def _unit(h: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(h))
    if n == 0.0:
        e = np.zeros_like(h)
        e[0] = 1.0
        return e
    return h / n


def _fail(status, t0, diagnostics) -> OmaReport:
    return OmaReport(status, 0.0, None, None, {}, time.perf_counter() - t0, diagnostics)


def solve_oma(inst: NetworkInstance, targets: SecrecyTargets,
              opts: CccpOptions | None = None) -> OmaReport:
    """Maximize the BD secrecy rate under the two-slot TDMA scheme.

    Both slots may spend up to the full budget (same peak power as the joint
    scheme).  Infeasible means at least one slot cannot meet its doubled rate
    floor.  Deterministic for fixed inputs and seed.
    """
    opts = opts or CccpOptions()
    t0 = time.perf_counter()
    tab = build_coeff_tables(inst)
    zeros = np.zeros((inst.M, inst.M), dtype=np.complex128)
    u_e = _unit(inst.h_e)
    diagnostics = {}

    # slot A: central-user message only, BD message decoded here
    slot_a_targets = SecrecyTargets(2.0 * targets.r_c, 0.0, targets.epsilon)
    dead_bd = inst.bd_gain_c == 0.0
    batches = [_mrt_candidates(inst, opts, include_We=False),
               _zf_candidates(inst, opts, include_We=False)]
    outcome = None
    if not dead_bd:
        for batch in batches:
            started = False
            for _name, anchor in batch:
                out = _loop(inst, slot_a_targets, tab, anchor, opts,
                            rows=("central",), include_We=False)
                if out.kind == "first_infeasible":
                    continue
                started = True
                if out.kind == "ok" and (outcome is None
                                         or out.iterate.omega > outcome.iterate.omega):
                    outcome = out
                elif out.kind == "failure" and outcome is None:
                    diagnostics["slot_a_failure"] = out.message
            if started:
                break
    if outcome is None and not dead_bd:
        point = None
        for batch in batches:
            if not batch:
                continue
            anchor = batch[len(batch) // 2][1]
            point, slack, failed = _slack_phase(inst, slot_a_targets, tab, anchor, opts,
                                                rows=("central",), include_We=False)
            diagnostics["slot_a_slack"] = slack
            if point is not None:
                break
        if point is None:
            if failed or "slot_a_failure" in diagnostics:
                return _fail(SolveStatus.SOLVER_FAILURE, t0, diagnostics)
            return _fail(SolveStatus.INFEASIBLE, t0, diagnostics)
        out = _loop(inst, slot_a_targets, tab, point, opts,
                    rows=("central",), include_We=False)
        if out.kind != "ok":
            return _fail(SolveStatus.SOLVER_FAILURE, t0,
                         {**diagnostics, "slot_a_failure": out.message})
        outcome = out

    if dead_bd:
        point = None
        for batch in batches:
            if not batch:
                continue
            anchor = batch[len(batch) // 2][1]
            point, slack, failed = _slack_phase(inst, slot_a_targets, tab, anchor, opts,
                                                rows=("central",), include_We=False,
                                                include_outage=False)
            if point is not None:
                break
        diagnostics["bd_link_dead"] = True
        diagnostics["slot_a_slack"] = slack
        if point is None:
            return _fail(SolveStatus.SOLVER_FAILURE if failed else SolveStatus.INFEASIBLE,
                         t0, diagnostics)
        slot_a_iterate, slot_a_converged, slot_a_trace = point, True, (1.0,)
    else:
        slot_a_iterate = outcome.iterate
        slot_a_converged = outcome.converged
        slot_a_trace = outcome.trace

    r_b_a = math.log2(slot_a_iterate.omega)
    beams_a, rank_a = recover_rank_one(slot_a_iterate.W_c, zeros, inst, slot_a_targets,
                                       r_b_a, opts, rows=("central",),
                                       check_outage=not dead_bd)
    diagnostics["slot_a_iterations"] = len(slot_a_trace)
    diagnostics["slot_a_trace"] = slot_a_trace
    diagnostics["slot_a_rank"] = rank_a

    # slot B: edge-user message only, BD reflection is interference
    slot_b_targets = SecrecyTargets(0.0, 2.0 * targets.r_e, targets.epsilon)
    anchor_b = CccpIterate.from_solution(zeros, 0.8 * inst.P * np.outer(u_e, u_e.conj()),
                                         1.0, 0.0)
    point_b, slack_b, failed_b = _slack_phase(inst, slot_b_targets, tab, anchor_b, opts,
                                              rows=("edge",), include_Wc=False,
                                              include_outage=False)
    diagnostics["slot_b_slack"] = slack_b
    if point_b is None:
        return _fail(SolveStatus.SOLVER_FAILURE if failed_b else SolveStatus.INFEASIBLE,
                     t0, diagnostics)
    beams_b, rank_b = recover_rank_one(zeros, point_b.W_e, inst, slot_b_targets,
                                       0.0, opts, rows=("edge",), check_outage=False)
    diagnostics["slot_b_rank"] = rank_b

    # slot-wise verification with the exact oracles (half-slot rates)
    rates_a = secrecy_rates(inst, beams_a)
    rates_b = secrecy_rates(inst, beams_b)
    residuals = {
        "rate_central": max(0.0, targets.r_c - 0.5 * rates_a.R_c),
        "rate_edge": max(0.0, targets.r_e - 0.5 * rates_b.R_e),
        "power_a": max(0.0, (beams_a.total_power() - inst.P) / max(1.0, inst.P)),
        "power_b": max(0.0, (beams_b.total_power() - inst.P) / max(1.0, inst.P)),
    }
    if not dead_bd:
        success = rb_outage_success(inst, beams_a, r_b_a)
        residuals["outage"] = max(0.0, (1.0 - targets.epsilon) - success)
        if residuals["outage"] > VERIFY_TOL:
            # fall back to the rate the recovered slot-A beams certify
            rb_alt = max_outage_rate(inst, beams_a, targets.epsilon)
            if rb_alt is not None:
                r_b_a = rb_alt
                residuals["outage"] = max(
                    0.0, (1.0 - targets.epsilon) - rb_outage_success(inst, beams_a, r_b_a))
                diagnostics["rb_from_beams"] = True

    if max(residuals.values()) > VERIFY_TOL:
        diagnostics["verification_failed"] = True
        return OmaReport(SolveStatus.SOLVER_FAILURE, 0.5 * r_b_a, beams_a.w_c,
                         beams_b.w_e, residuals, time.perf_counter() - t0, diagnostics)

    status = SolveStatus.CONVERGED if slot_a_converged else SolveStatus.MAX_ITERATIONS
    return OmaReport(status, 0.5 * r_b_a, beams_a.w_c, beams_b.w_e, residuals,
                     time.perf_counter() - t0, diagnostics)
