"""Assembly and solution of one convex inner subproblem.

Each outer iteration maximizes omega = 2^r_b over (W_c, W_e, omega, zeta)
subject to

* three rate rows ``tau_a + tau_b - mu~_a - mu~_b >= r ln 2`` (concave logs
  minus affine surrogates),
* the outage row ``eta1 - eta2~ <= rho a_c tr(H_b (W_c + W_e)) + 1`` and the
  eavesdropper-bound row ``eta3~ - eta4 >= a_v tr(H_b (W_c + W_e))``
  (convex quadratic vs. affine),
* the power row ``tr W_c + tr W_e <= P`` (the relaxed problem is unbounded
  without it), PSD blocks and the scalar bounds omega >= 1, zeta >= 0.

``assemble`` produces a :class:`SubproblemSpec` -- a plain-data canonical
description with every matrix and anchor constant spelled out, checkable
without any solver (see :meth:`SubproblemSpec.margins`) and dumpable as text
for cross-checking against an external solver.  ``solve_subproblem`` hands the
spec to CVXPY with the Clarabel interior-point backend; the parametrized
program for each problem shape is canonicalized once per thread and only
re-bound between solves.

All data is normalized by the noise power before canonicalization (internal
noise power 1) and un-normalized on output; the rate rows are exactly
invariant under this scaling and the quadratic rows are re-linearized in the
scaled variables, which conditions the logs without changing the constraint
set they approximate.

Variant shapes (used by the driver and the TDMA baseline): any subset of the
rate rows, either PSD block fixed to zero, the outage block dropped
(feasibility-only modes), and a common slack added to the rate rows with
``maximize slack`` replacing the objective.
"""

from __future__ import annotations

import enum
import math
import threading
import warnings
from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .model import NetworkInstance, SecrecyTargets
from .transform import (
    CccpIterate,
    CoefficientTable,
    DeadBdLinkError,
    ROW_CENTRAL,
    ROW_CROSS,
    ROW_EDGE,
)

__all__ = [
    "SolverOptions",
    "SubproblemStatus",
    "RateRow",
    "SubproblemSpec",
    "SubproblemResult",
    "assemble",
    "solve_subproblem",
]

LN2 = math.log(2.0)
ZETA_CAP = 1e6  # numerical compactness bound; flagged if active at optimum

_ROW_SLOTS = {"central": ROW_CENTRAL, "edge": ROW_EDGE, "cross": ROW_CROSS}


@dataclass(frozen=True)
class SolverOptions:
    """Interior-point tolerances for one subproblem solve."""

    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iter: int = 200

    def __post_init__(self):
        if not (self.feas_tol > 0 and self.gap_tol > 0 and self.max_iter > 0):
            raise ValueError("solver options must be positive")


class SubproblemStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class _LogSlot:
    """One linearized (tau, mu~) pair: the four coefficient matrices plus the
    anchor constant and gradient coefficient of the surrogate mu~."""

    num_c: np.ndarray
    num_e: np.ndarray
    den_c: np.ndarray
    den_e: np.ndarray
    mu_const: float
    mu_coef: float


@dataclass(frozen=True)
class RateRow:
    """One ``sum of two logs minus two affine surrogates >= bound`` row."""

    name: str
    slot_a: _LogSlot
    slot_b: _LogSlot
    bound: float  # r * ln 2


@dataclass(frozen=True)
class SubproblemSpec:
    """Canonical data of one assembled subproblem, in noise-normalized units
    (``scale`` is the original noise power; lifted matrices scale by it)."""

    M: int
    table: CoefficientTable
    anchor: CccpIterate  # original units
    anchor_norm: CccpIterate
    targets: SecrecyTargets
    scale: float
    power: float  # normalized budget P / sigma^2
    rate_rows: tuple
    include_Wc: bool
    include_We: bool
    include_outage: bool
    slack: bool
    # outage block (meaningful when include_outage)
    H_b: np.ndarray = None
    H_v: np.ndarray = None
    outage_coef: float = 0.0  # rho * alpha |g_c|^2
    bd_gain_v: float = 0.0
    eta2_const: float = 0.0
    eta2_coef_omega: float = 0.0
    eta2_coef_zeta: float = 0.0
    eta3_const: float = 0.0
    eta3_coef: float = 0.0
    varphi_anchor: float = 0.0
    zeta_cap: float = ZETA_CAP

    @property
    def structure_key(self):
        return (self.M, tuple(r.name for r in self.rate_rows), self.include_Wc,
                self.include_We, self.include_outage, self.slack)

    def census(self) -> dict:
        """Constraint counts by kind (PSD blocks and scalar bounds included)."""
        return {
            "log_rows": len(self.rate_rows),
            "quadratic_rows": 2 if self.include_outage else 0,
            "power_rows": 1,
            "psd_blocks": int(self.include_Wc) + int(self.include_We),
            "scalar_bounds": 2 if self.include_outage else 0,
        }

    def margins(self, W_c, W_e, omega: float, zeta: float, slack: float = 0.0) -> dict:
        """Signed feasibility margins (>= 0 means satisfied) of every row at a
        point given in ORIGINAL units.  Pure arithmetic on the spec data; this
        is the solver-independent feasibility oracle used in tests."""
        Wc = np.asarray(W_c, dtype=np.complex128) / self.scale
        We = np.asarray(W_e, dtype=np.complex128) / self.scale
        out = {}
        for row in self.rate_rows:
            val = 0.0
            for slot in (row.slot_a, row.slot_b):
                lin_num = float(np.trace(slot.num_c @ Wc).real + np.trace(slot.num_e @ We).real)
                lin_den = float(np.trace(slot.den_c @ Wc).real + np.trace(slot.den_e @ We).real)
                val += math.log(1.0 + lin_num) - (slot.mu_const + slot.mu_coef * lin_den)
            out[f"rate_{row.name}"] = val - (slack if self.slack else 0.0) - row.bound
        tr_w = float(np.trace(Wc).real + np.trace(We).real)
        out["power"] = self.power - tr_w
        if self.include_outage:
            tr_hb = float(np.trace(self.H_b @ (Wc + We)).real)
            tr_hv = float(np.trace(self.H_v @ (Wc + We)).real)
            eta1 = (omega + zeta + 1.0) ** 2 / 2.0
            eta2_t = self.eta2_const + self.eta2_coef_omega * omega + self.eta2_coef_zeta * zeta
            out["outage"] = self.outage_coef * tr_hb + 1.0 - (eta1 - eta2_t)
            eta3_t = self.eta3_const + self.eta3_coef * (zeta + tr_hv)
            eta4 = zeta ** 2 / 2.0 + (1.0 + tr_hv) ** 2 / 2.0
            out["eaves_bound"] = (eta3_t - eta4) - self.bd_gain_v * tr_hb
            out["omega_lb"] = omega - 1.0
            out["zeta_lb"] = zeta
            out["zeta_cap"] = self.zeta_cap - zeta
        return out

    def dump_text(self, path) -> None:
        """Write the canonicalized problem, one constraint per line; complex
        matrices appear row-major as ``re:im`` pairs with 17 significant
        digits.  Meant for cross-checking against an external solver."""

        def num(x: float) -> str:
            return format(float(x), ".17g")

        def mat(a: np.ndarray) -> str:
            flat = np.asarray(a, dtype=np.complex128).reshape(-1)
            return "[" + ",".join(f"{num(z.real)}:{num(z.imag)}" for z in flat) + "]"

        lines = [
            "# convex inner subproblem (noise-normalized units, noise power = 1)",
            "# complex matrices row-major as re:im pairs, 17 significant digits",
            f"problem M={self.M} include_Wc={int(self.include_Wc)} "
            f"include_We={int(self.include_We)} outage={int(self.include_outage)} "
            f"slack={int(self.slack)} scale={num(self.scale)} "
            f"objective={'slack' if self.slack else 'omega'}",
        ]
        if self.include_Wc:
            lines.append(f"var W_c hermitian_psd {self.M}x{self.M}")
        if self.include_We:
            lines.append(f"var W_e hermitian_psd {self.M}x{self.M}")
        if self.include_outage:
            lines.append("var omega lb=1")
            lines.append(f"var zeta lb=0 ub={num(self.zeta_cap)}")
        if self.slack:
            lines.append("var slack free")
        for row in self.rate_rows:
            parts = [f"rate_row {row.name} bound={num(row.bound)}"]
            for tag, slot in (("A", row.slot_a), ("B", row.slot_b)):
                parts.append(
                    f"num{tag}_c={mat(slot.num_c)} num{tag}_e={mat(slot.num_e)} "
                    f"den{tag}_c={mat(slot.den_c)} den{tag}_e={mat(slot.den_e)} "
                    f"mu{tag}_const={num(slot.mu_const)} mu{tag}_coef={num(slot.mu_coef)}"
                )
            lines.append(" ".join(parts))
        if self.include_outage:
            lines.append(
                f"quad_row outage coef={num(self.outage_coef)} H_b={mat(self.H_b)} "
                f"eta2_const={num(self.eta2_const)} "
                f"eta2_coef_omega={num(self.eta2_coef_omega)} "
                f"eta2_coef_zeta={num(self.eta2_coef_zeta)}"
            )
            lines.append(
                f"quad_row eaves_bound coef={num(self.bd_gain_v)} H_b={mat(self.H_b)} "
                f"H_v={mat(self.H_v)} eta3_const={num(self.eta3_const)} "
                f"eta3_coef={num(self.eta3_coef)}"
            )
        lines.append(f"power_row budget={num(self.power)}")
        text = "\n".join(lines) + "\n"
        if hasattr(path, "write"):
            path.write(text)
        else:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)


@dataclass(frozen=True)
class SubproblemResult:
    """Outcome of one solve: the cleaned iterate in original units (None
    unless optimal), the raw objective, the slack value in slack mode, and
    diagnostic flags.  ``residuals`` carries the worst margins when a solve
    fails with a candidate point available."""

    status: SubproblemStatus
    iterate: CccpIterate | None
    objective: float | None
    slack_value: float | None = None
    inaccurate: bool = False
    zeta_cap_active: bool = False
    residuals: dict | None = None
    message: str = ""


def assemble(inst: NetworkInstance, targets: SecrecyTargets, anchor: CccpIterate,
             tab: CoefficientTable, *, rate_rows=("central", "edge", "cross"),
             include_Wc: bool = True, include_We: bool = True,
             include_outage: bool = True, slack: bool = False) -> SubproblemSpec:
    """Build the canonical subproblem data for one anchor.

    The anchor (and its tangency constants) are taken in original units and
    normalized here.  By tangency of every surrogate, an anchor satisfying the
    original lifted constraints satisfies every assembled row exactly, so the
    previous iterate is always feasible for the next subproblem.
    """
    if anchor.M != inst.M:
        raise ValueError(f"anchor dimension {anchor.M} does not match M={inst.M}")
    if include_outage and inst.bd_gain_c == 0.0:
        raise DeadBdLinkError("alpha |g_c|^2 = 0: assemble the feasibility-only shape instead")
    unknown = [r for r in rate_rows if r not in _ROW_SLOTS]
    if unknown:
        raise ValueError(f"unknown rate rows: {unknown}")

    scale = inst.sigma2
    anchor_norm = CccpIterate.from_solution(
        anchor.W_c / scale, anchor.W_e / scale, anchor.omega, anchor.zeta)
    Wc0, We0 = anchor_norm.W_c, anchor_norm.W_e

    rows = []
    for name in rate_rows:
        bound = (targets.r_c if name == "central" else targets.r_e) * LN2
        slots = []
        for j in _ROW_SLOTS[name]:
            den_c, den_e = tab.den_c[j - 1], tab.den_e[j - 1]
            lin = float(np.trace(den_c @ Wc0).real + np.trace(den_e @ We0).real)
            den = 1.0 + lin
            slots.append(_LogSlot(
                num_c=tab.num_c[j - 1], num_e=tab.num_e[j - 1],
                den_c=den_c, den_e=den_e,
                mu_const=math.log(den) - lin / den,
                mu_coef=1.0 / den,
            ))
        rows.append(RateRow(name=name, slot_a=slots[0], slot_b=slots[1], bound=bound))

    extra = {}
    if include_outage:
        rho = -math.log1p(-targets.epsilon)
        w0, z0 = anchor_norm.omega, anchor_norm.zeta
        phi0 = float(np.trace(tab.H_v @ (Wc0 + We0)).real)
        k3 = z0 + 1.0 + phi0
        extra = dict(
            H_b=tab.H_b,
            H_v=tab.H_v,
            outage_coef=rho * tab.bd_gain_c,
            bd_gain_v=tab.bd_gain_v,
            eta2_const=(w0 ** 2 / 2.0 + (z0 + 1.0) ** 2 / 2.0
                        - w0 ** 2 - (z0 + 1.0) * z0),
            eta2_coef_omega=w0,
            eta2_coef_zeta=z0 + 1.0,
            eta3_const=k3 ** 2 / 2.0 - k3 * (z0 + phi0),
            eta3_coef=k3,
            varphi_anchor=phi0,
        )

    return SubproblemSpec(
        M=inst.M, table=tab, anchor=anchor, anchor_norm=anchor_norm,
        targets=targets, scale=scale, power=inst.P / scale,
        rate_rows=tuple(rows), include_Wc=include_Wc, include_We=include_We,
        include_outage=include_outage, slack=slack, **extra)


# --------------------------------------------------------------------------
# CVXPY backend: one parametrized program per problem shape, thread-local.

class _Program:
    def __init__(self, M: int, row_names, include_Wc: bool, include_We: bool,
                 include_outage: bool, slack: bool):
        self.include_Wc, self.include_We = include_Wc, include_We
        self.include_outage, self.slack = include_outage, slack
        self.W_c = cp.Variable((M, M), hermitian=True) if include_Wc else None
        self.W_e = cp.Variable((M, M), hermitian=True) if include_We else None
        self.omega = cp.Variable() if include_outage else None
        self.zeta = cp.Variable() if include_outage else None
        self.s = cp.Variable() if slack else None
        self.params = {}

        def spar(key, nonneg=False):
            p = cp.Parameter(nonneg=nonneg)
            self.params[key] = p
            return p

        def h_trace(key, V):
            # Re tr(A V) for Hermitian A, V as <ReA, ReV> + <ImA, ImV>, with
            # the two real parts as real parameters: complex parameters would
            # silently disable CVXPY's parametrized-program cache
            ar = cp.Parameter((M, M))
            ai = cp.Parameter((M, M))
            self.params[key] = (ar, ai)
            return cp.sum(cp.multiply(ar, cp.real(V))) + cp.sum(cp.multiply(ai, cp.imag(V)))

        def tr_pair(key_c, key_e):
            # scalar anchor coefficients are folded into these matrix
            # parameters at bind time so every product is parameter x variable
            # (keeps the program DPP-compliant and re-solves cheap)
            terms = []
            if include_Wc:
                terms.append(h_trace(key_c, self.W_c))
            if include_We:
                terms.append(h_trace(key_e, self.W_e))
            return sum(terms) if terms else 0.0

        cons = []
        for i, name in enumerate(row_names):
            expr = 0.0
            for tag in ("A", "B"):
                num = tr_pair(f"row{i}{tag}_num_c", f"row{i}{tag}_num_e")
                den_scaled = tr_pair(f"row{i}{tag}_denS_c", f"row{i}{tag}_denS_e")
                expr += cp.log(1.0 + num)
                expr -= spar(f"row{i}{tag}_mu_const") + den_scaled
            if slack:
                # common-margin form: maximizing s keeps the problem bounded and
                # max s >= 0 is exactly feasibility of the unrelaxed rows
                expr -= self.s
            cons.append(expr >= spar(f"row{i}_bound"))

        if include_outage:
            tr_hv = tr_pair("Hv_c", "Hv_e")
            eta1 = cp.square(self.omega + self.zeta + 1.0) / 2.0
            eta2_t = (spar("eta2_const") + spar("eta2_coef_omega", True) * self.omega
                      + spar("eta2_coef_zeta", True) * self.zeta)
            cons.append(eta1 - eta2_t <= tr_pair("outHb_c", "outHb_e") + 1.0)
            eta3_t = (spar("eta3_const") + spar("eta3_coef", True) * self.zeta
                      + tr_pair("k3Hv_c", "k3Hv_e"))
            eta4 = cp.square(self.zeta) / 2.0 + cp.square(1.0 + tr_hv) / 2.0
            cons.append(eta3_t - eta4 >= tr_pair("avHb_c", "avHb_e"))
            cons.append(self.omega >= 1.0)
            cons.append(self.zeta >= 0.0)
            cons.append(self.zeta <= ZETA_CAP)

        power_terms = []
        if include_Wc:
            power_terms.append(cp.real(cp.trace(self.W_c)))
            cons.append(self.W_c >> 0)
        if include_We:
            power_terms.append(cp.real(cp.trace(self.W_e)))
            cons.append(self.W_e >> 0)
        cons.append(sum(power_terms) <= spar("power", True))

        objective = self.s if slack else self.omega
        self.problem = cp.Problem(cp.Maximize(objective), cons)
        assert self.problem.is_dcp(dpp=True)

    def bind(self, spec: SubproblemSpec) -> None:
        def set_h(key, value):
            if key in self.params:
                v = np.asarray(value, dtype=np.complex128)
                v = 0.5 * (v + v.conj().T)
                ar, ai = self.params[key]
                ar.value = v.real
                ai.value = v.imag

        def set_s(key, value):
            p = self.params[key]
            p.value = max(float(value), 0.0) if p.is_nonneg() else float(value)

        for i, row in enumerate(spec.rate_rows):
            for tag, slot in (("A", row.slot_a), ("B", row.slot_b)):
                set_h(f"row{i}{tag}_num_c", slot.num_c)
                set_h(f"row{i}{tag}_num_e", slot.num_e)
                set_h(f"row{i}{tag}_denS_c", slot.mu_coef * slot.den_c)
                set_h(f"row{i}{tag}_denS_e", slot.mu_coef * slot.den_e)
                set_s(f"row{i}{tag}_mu_const", slot.mu_const)
            set_s(f"row{i}_bound", row.bound)
        if spec.include_outage:
            set_h("Hv_c", spec.H_v)
            set_h("Hv_e", spec.H_v)
            set_h("outHb_c", spec.outage_coef * spec.H_b)
            set_h("outHb_e", spec.outage_coef * spec.H_b)
            set_h("avHb_c", spec.bd_gain_v * spec.H_b)
            set_h("avHb_e", spec.bd_gain_v * spec.H_b)
            set_h("k3Hv_c", spec.eta3_coef * spec.H_v)
            set_h("k3Hv_e", spec.eta3_coef * spec.H_v)
            set_s("eta2_const", spec.eta2_const)
            set_s("eta2_coef_omega", spec.eta2_coef_omega)
            set_s("eta2_coef_zeta", spec.eta2_coef_zeta)
            set_s("eta3_const", spec.eta3_const)
            set_s("eta3_coef", spec.eta3_coef)
        set_s("power", spec.power)


_local = threading.local()


def _get_program(spec: SubproblemSpec) -> _Program:
    cache = getattr(_local, "programs", None)
    if cache is None:
        cache = {}
        _local.programs = cache
    key = spec.structure_key
    if key not in cache:
        cache[key] = _Program(spec.M, key[1], spec.include_Wc, spec.include_We,
                              spec.include_outage, spec.slack)
    return cache[key]


def solve_subproblem(spec: SubproblemSpec, opts: SolverOptions | None = None) -> SubproblemResult:
    """Solve one assembled subproblem with the Clarabel interior-point method.

    Deterministic for fixed (spec, options).  On success the returned iterate
    is in original units, symmetrized and clamped onto the scalar bounds; an
    inaccurate-but-accepted solve is flagged rather than rejected (the outer
    loop re-verifies every original constraint independently).
    """
    opts = opts or SolverOptions()
    prog = _get_program(spec)
    prog.bind(spec)
    try:
        with warnings.catch_warnings():
            # inaccurate solves are handled through the status flag and the
            # outer loop's independent verification
            warnings.filterwarnings("ignore", message="Solution may be inaccurate")
            prog.problem.solve(
                solver=cp.CLARABEL,
                tol_feas=opts.feas_tol,
                tol_gap_abs=opts.gap_tol,
                tol_gap_rel=opts.gap_tol,
                max_iter=opts.max_iter,
            )
    except cp.SolverError as exc:
        return SubproblemResult(SubproblemStatus.NUMERICAL_FAILURE, None, None,
                                message=str(exc))

    status = prog.problem.status
    zeros = np.zeros((spec.M, spec.M), dtype=np.complex128)
    if status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        W_c = prog.W_c.value if spec.include_Wc else zeros
        W_e = prog.W_e.value if spec.include_We else zeros
        omega = float(prog.omega.value) if spec.include_outage else 1.0
        zeta = float(prog.zeta.value) if spec.include_outage else 0.0
        iterate = CccpIterate.from_solution(W_c * spec.scale, W_e * spec.scale, omega, zeta)
        slack_value = float(prog.s.value) if spec.slack else None
        objective = slack_value if spec.slack else iterate.omega
        return SubproblemResult(
            SubproblemStatus.OPTIMAL, iterate, objective,
            slack_value=slack_value,
            inaccurate=(status == cp.OPTIMAL_INACCURATE),
            zeta_cap_active=spec.include_outage and zeta >= spec.zeta_cap - 1e-3,
        )
    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return SubproblemResult(SubproblemStatus.INFEASIBLE, None, None,
                                message=f"solver status {status}")
    residuals = None
    if spec.include_Wc and prog.W_c.value is not None:
        try:
            residuals = spec.margins(
                prog.W_c.value * spec.scale,
                (prog.W_e.value if spec.include_We else zeros) * spec.scale,
                float(prog.omega.value) if spec.include_outage else 1.0,
                float(prog.zeta.value) if spec.include_outage else 0.0,
                slack=float(prog.s.value) if spec.slack else 0.0,
            )
        except Exception:
            residuals = None
    return SubproblemResult(SubproblemStatus.NUMERICAL_FAILURE, None, None,
                            residuals=residuals, message=f"solver status {status}")
