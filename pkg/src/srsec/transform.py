"""Difference-of-convex building blocks for the secrecy beamforming problem.

Lifting the beams to PSD matrices W_c = w_c w_c^H, W_e = w_e w_e^H makes every
SINR a ratio of affine traces, so each secrecy rate splits into a difference of
two concave log-of-affine terms and the outage/eavesdropper-bound constraints
split into differences of convex quadratics.  This module builds the
coefficient matrices of those affine traces, evaluates the log and quadratic
terms, and provides the first-order Taylor surrogates the convex-concave
procedure substitutes for the concave-side terms.

Internally everything is natural-log; conversion to bits happens only in
rate-facing callers (a rate floor r enters as r * ln 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import NetworkInstance

__all__ = [
    "DeadBdLinkError",
    "CoefficientTable",
    "CccpIterate",
    "build_coeff_tables",
    "tau_mu",
    "lambda_xi_rho",
    "eta_values",
    "linearize_mu",
    "linearize_eta2",
    "linearize_eta3",
]

# Row layout of the coefficient tables: each secrecy rate consumes two
# (numerator, denominator) log pairs, legitimate receiver first.
ROW_CENTRAL = (1, 2)  # central-user rate
ROW_EDGE = (3, 4)  # edge-user rate
ROW_CROSS = (5, 6)  # central user decoding the edge-user message

_PSD_TOL = 1e-8  # relative floor on eigenvalues accepted as PSD


class DeadBdLinkError(ValueError):
    """The BD->central-user path has zero gain, so the outage threshold is
    undefined; callers short-circuit to the zero-rate branch instead."""


def _herm(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + x.conj().T)


def _check_psd(w: np.ndarray, name: str) -> np.ndarray:
    """Symmetrize and verify PSD-ness up to solver round-off; returns the
    symmetrized matrix."""
    w = np.asarray(w, dtype=np.complex128)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {w.shape}")
    ws = _herm(w)
    scale = 1.0 + abs(float(np.trace(ws).real))
    if np.max(np.abs(w - ws)) > 1e-8 * scale:
        raise ValueError(f"{name} is not Hermitian within tolerance")
    if np.linalg.eigvalsh(ws)[0] < -_PSD_TOL * scale:
        raise ValueError(f"{name} is not PSD within tolerance")
    return ws


def _trace_pair(A: np.ndarray, W_c: np.ndarray, B: np.ndarray, W_e: np.ndarray) -> float:
    return float(np.trace(A @ W_c).real + np.trace(B @ W_e).real)


@dataclass(frozen=True)
class CoefficientTable:
    """Per-instance coefficient matrices of the lifted SINR logs.

    ``num_c[j-1]`` / ``num_e[j-1]`` multiply W_c / W_e inside the j-th
    numerator log, ``den_c`` / ``den_e`` inside the j-th denominator log
    (j = 1..6, see ROW_* for which rate owns which pair).  Many slots alias
    the same array because the same receiver noise-plus-interference shows up
    in several SINRs.  Also caches the channel outer products and the BD
    reflection power gains.  Immutable after construction.
    """

    num_c: tuple
    num_e: tuple
    den_c: tuple
    den_e: tuple
    H_c: np.ndarray
    H_e: np.ndarray
    H_b: np.ndarray
    H_v: np.ndarray
    bd_gain_c: float
    bd_gain_e: float
    bd_gain_v: float

    def __post_init__(self):
        for group_name in ("num_c", "num_e", "den_c", "den_e"):
            group = getattr(self, group_name)
            if len(group) != 6:
                raise ValueError(f"{group_name} must hold 6 matrices")
            for j, mat in enumerate(group, start=1):
                scale = 1.0 + abs(float(np.trace(mat).real))
                if np.max(np.abs(mat - mat.conj().T)) > 1e-12 * scale:
                    raise ValueError(f"{group_name}[{j}] is not Hermitian")
                if np.linalg.eigvalsh(_herm(mat))[0] < -1e-10 * scale:
                    raise ValueError(f"{group_name}[{j}] is not PSD")

    @property
    def M(self) -> int:
        return self.H_c.shape[0]


def build_coeff_tables(inst: NetworkInstance) -> CoefficientTable:
    """Populate the 6x4 coefficient family for one instance.

    Reading each SINR's numerator and denominator as sigma^2 + tr(A W_c)
    + tr(B W_e) gives, with a_x = alpha |g_x|^2 and H_x = h_x h_x^H:

      pair 1/2 (central-user rate):  num (H_c + a_c H_b, a_c H_b) over
        (a_c H_b, a_c H_b), then eavesdropper num (a_v H_b, H_v + a_v H_b)
        over (H_v + a_v H_b, H_v + a_v H_b);
      pair 3/4 (edge-user rate) and pair 5/6 (cross-decoding) analogously.

    Aliased slots share the identical array object.
    """
    H_c = np.outer(inst.h_c, inst.h_c.conj())
    H_e = np.outer(inst.h_e, inst.h_e.conj())
    H_b = np.outer(inst.h_b, inst.h_b.conj())
    H_v = np.outer(inst.h_v, inst.h_v.conj())
    a_c, a_e, a_v = inst.bd_gain_c, inst.bd_gain_e, inst.bd_gain_v

    bd_c = _herm(a_c * H_b)
    bd_e = _herm(a_e * H_b)
    bd_v = _herm(a_v * H_b)
    cen = _herm(H_c + bd_c)  # central user: direct + reflected
    edg = _herm(H_e + bd_e)
    eav = _herm(H_v + bd_v)

    return CoefficientTable(
        num_c=(cen, bd_v, edg, eav, cen, eav),
        num_e=(bd_c, eav, edg, bd_v, cen, bd_v),
        den_c=(bd_c, eav, edg, eav, cen, eav),
        den_e=(bd_c, eav, bd_e, eav, bd_c, eav),
        H_c=_herm(H_c),
        H_e=_herm(H_e),
        H_b=_herm(H_b),
        H_v=_herm(H_v),
        bd_gain_c=a_c,
        bd_gain_e=a_e,
        bd_gain_v=a_v,
    )


@dataclass(frozen=True)
class CccpIterate:
    """One point of the lifted problem carried between CCCP iterations:
    the two PSD matrices, the BD rate variable omega = 2^r_b and the bound
    zeta on the eavesdropper's BD SINR."""

    W_c: np.ndarray
    W_e: np.ndarray
    omega: float
    zeta: float

    def __post_init__(self):
        for name in ("W_c", "W_e"):
            w = np.asarray(getattr(self, name), dtype=np.complex128)
            if w.ndim != 2 or w.shape[0] != w.shape[1]:
                raise ValueError(f"{name} must be square, got shape {w.shape}")
            scale = 1.0 + abs(float(np.trace(w).real))
            if np.max(np.abs(w - w.conj().T)) > 1e-10 * scale:
                raise ValueError(f"{name} is not Hermitian within 1e-10")
            if np.linalg.eigvalsh(_herm(w))[0] < -1e-8 * scale:
                raise ValueError(f"{name} has an eigenvalue below -1e-8")
            object.__setattr__(self, name, w)
        if self.W_c.shape != self.W_e.shape:
            raise ValueError("W_c and W_e must have the same shape")
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "zeta", float(self.zeta))
        if not (math.isfinite(self.omega) and self.omega >= 1.0):
            raise ValueError(f"omega must be >= 1, got {self.omega}")
        if not (math.isfinite(self.zeta) and self.zeta >= 0.0):
            raise ValueError(f"zeta must be >= 0, got {self.zeta}")

    @classmethod
    def from_solution(cls, W_c, W_e, omega: float, zeta: float) -> "CccpIterate":
        """Build from raw solver output: symmetrize the matrix blocks, project
        negative round-off eigenvalues onto the PSD cone and clamp the scalars
        onto their bounds."""

        def clean(W):
            W = _herm(np.asarray(W, dtype=np.complex128))
            vals, vecs = np.linalg.eigh(W)
            if vals[0] < 0.0:
                W = _herm((vecs * np.clip(vals, 0.0, None)) @ vecs.conj().T)
            return W

        return cls(clean(W_c), clean(W_e), max(float(omega), 1.0), max(float(zeta), 0.0))

    @property
    def M(self) -> int:
        return self.W_c.shape[0]

    def total_power(self) -> float:
        return float(np.trace(self.W_c).real + np.trace(self.W_e).real)

    def fits_budget(self, P: float, rel_tol: float = 1e-6) -> bool:
        return self.total_power() <= P * (1.0 + rel_tol)

    @property
    def r_b(self) -> float:
        return math.log2(self.omega)


def tau_mu(j: int, tab: CoefficientTable, inst: NetworkInstance,
           W_c: np.ndarray, W_e: np.ndarray) -> tuple[float, float]:
    """Natural-log numerator/denominator pair of log slot j (1..6):
    tau = ln(sigma^2 + tr(num_c[j] W_c + num_e[j] W_e)) and mu likewise with
    the den tables.  Inputs must be PSD up to round-off."""
    if not 1 <= j <= 6:
        raise ValueError(f"j must lie in 1..6, got {j}")
    W_c = _check_psd(W_c, "W_c")
    W_e = _check_psd(W_e, "W_e")
    tau = math.log(inst.sigma2 + _trace_pair(tab.num_c[j - 1], W_c, tab.num_e[j - 1], W_e))
    mu = math.log(inst.sigma2 + _trace_pair(tab.den_c[j - 1], W_c, tab.den_e[j - 1], W_e))
    return tau, mu


def lambda_xi_rho(inst: NetworkInstance, W_c: np.ndarray, W_e: np.ndarray,
                  omega: float, zeta: float, epsilon: float) -> tuple[float, float, float]:
    """Deterministic pieces of the outage constraint: the mean lam of the
    exponentially distributed reflected power, the success threshold xi and the
    tail constant rho = -ln(1 - epsilon); success >= 1 - epsilon is then
    exactly lam >= xi / rho."""
    if omega < 1.0:
        raise ValueError(f"omega must be >= 1, got {omega}")
    if zeta < 0.0:
        raise ValueError(f"zeta must be >= 0, got {zeta}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    a_c = inst.bd_gain_c
    if a_c == 0.0:
        raise DeadBdLinkError("alpha |g_c|^2 = 0: outage threshold undefined")
    h_b = inst.h_b
    lam = float((h_b.conj() @ (np.asarray(W_c) + np.asarray(W_e)) @ h_b).real)
    xi = inst.sigma2 * (omega * (zeta + 1.0) - 1.0) / a_c
    rho = -math.log1p(-epsilon)
    return lam, xi, rho


def eta_values(omega: float, zeta: float, inst: NetworkInstance,
               W_c: np.ndarray, W_e: np.ndarray) -> tuple[float, float, float, float]:
    """Convex-quadratic splits of the two bilinear products in the outage
    block: eta1 - eta2 = omega (zeta + 1) and
    eta3 - eta4 = zeta (sigma^2 + tr(H_v (W_c + W_e)))."""
    if omega < 1.0:
        raise ValueError(f"omega must be >= 1, got {omega}")
    if zeta < 0.0:
        raise ValueError(f"zeta must be >= 0, got {zeta}")
    eta1 = (omega + zeta + 1.0) ** 2 / 2.0
    eta2 = omega ** 2 / 2.0 + (zeta + 1.0) ** 2 / 2.0
    h_v = inst.h_v
    t = inst.sigma2 + float((h_v.conj() @ (np.asarray(W_c) + np.asarray(W_e)) @ h_v).real)
    eta3 = (zeta + t) ** 2 / 2.0
    eta4 = zeta ** 2 / 2.0 + t ** 2 / 2.0
    return eta1, eta2, eta3, eta4


def linearize_mu(j: int, tab: CoefficientTable, inst: NetworkInstance,
                 anchor: CccpIterate, W_c: np.ndarray, W_e: np.ndarray) -> float:
    """First-order Taylor surrogate of the denominator log mu_j around the
    anchor, evaluated at (W_c, W_e).  Tangent at the anchor and, since a log of
    an affine is concave, an over-estimate everywhere else, which keeps the
    linearized rate rows inside the true feasible set."""
    if not 1 <= j <= 6:
        raise ValueError(f"j must lie in 1..6, got {j}")
    A, B = tab.den_c[j - 1], tab.den_e[j - 1]
    den = inst.sigma2 + _trace_pair(A, anchor.W_c, B, anchor.W_e)
    if den <= 0.0:
        raise ValueError("anchor log argument must be positive")
    step = _trace_pair(A, np.asarray(W_c) - anchor.W_c, B, np.asarray(W_e) - anchor.W_e)
    return math.log(den) + step / den


def linearize_eta2(anchor: CccpIterate, omega: float, zeta: float) -> float:
    """Tangent of the convex quadratic eta2 at the anchor (a global
    under-estimate), evaluated at (omega, zeta)."""
    w0, z0 = anchor.omega, anchor.zeta
    return (w0 ** 2 / 2.0 + (z0 + 1.0) ** 2 / 2.0
            + w0 * (omega - w0) + (z0 + 1.0) * (zeta - z0))


def linearize_eta3(anchor: CccpIterate, inst: NetworkInstance, zeta: float,
                   W_c: np.ndarray, W_e: np.ndarray) -> float:
    """Tangent of the convex quadratic eta3 at the anchor (a global
    under-estimate), evaluated at (zeta, W_c, W_e)."""
    h_v = inst.h_v
    phi0 = float((h_v.conj() @ (anchor.W_c + anchor.W_e) @ h_v).real)
    phi = float((h_v.conj() @ (np.asarray(W_c) + np.asarray(W_e)) @ h_v).real)
    k = anchor.zeta + inst.sigma2 + phi0
    return k ** 2 / 2.0 + k * (zeta - anchor.zeta + phi - phi0)
