"""Exact link-level model of the backscatter-aided NOMA downlink.

A multi-antenna base station serves a central user and a cell-edge user with
superposed beams while a passive backscatter device (BD) piggybacks its own
message to the central user over the incident beams; a potential eavesdropper
overhears both links.  This module holds the problem data and the exact
(non-convex) SINR, secrecy-rate and closed-form outage expressions.  Everything
here is a pure function of its arguments and serves as the ground-truth oracle
for the optimizer and the Monte Carlo validator.

All powers are linear (no dB anywhere in this module).  Secrecy rates are not
clipped at zero; feasibility is always checked as ``rate >= target``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NetworkInstance",
    "SecrecyTargets",
    "BeamPair",
    "DirectSinrs",
    "SecrecyRates",
    "backscatter_gain",
    "direct_sinrs",
    "gamma_cb_realized",
    "secrecy_rates",
    "rb_outage_success",
    "max_outage_rate",
]


def _as_cvector(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.complex128).reshape(-1)
    if arr.size < 1:
        raise ValueError(f"{name} must have at least one entry")
    if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
        raise ValueError(f"{name} must be finite")
    return arr


def _as_cscalar(value, name: str) -> complex:
    z = complex(value)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"{name} must be finite")
    return z


def _gain(h: np.ndarray, w: np.ndarray) -> float:
    """|h^H w|^2 for two complex vectors of equal length."""
    return float(abs(np.vdot(h, w)) ** 2)


@dataclass(frozen=True)
class NetworkInstance:
    """Channels and budgets of one network realization.

    ``h_c, h_e, h_b, h_v`` are the BS-to-{central user, cell-edge user, BD,
    eavesdropper} vectors (length M); ``g_c, g_e, g_v`` the BD-to-receiver
    scalars; ``alpha`` the BD reflection coefficient; ``sigma2`` the common
    receiver noise power and ``P`` the transmit power budget.
    """

    h_c: np.ndarray
    h_e: np.ndarray
    h_b: np.ndarray
    h_v: np.ndarray
    g_c: complex
    g_e: complex
    g_v: complex
    alpha: float
    sigma2: float
    P: float

    def __post_init__(self):
        for name in ("h_c", "h_e", "h_b", "h_v"):
            object.__setattr__(self, name, _as_cvector(getattr(self, name), name))
        m = self.h_c.size
        for name in ("h_e", "h_b", "h_v"):
            if getattr(self, name).size != m:
                raise ValueError(f"{name} must have length {m} to match h_c")
        for name in ("g_c", "g_e", "g_v"):
            object.__setattr__(self, name, _as_cscalar(getattr(self, name), name))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "P", float(self.P))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not (math.isfinite(self.sigma2) and self.sigma2 > 0.0):
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if not (math.isfinite(self.P) and self.P > 0.0):
            raise ValueError(f"P must be positive, got {self.P}")

    @property
    def M(self) -> int:
        """Number of transmit antennas."""
        return self.h_c.size

    @property
    def bd_gain_c(self) -> float:
        """alpha * |g_c|^2, the BD reflection power gain toward the central user."""
        return self.alpha * abs(self.g_c) ** 2

    @property
    def bd_gain_e(self) -> float:
        return self.alpha * abs(self.g_e) ** 2

    @property
    def bd_gain_v(self) -> float:
        return self.alpha * abs(self.g_v) ** 2


@dataclass(frozen=True)
class SecrecyTargets:
    """Secrecy-rate floors for the two direct links and the outage budget for
    the backscatter link: the BD message must reach its rate with probability
    at least ``1 - epsilon``."""

    r_c: float
    r_e: float
    epsilon: float

    def __post_init__(self):
        object.__setattr__(self, "r_c", float(self.r_c))
        object.__setattr__(self, "r_e", float(self.r_e))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        if not (math.isfinite(self.r_c) and self.r_c >= 0.0):
            raise ValueError(f"r_c must be >= 0, got {self.r_c}")
        if not (math.isfinite(self.r_e) and self.r_e >= 0.0):
            raise ValueError(f"r_e must be >= 0, got {self.r_e}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")


@dataclass(frozen=True)
class BeamPair:
    """Transmit beams for the central-user and cell-edge-user messages
    (sqrt-power units, so ||w||^2 is the power spent on that message)."""

    w_c: np.ndarray
    w_e: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w_c", _as_cvector(self.w_c, "w_c"))
        object.__setattr__(self, "w_e", _as_cvector(self.w_e, "w_e"))
        if self.w_c.size != self.w_e.size:
            raise ValueError("w_c and w_e must have the same length")

    def total_power(self) -> float:
        return float(np.vdot(self.w_c, self.w_c).real + np.vdot(self.w_e, self.w_e).real)

    def fits_budget(self, inst: NetworkInstance, rel_tol: float = 1e-6) -> bool:
        return self.total_power() <= inst.P * (1.0 + rel_tol)


@dataclass(frozen=True)
class DirectSinrs:
    """The six deterministic SINRs (receiver, message) of one beam pair."""

    gamma_ce: float  # central user decoding the edge-user message (pre-SIC)
    gamma_cc: float  # central user decoding its own message (post-SIC)
    gamma_vc: float  # eavesdropper on the central-user message
    gamma_vb: float  # eavesdropper on the BD message
    gamma_ee: float  # edge user decoding its own message
    gamma_ve: float  # eavesdropper on the edge-user message


@dataclass(frozen=True)
class SecrecyRates:
    """Secrecy rates (bits/s/Hz) of the three direct decoding steps; may be
    negative when the eavesdropper's SINR exceeds the legitimate one."""

    R_c: float
    R_e: float
    R_ce: float


def _check_dims(inst: NetworkInstance, b: BeamPair) -> None:
    if b.w_c.size != inst.M:
        raise ValueError(f"beam length {b.w_c.size} does not match M={inst.M}")


def backscatter_gain(inst: NetworkInstance, b: BeamPair) -> float:
    """Combined power gain of the BS->BD leg, f = |h_b^H w_c|^2 + |h_b^H w_e|^2."""
    _check_dims(inst, b)
    return _gain(inst.h_b, b.w_c) + _gain(inst.h_b, b.w_e)


def direct_sinrs(inst: NetworkInstance, b: BeamPair) -> DirectSinrs:
    """All six deterministic SINRs.

    The central user SIC-decodes the edge-user message first (backscatter and
    own-message power are interference), then its own message; the BD message
    is handled separately because its SINR is symbol-dependent.  The
    eavesdropper is credited the same decoding order.
    """
    _check_dims(inst, b)
    s2 = inst.sigma2
    f = backscatter_gain(inst, b)
    a_c, a_e, a_v = inst.bd_gain_c, inst.bd_gain_e, inst.bd_gain_v
    p_cc = _gain(inst.h_c, b.w_c)
    p_ce = _gain(inst.h_c, b.w_e)
    p_ec = _gain(inst.h_e, b.w_c)
    p_ee = _gain(inst.h_e, b.w_e)
    p_vc = _gain(inst.h_v, b.w_c)
    p_ve = _gain(inst.h_v, b.w_e)
    return DirectSinrs(
        gamma_ce=p_ce / (s2 + p_cc + a_c * f),
        gamma_cc=p_cc / (s2 + a_c * f),
        gamma_vc=p_vc / (s2 + p_ve + a_v * f),
        gamma_vb=a_v * f / (s2 + p_vc + p_ve),
        gamma_ee=p_ee / (s2 + p_ec + a_e * f),
        gamma_ve=p_ve / (s2 + p_vc + a_v * f),
    )


def gamma_cb_realized(inst: NetworkInstance, b: BeamPair, s_c: complex, s_e: complex) -> float:
    """Per-symbol SINR of the BD message at the central user.

    After both direct messages are removed by SIC, the residual useful power is
    the reflected superposition |h_b^H w_c s_c + h_b^H w_e s_e|^2; the BD symbol
    itself is taken unit-modulus.
    """
    _check_dims(inst, b)
    amp = np.vdot(inst.h_b, b.w_c) * s_c + np.vdot(inst.h_b, b.w_e) * s_e
    return inst.bd_gain_c * float(abs(amp) ** 2) / inst.sigma2


def secrecy_rates(inst: NetworkInstance, b: BeamPair) -> SecrecyRates:
    """Secrecy rates of the central-user, edge-user and cross-decoding steps.

    Each is log2(1 + legitimate SINR) - log2(1 + eavesdropper SINR); no
    clipping, so a dominated link yields a negative rate.
    """
    g = direct_sinrs(inst, b)
    return SecrecyRates(
        R_c=math.log2(1.0 + g.gamma_cc) - math.log2(1.0 + g.gamma_vc),
        R_e=math.log2(1.0 + g.gamma_ee) - math.log2(1.0 + g.gamma_ve),
        R_ce=math.log2(1.0 + g.gamma_ce) - math.log2(1.0 + g.gamma_ve),
    )


def rb_outage_success(inst: NetworkInstance, b: BeamPair, r_b: float) -> float:
    """Closed-form probability that the BD secrecy rate reaches ``r_b``.

    Over standard complex Gaussian message symbols the reflected useful power
    is exponentially distributed with mean f, so
    Pr[R_b >= r_b] = exp(-xi / f) with
    xi = sigma^2 (omega (gamma_vb + 1) - 1) / (alpha |g_c|^2), omega = 2^r_b.

    Degenerate cases: a vanishing threshold (xi <= 0) always succeeds; a dead
    BS->BD leg (f = 0) with a positive threshold never does; with a dead
    BD->central-user leg the BD SINR is identically zero and success is the
    deterministic indicator of omega (gamma_vb + 1) <= 1.
    """
    if r_b < 0.0:
        raise ValueError(f"r_b must be >= 0, got {r_b}")
    zbar = direct_sinrs(inst, b).gamma_vb
    omega = 2.0 ** r_b
    need = omega * (zbar + 1.0) - 1.0
    a_c = inst.bd_gain_c
    if a_c == 0.0:
        return 0.0 if need > 0.0 else 1.0
    xi = inst.sigma2 * need / a_c
    if xi <= 0.0:
        return 1.0
    lam = backscatter_gain(inst, b)
    if lam == 0.0:
        return 0.0
    return math.exp(-xi / lam)


def max_outage_rate(inst: NetworkInstance, b: BeamPair, epsilon: float) -> float | None:
    """Largest r_b >= 0 with closed-form success >= 1 - epsilon, or None.

    Inverts the outage law at fixed beams: 2^r_b <= (rho f a_c / sigma^2 + 1)
    / (1 + gamma_vb) with rho = -ln(1 - epsilon).  Returns None when even
    r_b = 0 fails (the eavesdropper's BD SINR is too large) or when the
    BD->central-user leg is dead while the eavesdropper still hears the BD.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    zbar = direct_sinrs(inst, b).gamma_vb
    a_c = inst.bd_gain_c
    if a_c == 0.0:
        return 0.0 if zbar == 0.0 else None
    rho = -math.log1p(-epsilon)
    lam = backscatter_gain(inst, b)
    omega_max = (rho * lam * a_c / inst.sigma2 + 1.0) / (1.0 + zbar)
    if omega_max < 1.0:
        return None
    return math.log2(omega_max)
