"""Secrecy beamforming for a backscatter-aided NOMA downlink.

Library layout:

* :mod:`srsec.model` -- exact SINR / secrecy-rate / outage oracles.
* :mod:`srsec.transform` -- difference-of-convex coefficient tables and
  Taylor surrogates.
* :mod:`srsec.subproblem` -- one convex inner subproblem (assembly + solve).
* :mod:`srsec.cccp` -- the outer optimization loop and rank-one recovery.
* :mod:`srsec.oma` -- the two-slot TDMA baseline.
* :mod:`srsec.montecarlo` -- random instances and empirical outage checks.
* :mod:`srsec.experiments` / :mod:`srsec.cli` -- experiment drivers and the
  command-line surface.
"""

from .model import (
    BeamPair,
    NetworkInstance,
    SecrecyTargets,
    backscatter_gain,
    direct_sinrs,
    gamma_cb_realized,
    max_outage_rate,
    rb_outage_success,
    secrecy_rates,
)
from .transform import CccpIterate, CoefficientTable, build_coeff_tables
from .cccp import CccpOptions, SolveReport, SolveStatus, initialize, recover_rank_one, run
from .oma import OmaReport, solve_oma
from .montecarlo import ChannelProfile, MonteCarloReport, estimate_outage, sample_instance

__all__ = [
    "BeamPair",
    "NetworkInstance",
    "SecrecyTargets",
    "backscatter_gain",
    "direct_sinrs",
    "gamma_cb_realized",
    "max_outage_rate",
    "rb_outage_success",
    "secrecy_rates",
    "CccpIterate",
    "CoefficientTable",
    "build_coeff_tables",
    "CccpOptions",
    "SolveReport",
    "SolveStatus",
    "initialize",
    "recover_rank_one",
    "run",
    "OmaReport",
    "solve_oma",
    "ChannelProfile",
    "MonteCarloReport",
    "estimate_outage",
    "sample_instance",
]

__version__ = "0.1.0"
