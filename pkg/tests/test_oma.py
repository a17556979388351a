import math

import numpy as np
import pytest

from srsec.cccp import SolveStatus, run
from srsec.model import BeamPair, SecrecyTargets, rb_outage_success, secrecy_rates
from srsec.oma import solve_oma

from conftest import random_instance


class TestSolveOma:
    def test_trivial_targets_feasible(self):
        inst = random_instance(0, h_v=np.zeros(4), g_v=0.0)
        rep = solve_oma(inst, SecrecyTargets(0.0, 0.0, 0.1))
        assert rep.status is SolveStatus.CONVERGED
        assert rep.r_b > 0.0

    def test_rate_is_half_of_slot_a(self, default_targets):
        inst = random_instance(1)
        rep = solve_oma(inst, default_targets)
        assert rep.status is SolveStatus.CONVERGED
        if not rep.diagnostics.get("rb_from_beams"):
            slot_a_omega = rep.diagnostics["slot_a_trace"][-1]
            assert rep.r_b == pytest.approx(0.5 * math.log2(slot_a_omega), abs=1e-9)

    def test_slotwise_verification(self, default_targets):
        inst = random_instance(2)
        rep = solve_oma(inst, default_targets)
        assert rep.status is SolveStatus.CONVERGED
        assert max(rep.residuals.values()) <= 1e-6
        beams_a = BeamPair(rep.w_c, np.zeros(4))
        beams_b = BeamPair(np.zeros(4), rep.w_e)
        assert 0.5 * secrecy_rates(inst, beams_a).R_c >= default_targets.r_c - 1e-6
        assert 0.5 * secrecy_rates(inst, beams_b).R_e >= default_targets.r_e - 1e-6
        # outage certified at the full-slot rate 2 r_b
        assert rb_outage_success(inst, beams_a, 2.0 * rep.r_b) >= 0.9 - 1e-6
        assert float(np.linalg.norm(rep.w_c)) ** 2 <= inst.P * (1 + 1e-6)
        assert float(np.linalg.norm(rep.w_e)) ** 2 <= inst.P * (1 + 1e-6)

    def test_slot_a_invariant_to_edge_channel(self, default_targets):
        base = random_instance(3)
        changed = random_instance(3, h_e=0.3 * base.h_e, g_e=2.0 * base.g_e)
        a = solve_oma(base, default_targets)
        b = solve_oma(changed, default_targets)
        assert a.diagnostics["slot_a_trace"] == b.diagnostics["slot_a_trace"]
        assert a.r_b == b.r_b

    def test_slot_b_invariant_to_central_channel(self, default_targets):
        base = random_instance(4)
        changed = random_instance(4, h_c=0.5 * base.h_c, g_c=0.7 * base.g_c)
        a = solve_oma(base, default_targets)
        b = solve_oma(changed, default_targets)
        assert a.diagnostics["slot_b_slack"] == pytest.approx(
            b.diagnostics["slot_b_slack"], abs=1e-9)

    def test_infeasible_edge_target(self):
        # half-slot capacity toward the weak edge user cannot reach 50 bits
        inst = random_instance(5)
        cap = 0.5 * math.log2(1.0 + inst.P * float(np.linalg.norm(inst.h_e)) ** 2)
        assert cap < 50.0
        rep = solve_oma(inst, SecrecyTargets(0.1, 50.0, 0.1))
        assert rep.status is SolveStatus.INFEASIBLE

    def test_dead_bd_gives_zero_rate(self, default_targets):
        rep = solve_oma(random_instance(6, alpha=0.0), default_targets)
        assert rep.status is SolveStatus.CONVERGED
        assert rep.r_b == 0.0

    def test_deterministic(self, default_targets):
        a = solve_oma(random_instance(7), default_targets)
        b = solve_oma(random_instance(7), default_targets)
        assert a.r_b == b.r_b

    def test_noma_dominates_on_paired_draws(self):
        targets = SecrecyTargets(0.5, 0.05, 0.1)
        noma, oma = [], []
        for seed in range(5):
            inst = random_instance(100 + seed)
            n = run(inst, targets)
            o = solve_oma(inst, targets)
            if n.status is SolveStatus.CONVERGED and o.status is SolveStatus.CONVERGED:
                noma.append(n.r_b)
                oma.append(o.r_b)
        assert len(noma) >= 3
        assert np.mean(noma) >= np.mean(oma)
