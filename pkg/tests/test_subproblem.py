import io
import math

import numpy as np
import pytest

from srsec.model import SecrecyTargets
from srsec.subproblem import (
    SubproblemStatus,
    assemble,
    solve_subproblem,
)
from srsec.transform import (
    CccpIterate,
    DeadBdLinkError,
    build_coeff_tables,
    lambda_xi_rho,
    tau_mu,
)

from conftest import random_instance

LN2 = math.log(2.0)


def mrt_anchor(inst, beta=0.5):
    u_c = inst.h_c / np.linalg.norm(inst.h_c)
    u_e = inst.h_e / np.linalg.norm(inst.h_e)
    W_c = beta * inst.P * np.outer(u_c, u_c.conj())
    W_e = (1.0 - beta) * inst.P * np.outer(u_e, u_e.conj())
    num = inst.bd_gain_v * float((inst.h_b.conj() @ (W_c + W_e) @ inst.h_b).real)
    den = inst.sigma2 + float((inst.h_v.conj() @ (W_c + W_e) @ inst.h_v).real)
    return CccpIterate.from_solution(W_c, W_e, 1.0, num / den)


def original_margins(inst, targets, it: CccpIterate) -> dict:
    """Margins of the exact lifted constraints (no linearization)."""
    tab = build_coeff_tables(inst)
    vals = [tau_mu(j, tab, inst, it.W_c, it.W_e) for j in range(1, 7)]
    out = {
        "rate_central": (vals[0][0] + vals[1][0] - vals[0][1] - vals[1][1]) - targets.r_c * LN2,
        "rate_edge": (vals[2][0] + vals[3][0] - vals[2][1] - vals[3][1]) - targets.r_e * LN2,
        "rate_cross": (vals[4][0] + vals[5][0] - vals[4][1] - vals[5][1]) - targets.r_e * LN2,
        "power": inst.P - it.total_power(),
    }
    lam, xi, rho = lambda_xi_rho(inst, it.W_c, it.W_e, it.omega, it.zeta, targets.epsilon)
    out["outage"] = lam - xi / rho
    num = inst.bd_gain_v * float((inst.h_b.conj() @ (it.W_c + it.W_e) @ inst.h_b).real)
    den = inst.sigma2 + float((inst.h_v.conj() @ (it.W_c + it.W_e) @ inst.h_v).real)
    out["eaves_bound"] = it.zeta - num / den
    return out


class TestAssemble:
    def test_census(self, default_targets):
        inst = random_instance(0)
        spec = assemble(inst, default_targets, mrt_anchor(inst), build_coeff_tables(inst))
        assert spec.census() == {"log_rows": 3, "quadratic_rows": 2, "power_rows": 1,
                                 "psd_blocks": 2, "scalar_bounds": 2}

    def test_anchor_tangency_margins(self, default_targets):
        # a solved iterate satisfies the ORIGINAL lifted constraints, so by
        # tangency it must satisfy every row of the subproblem assembled at
        # itself, and the next solve cannot move the objective down
        for seed in range(5):
            inst = random_instance(seed)
            tab = build_coeff_tables(inst)
            first = solve_subproblem(assemble(inst, default_targets,
                                              mrt_anchor(inst), tab))
            assert first.status is SubproblemStatus.OPTIMAL
            it = first.iterate
            spec = assemble(inst, default_targets, it, tab)
            lin = spec.margins(it.W_c, it.W_e, it.omega, it.zeta)
            assert min(lin.values()) >= -1e-6
            second = solve_subproblem(spec)
            assert second.status is SubproblemStatus.OPTIMAL
            assert second.iterate.omega >= it.omega - 1e-6

    def test_dead_eavesdropper_zero_coefficient(self, default_targets):
        inst = random_instance(3, h_v=np.zeros(4), g_v=0.0)
        spec = assemble(inst, default_targets, mrt_anchor(inst), build_coeff_tables(inst))
        assert spec.bd_gain_v == 0.0
        assert np.all(spec.H_v == 0)

    def test_dead_bd_link_rejected(self, default_targets):
        inst = random_instance(4, g_c=0.0)
        with pytest.raises(DeadBdLinkError):
            assemble(inst, default_targets, mrt_anchor(inst), build_coeff_tables(inst))

    def test_anchor_dimension_checked(self, default_targets):
        inst = random_instance(5)
        bad = CccpIterate(np.eye(3), np.eye(3), 1.0, 0.0)
        with pytest.raises(ValueError):
            assemble(inst, default_targets, bad, build_coeff_tables(inst))


class TestSolve:
    def test_improves_on_feasible_anchor(self, default_targets):
        inst = random_instance(1)
        anchor = mrt_anchor(inst)
        spec = assemble(inst, default_targets, anchor, build_coeff_tables(inst))
        res = solve_subproblem(spec)
        assert res.status is SubproblemStatus.OPTIMAL
        assert res.iterate.omega >= anchor.omega - 1e-6

    def test_infeasible_targets_detected(self):
        # capacity bound: log2(1 + P ||h_c||^2) is tens of bits at most,
        # nowhere near 100
        inst = random_instance(2)
        cap = math.log2(1.0 + inst.P * float(np.linalg.norm(inst.h_c)) ** 2)
        assert cap < 100.0
        spec = assemble(inst, SecrecyTargets(100.0, 0.1, 0.1), mrt_anchor(inst),
                        build_coeff_tables(inst))
        res = solve_subproblem(spec)
        assert res.status is SubproblemStatus.INFEASIBLE
        assert res.iterate is None

    def test_returned_iterate_psd_and_budgeted(self, default_targets):
        inst = random_instance(6)
        spec = assemble(inst, default_targets, mrt_anchor(inst), build_coeff_tables(inst))
        res = solve_subproblem(spec)
        it = res.iterate
        for W in (it.W_c, it.W_e):
            scale = 1.0 + abs(float(np.trace(W).real))
            assert np.linalg.eigvalsh(0.5 * (W + W.conj().T))[0] >= -1e-8 * scale
        assert it.fits_budget(inst.P)

    def test_deterministic(self, default_targets):
        inst = random_instance(7)
        spec = assemble(inst, default_targets, mrt_anchor(inst), build_coeff_tables(inst))
        a = solve_subproblem(spec)
        b = solve_subproblem(spec)
        assert a.status == b.status
        assert abs(a.objective - b.objective) <= 1e-9

    def test_solution_feasible_for_original_constraints(self, default_targets):
        # one-sided surrogates make the subproblem an inner approximation
        for seed in range(5):
            inst = random_instance(seed + 30)
            spec = assemble(inst, default_targets, mrt_anchor(inst),
                            build_coeff_tables(inst))
            res = solve_subproblem(spec)
            assert res.status is SubproblemStatus.OPTIMAL
            orig = original_margins(inst, default_targets, res.iterate)
            scaled_tol = 1e-6 * max(1.0, inst.P)
            assert orig["rate_central"] >= -1e-6
            assert orig["rate_edge"] >= -1e-6
            assert orig["rate_cross"] >= -1e-6
            assert orig["power"] >= -scaled_tol
            assert orig["outage"] >= -scaled_tol
            assert orig["eaves_bound"] >= -1e-6

    def test_slack_mode_negative_for_impossible_targets(self):
        inst = random_instance(8)
        spec = assemble(inst, SecrecyTargets(100.0, 0.1, 0.1), mrt_anchor(inst),
                        build_coeff_tables(inst), slack=True)
        res = solve_subproblem(spec)
        assert res.status is SubproblemStatus.OPTIMAL
        assert res.slack_value < 0.0

    def test_variant_shapes_solve(self, default_targets):
        inst = random_instance(9)
        tab = build_coeff_tables(inst)
        zeros = np.zeros((inst.M, inst.M))
        a = CccpIterate.from_solution(mrt_anchor(inst).W_c, zeros, 1.0, 0.0)
        spec = assemble(inst, SecrecyTargets(0.0, 0.0, 0.1), a, tab,
                        rate_rows=("central",), include_We=False)
        res = solve_subproblem(spec)
        assert res.status is SubproblemStatus.OPTIMAL
        assert np.all(res.iterate.W_e == 0)
        b = CccpIterate.from_solution(zeros, mrt_anchor(inst).W_e, 1.0, 0.0)
        spec = assemble(inst, SecrecyTargets(0.0, 0.0, 0.1), b, tab,
                        rate_rows=("edge",), include_Wc=False,
                        include_outage=False, slack=True)
        res = solve_subproblem(spec)
        assert res.status is SubproblemStatus.OPTIMAL
        assert res.slack_value >= 0.0


class TestDump:
    def test_format(self, default_targets):
        inst = random_instance(10)
        spec = assemble(inst, default_targets, mrt_anchor(inst), build_coeff_tables(inst))
        buf = io.StringIO()
        spec.dump_text(buf)
        lines = buf.getvalue().splitlines()
        assert lines[0].startswith("# convex inner subproblem")
        kinds = [ln.split()[0] for ln in lines if not ln.startswith("#")]
        assert kinds.count("rate_row") == 3
        assert kinds.count("quad_row") == 2
        assert kinds.count("power_row") == 1
        # 17-significant-digit numbers and parseable matrix entries
        power_line = [ln for ln in lines if ln.startswith("power_row")][0]
        val = float(power_line.split("budget=")[1])
        assert val == pytest.approx(inst.P / inst.sigma2)
        mat_field = [ln for ln in lines if "H_b=[" in ln][0]
        body = mat_field.split("H_b=[")[1].split("]")[0]
        entries = [complex(*map(float, pair.split(":"))) for pair in body.split(",")]
        assert len(entries) == inst.M * inst.M
