import math

import numpy as np
import pytest

from srsec.model import BeamPair, NetworkInstance, secrecy_rates
from srsec.transform import (
    CccpIterate,
    DeadBdLinkError,
    build_coeff_tables,
    eta_values,
    lambda_xi_rho,
    linearize_eta2,
    linearize_eta3,
    linearize_mu,
    tau_mu,
)

from conftest import random_beams, random_instance

LN2 = math.log(2.0)


def lifted(b: BeamPair):
    return np.outer(b.w_c, b.w_c.conj()), np.outer(b.w_e, b.w_e.conj())


def random_psd_pair(m: int, seed, scale: float = 1.0):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    B = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return scale * (A @ A.conj().T), scale * (B @ B.conj().T)


class TestCoefficientTable:
    def test_t1_leading_entry(self, t1_instance):
        tab = build_coeff_tables(t1_instance)
        # |h_c[0]|^2 + alpha |g_c|^2 |h_b[0]|^2 = 1 + 0.5
        assert tab.num_c[0][0, 0].real == pytest.approx(1.5, abs=1e-14)

    def test_alpha_zero_kills_reflection_slots(self):
        inst = NetworkInstance([1, 0], [0, 1], [1, 0], [0.3, 0.1], 1, 0.2, 0.1,
                               alpha=0.0, sigma2=1.0, P=5.0)
        tab = build_coeff_tables(inst)
        for mat in (tab.num_e[0], tab.den_c[0], tab.den_e[0], tab.den_e[4]):
            assert np.all(mat == 0)

    def test_aliased_slots_equal(self):
        for seed in range(5):
            tab = build_coeff_tables(random_instance(seed))
            # shared eavesdropper denominator across the edge/cross pairs
            np.testing.assert_array_equal(tab.den_e[1], tab.den_e[3])
            np.testing.assert_array_equal(tab.den_e[1], tab.den_e[5])
            np.testing.assert_array_equal(tab.den_e[1], tab.den_c[5])
            # central-user numerator aliases
            np.testing.assert_array_equal(tab.num_c[0], tab.num_c[4])
            np.testing.assert_array_equal(tab.num_c[0], tab.num_e[4])
            np.testing.assert_array_equal(tab.num_c[0], tab.den_c[4])

    def test_all_slots_hermitian_psd(self):
        for seed in range(20):
            tab = build_coeff_tables(random_instance(seed))
            for group in (tab.num_c, tab.num_e, tab.den_c, tab.den_e):
                for mat in group:
                    scale = 1.0 + abs(float(np.trace(mat).real))
                    assert np.max(np.abs(mat - mat.conj().T)) <= 1e-12 * scale
                    assert np.linalg.eigvalsh(mat)[0] >= -1e-10 * scale


class TestTauMu:
    def test_t1_recovers_central_rate(self, t1_instance, t1_beams):
        tab = build_coeff_tables(t1_instance)
        W_c, W_e = lifted(t1_beams)
        t1v, m1 = tau_mu(1, tab, t1_instance, W_c, W_e)
        t2v, m2 = tau_mu(2, tab, t1_instance, W_c, W_e)
        rate = (t1v + t2v - m1 - m2) / LN2
        assert rate == pytest.approx(secrecy_rates(t1_instance, t1_beams).R_c, abs=1e-12)

    def test_zero_matrices_give_noise_floor(self, t1_instance):
        tab = build_coeff_tables(t1_instance)
        Z = np.zeros((2, 2))
        for j in range(1, 7):
            tau, mu = tau_mu(j, tab, t1_instance, Z, Z)
            assert tau == pytest.approx(math.log(t1_instance.sigma2), abs=1e-15)
            assert mu == pytest.approx(math.log(t1_instance.sigma2), abs=1e-15)

    def test_tau1_strictly_increases_along_h_c(self, t1_instance):
        tab = build_coeff_tables(t1_instance)
        Z = np.zeros((2, 2))
        H = np.outer(t1_instance.h_c, t1_instance.h_c.conj())
        prev = tau_mu(1, tab, t1_instance, Z, Z)[0]
        for t in (0.5, 1.0, 2.0):
            cur = tau_mu(1, tab, t1_instance, t * H, Z)[0]
            assert cur > prev
            prev = cur

    def test_rejects_indefinite_input(self, t1_instance):
        tab = build_coeff_tables(t1_instance)
        bad = np.diag([1.0, -1.0])
        with pytest.raises(ValueError):
            tau_mu(1, tab, t1_instance, bad, np.zeros((2, 2)))

    def test_dc_identity_random(self):
        # (tau + tau - mu - mu)/ln2 reproduces each secrecy rate exactly
        for seed in range(60):
            inst = random_instance(seed)
            b = random_beams(inst, seed + 2000)
            tab = build_coeff_tables(inst)
            W_c, W_e = lifted(b)
            rates = secrecy_rates(inst, b)
            vals = [tau_mu(j, tab, inst, W_c, W_e) for j in range(1, 7)]
            for (ja, jb), expect in (((1, 2), rates.R_c), ((3, 4), rates.R_e),
                                     ((5, 6), rates.R_ce)):
                got = (vals[ja - 1][0] + vals[jb - 1][0]
                       - vals[ja - 1][1] - vals[jb - 1][1]) / LN2
                assert got == pytest.approx(expect, abs=1e-9)


class TestLambdaXiRho:
    def test_rho_value(self, t1_instance, t1_beams):
        W_c, W_e = lifted(t1_beams)
        _, _, rho = lambda_xi_rho(t1_instance, W_c, W_e, 1.0, 0.0, 0.1)
        assert rho == pytest.approx(0.10536051565782628, abs=1e-15)

    def test_zero_threshold_at_unit_omega(self, t1_instance, t1_beams):
        W_c, W_e = lifted(t1_beams)
        _, xi, _ = lambda_xi_rho(t1_instance, W_c, W_e, 1.0, 0.0, 0.1)
        assert xi == 0.0

    def test_lambda_equals_backscatter_gain(self, t1_instance, t1_beams):
        W_c, W_e = lifted(t1_beams)
        lam, _, _ = lambda_xi_rho(t1_instance, W_c, W_e, 2.0, 0.5, 0.1)
        assert lam == pytest.approx(4.0, abs=1e-12)

    def test_dead_bd_link_raises(self, t1_beams):
        inst = NetworkInstance([1, 0], [0, 1], [1, 0], [0, 0], 0.0, 0, 0,
                               alpha=0.5, sigma2=1.0, P=5.0)
        W_c, W_e = lifted(t1_beams)
        with pytest.raises(DeadBdLinkError):
            lambda_xi_rho(inst, W_c, W_e, 1.0, 0.0, 0.1)

    def test_tail_condition_matches_success_probability(self):
        # exp(-xi/lam) >= 1 - eps exactly when lam >= xi/rho, boundary included
        eps = 0.1
        rho = -math.log1p(-eps)
        for xi in (0.5, 1.0, 7.3):
            for lam in (0.25 * xi / rho, 0.999 * xi / rho, xi / rho,
                        1.001 * xi / rho, 10.0 * xi / rho):
                succeeds = math.exp(-xi / lam) >= 1.0 - eps - 1e-15
                assert succeeds == (lam >= xi / rho - 1e-12)


class TestEtaValues:
    def test_hand_example_first_pair(self, t1_instance):
        Z = np.zeros((2, 2))
        eta1, eta2, _, _ = eta_values(2.0, 3.0, t1_instance, Z, Z)
        assert eta1 == 18.0 and eta2 == 10.0
        assert eta1 - eta2 == 2.0 * (3.0 + 1.0)

    def test_hand_example_second_pair(self):
        inst = NetworkInstance([1, 0], [0, 1], [1, 0], [1, 0], 1, 0, 0,
                               alpha=0.5, sigma2=1.0, P=5.0)
        W = np.diag([1.0, 0.0])  # tr(H_v (W + W)) = 2
        _, _, eta3, eta4 = eta_values(1.0, 1.0, inst, W, W)
        assert eta3 == 8.0 and eta4 == 5.0
        assert eta3 - eta4 == 1.0 * (1.0 + 2.0)

    def test_zeta_zero(self, t1_instance):
        W_c, W_e = random_psd_pair(2, 3)
        _, _, eta3, eta4 = eta_values(1.0, 0.0, t1_instance, W_c, W_e)
        assert eta3 - eta4 == pytest.approx(0.0, abs=1e-12)

    def test_identities_random(self):
        for seed in range(200):
            rng = np.random.default_rng(seed)
            inst = random_instance(seed)
            W_c, W_e = random_psd_pair(inst.M, seed + 1, scale=float(rng.uniform(0.1, 50)))
            omega = float(rng.uniform(1.0, 40.0))
            zeta = float(rng.uniform(0.0, 10.0))
            eta1, eta2, eta3, eta4 = eta_values(omega, zeta, inst, W_c, W_e)
            lhs = eta1 - eta2
            rhs = omega * (zeta + 1.0)
            assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))
            t = inst.sigma2 + float((inst.h_v.conj() @ (W_c + W_e) @ inst.h_v).real)
            assert abs((eta3 - eta4) - zeta * t) <= 1e-9 * max(1.0, abs(zeta * t))


def make_anchor(inst, seed, power_frac=0.6):
    b = random_beams(inst, seed, power_frac)
    W_c, W_e = lifted(b)
    return CccpIterate(W_c, W_e, omega=float(2.0 + seed % 3), zeta=float(0.1 * (seed % 5)))


class TestLinearizeMu:
    def test_tangency(self):
        for seed in range(10):
            inst = random_instance(seed)
            tab = build_coeff_tables(inst)
            anchor = make_anchor(inst, seed + 40)
            for j in range(1, 7):
                mu = tau_mu(j, tab, inst, anchor.W_c, anchor.W_e)[1]
                lin = linearize_mu(j, tab, inst, anchor, anchor.W_c, anchor.W_e)
                assert abs(lin - mu) <= 1e-12 * max(1.0, abs(mu))

    def test_overestimates_everywhere(self):
        for seed in range(200):
            inst = random_instance(seed % 17)
            tab = build_coeff_tables(inst)
            anchor = make_anchor(inst, seed + 80)
            W_c, W_e = random_psd_pair(inst.M, seed + 11,
                                       scale=inst.P / (4.0 * inst.M))
            for j in range(1, 7):
                mu = tau_mu(j, tab, inst, W_c, W_e)[1]
                lin = linearize_mu(j, tab, inst, anchor, W_c, W_e)
                assert lin >= mu - 1e-10

    def test_directional_derivative(self):
        h = 1e-6
        for seed in range(10):
            inst = random_instance(seed)
            tab = build_coeff_tables(inst)
            anchor = make_anchor(inst, seed + 160, power_frac=0.5)
            D_c, D_e = random_psd_pair(inst.M, seed + 12, scale=0.05)
            for j in range(1, 7):
                up = tau_mu(j, tab, inst, anchor.W_c + h * D_c, anchor.W_e + h * D_e)[1]
                dn = tau_mu(j, tab, inst, anchor.W_c - h * D_c, anchor.W_e - h * D_e)[1]
                numeric = (up - dn) / (2.0 * h)
                analytic = (linearize_mu(j, tab, inst, anchor,
                                         anchor.W_c + D_c, anchor.W_e + D_e)
                            - linearize_mu(j, tab, inst, anchor, anchor.W_c, anchor.W_e))
                if abs(numeric) < 1e-12:
                    assert abs(analytic) < 1e-8
                else:
                    assert analytic == pytest.approx(numeric, rel=1e-5)


class TestLinearizeEta:
    def test_tangency(self):
        for seed in range(10):
            inst = random_instance(seed)
            anchor = make_anchor(inst, seed + 200)
            _, eta2, eta3, _ = eta_values(anchor.omega, anchor.zeta, inst,
                                          anchor.W_c, anchor.W_e)
            lin2 = linearize_eta2(anchor, anchor.omega, anchor.zeta)
            lin3 = linearize_eta3(anchor, inst, anchor.zeta, anchor.W_c, anchor.W_e)
            assert abs(lin2 - eta2) <= 1e-12 * max(1.0, abs(eta2))
            assert abs(lin3 - eta3) <= 1e-12 * max(1.0, abs(eta3))

    def test_eta2_underestimates(self):
        rng = np.random.default_rng(7)
        inst = random_instance(1)
        anchor = make_anchor(inst, 300)
        for _ in range(200):
            omega = float(rng.uniform(1.0, 50.0))
            zeta = float(rng.uniform(0.0, 20.0))
            _, eta2, _, _ = eta_values(omega, zeta, inst, anchor.W_c, anchor.W_e)
            assert linearize_eta2(anchor, omega, zeta) <= eta2 + 1e-10

    def test_eta3_underestimates(self):
        for seed in range(200):
            rng = np.random.default_rng(seed)
            inst = random_instance(seed % 13)
            anchor = make_anchor(inst, seed + 400)
            W_c, W_e = random_psd_pair(inst.M, seed + 21,
                                       scale=float(rng.uniform(0.01, 2.0)) * inst.P / inst.M)
            zeta = float(rng.uniform(0.0, 20.0))
            _, _, eta3, _ = eta_values(1.0, zeta, inst, W_c, W_e)
            lin3 = linearize_eta3(anchor, inst, zeta, W_c, W_e)
            assert lin3 <= eta3 + 1e-10 * max(1.0, abs(eta3))
