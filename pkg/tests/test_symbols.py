import cmath

import numpy as np
import pytest
import sympy

from capillary_stokes.core import BranchCutError, SingularModeError
from capillary_stokes import symbols as sy

from conftest import CONTRAST, EQUAL_PHASES, RT_UNSTABLE, random_admissible


class TestOmega:
    def test_real_arguments(self):
        p = EQUAL_PHASES
        assert sy.omega(p, 1, 0.0, 2.0) == pytest.approx(2.0)
        assert sy.omega(p, 1, 3.0, 1.0) == pytest.approx(2.0)

    def test_polar_form_oracle(self):
        # independent evaluation of sqrt(1 + 2i) through modulus/argument
        p = sy.FluidParams(rho1=2.0, rho2=2.0, mu1=1.0, mu2=1.0, sigma=1.0)
        arg = 1.0 + 2.0j          # rho*lambda + mu*tau^2 with lambda=i, tau=1
        expected = (abs(arg) ** 0.5) * cmath.exp(1j * cmath.phase(arg) / 2.0)
        got = sy.omega(p, 1, 1j, 1.0)
        assert abs(got - expected) < 1e-14
        assert got.real > 0.0

    def test_branch_cut_rejected(self):
        p = EQUAL_PHASES
        with pytest.raises(BranchCutError):
            sy.omega(p, 1, -2.0, 1.0)   # rho*lam + mu*tau^2 = -1
        with pytest.raises(BranchCutError):
            sy.omega(p, 2, 0.0, 0.0)

    def test_positive_real_part_on_right_half_plane(self, rng):
        lam, tau = random_admissible(rng, 500)
        w = sy.omega(CONTRAST, 1, lam, tau)
        assert np.all(w.real > 0.0)


class TestDnMatrix:
    def test_equal_phases_kill_off_diagonal(self):
        mat, se = sy.dn_matrix(EQUAL_PHASES, 0.8 + 0.3j, np.array([1.3]))
        assert se.gamma_sym == 0.0
        assert mat[0, 1] == 0.0 and mat[1, 0] == 0.0

    def test_lambda_zero_diagonal_via_symbolic_substitution(self):
        # substitute lambda=0 into the entry definitions with sympy and
        # compare the resulting matrix against the numeric evaluation
        mu1, mu2, tau = sympy.symbols("mu1 mu2 tau", positive=True)
        w1 = sympy.sqrt(mu1) * tau    # omega_j at lambda=0
        w2 = sympy.sqrt(mu2) * tau
        alpha = sympy.sqrt(mu1) * w1 + sympy.sqrt(mu2) * w2
        beta = (mu1 + mu2) * tau
        gamma = (sympy.sqrt(mu2) * w2 - sympy.sqrt(mu1) * w1) - (mu2 - mu1) * tau
        delta = beta
        vals = {mu1: 3.0, mu2: 0.5, tau: 1.5}
        assert sympy.simplify(gamma) == 0
        a = float(alpha.subs(vals))
        b = float(beta.subs(vals))
        d = float(delta.subs(vals))
        expected = np.array([[a + b, 0.0], [0.0, a + d]])
        assert np.allclose(expected, 2.0 * (3.0 + 0.5) * 1.5 * np.eye(2))

        p = sy.FluidParams(rho1=2.0, rho2=0.7, mu1=3.0, mu2=0.5, sigma=1.0)
        mat, _ = sy.dn_matrix(p, 0.0, np.array([1.5]))
        assert np.allclose(mat, expected, rtol=1e-14, atol=1e-14)

    def test_lambda_zero_block_structure_2d(self):
        p = CONTRAST
        xi = np.array([0.6, 0.8])
        mat, se = sy.dn_matrix(p, 0.0, xi)
        smu = (p.mu1 + p.mu2) * 1.0
        zeta = xi / 1.0
        expected_tan = smu * (np.eye(2) + np.outer(zeta, zeta))
        assert np.allclose(mat[:2, :2], expected_tan, atol=1e-14)
        assert np.allclose(mat[:2, 2], 0.0) and np.allclose(mat[2, :2], 0.0)
        assert mat[2, 2] == pytest.approx(2.0 * smu)

    def test_hermitian_pattern_at_real_lambda(self):
        mat, se = sy.dn_matrix(CONTRAST, 0.7, np.array([0.5, -1.1]))
        n = 2
        assert np.max(np.abs(mat[:n, :n].imag)) == 0.0
        assert mat[n, n].imag == 0.0
        assert np.allclose(mat[:n, n], -np.conj(mat[n, :n]))
        assert np.allclose(mat[:n, :n], mat[:n, :n].T)

    def test_zero_mode_rejected(self):
        with pytest.raises(SingularModeError):
            sy.dn_matrix(EQUAL_PHASES, 1.0, np.array([0.0]))


class TestFactorization:
    def test_m_equals_alpha_beta_times_n(self, rng):
        lam, tau = random_admissible(rng, 10**4)
        se = sy.evaluate_symbols(CONTRAST, lam, tau)
        lhs = se.m_sym
        rhs = (se.alpha + se.beta) * se.n_sym
        rel = np.abs(lhs - rhs) / np.maximum(np.abs(lhs), np.abs(rhs))
        assert np.max(rel) < 1e-12


class TestDnInverse:
    def test_inverse_pair_1000_random_points(self, rng):
        p = CONTRAST
        for _ in range(1000):
            lam = complex(rng.uniform(1e-2, 5.0), rng.uniform(-5.0, 5.0))
            if lam.real <= 0:
                lam = -lam
            xi = np.array([rng.uniform(0.05, 5.0)])
            g_v = np.array([complex(*rng.uniform(-1, 1, 2))])
            g_w = complex(*rng.uniform(-1, 1, 2))
            v_b, w_b = sy.dn_inverse_apply(p, lam, xi, g_v, g_w)
            mat, _ = sy.dn_matrix(p, lam, xi)
            back = mat @ np.concatenate([v_b, [w_b]])
            want = np.concatenate([g_v, [g_w]])
            assert np.max(np.abs(back - want)) < 1e-10 * max(
                1.0, np.max(np.abs(want)))

    def test_equal_phase_reduction(self):
        lam, xi = 1.2 + 0.4j, np.array([0.9])
        g_w = 0.3 - 0.7j
        v_b, w_b = sy.dn_inverse_apply(EQUAL_PHASES, lam, xi,
                                       np.array([0.0j]), g_w)
        se = sy.evaluate_symbols(EQUAL_PHASES, lam, 0.9)
        assert abs(w_b - g_w / se.n_sym) < 1e-14 * abs(g_w / se.n_sym)

    def test_perpendicular_data_2d(self):
        # g_w = 0 and g_v orthogonal to zeta: w_b = 0, v_b = g_v / alpha
        p = CONTRAST
        lam = 0.8 + 0.1j
        xi = np.array([1.0, 0.0])
        g_v = np.array([0.0, 0.7 - 0.2j])
        v_b, w_b = sy.dn_inverse_apply(p, lam, xi, g_v, 0.0)
        se = sy.evaluate_symbols(p, lam, 1.0)
        assert abs(w_b) < 1e-15
        assert np.allclose(v_b, g_v / se.alpha, atol=1e-15)


class TestKernel:
    def test_k_at_zero(self):
        for p in (EQUAL_PHASES, CONTRAST):
            expected = 1.0 / (2.0 * (p.mu1 + p.mu2))
            assert abs(complex(sy.k_fn(p, 0.0)) - expected) < 1e-12 * expected

    def test_zk_limit_on_eight_rays(self):
        p = EQUAL_PHASES
        angles = np.linspace(-0.75 * np.pi, 0.75 * np.pi, 8)
        z = 1e8 * np.exp(1j * angles)
        zk = z * sy.k_fn(p, z)
        assert np.max(np.abs(zk - 0.5)) < 1e-3

    def test_sector_decay_bound(self):
        # calibrate |k(z)| <= C/(1+|z|) on |arg z| <= 3 pi/4 by scanning
        p = CONTRAST
        radii = np.geomspace(1e-6, 1e10, 200)
        angles = np.linspace(-0.75 * np.pi, 0.75 * np.pi, 33)
        z = radii[:, None] * np.exp(1j * angles)[None, :]
        c_emp = np.max(np.abs(sy.k_fn(p, z)) * (1.0 + np.abs(z)))
        assert np.isfinite(c_emp)
        # the constant is O(max(1/mu, 1/rho)-ish); just pin an upper bound
        assert c_emp < 1e3

    def test_branch_guard(self):
        with pytest.raises(BranchCutError):
            sy.k_fn(EQUAL_PHASES, -5.0)


class TestBoundarySymbol:
    def test_quasi_stationary_value(self):
        s = sy.boundary_symbol(EQUAL_PHASES, 0.0, 1.0)
        assert abs(s - 0.25) < 1e-14

    def test_equal_phase_quasi_stationary_rate(self):
        p = sy.FluidParams(rho1=1.0, rho2=1.0, mu1=2.5, mu2=2.5, sigma=1.0)
        for tau in (0.3, 1.0, 4.0):
            s = complex(sy.boundary_symbol(p, 0.0, tau))
            assert abs(s - p.sigma * tau / (4.0 * p.mu1)) < 1e-13 * abs(s)

    def test_two_route_agreement_1000_points(self, rng):
        lam, tau = random_admissible(rng, 1000)
        via_k = sy.boundary_symbol(CONTRAST, lam, tau)
        se = sy.evaluate_symbols(CONTRAST, lam, tau)
        via_n = lam + CONTRAST.sigma * tau * tau / se.n_sym
        rel = np.abs(via_k - via_n) / np.abs(via_n)
        assert np.max(rel) < 1e-12

    def test_zero_tau_rejected(self):
        with pytest.raises(SingularModeError):
            sy.boundary_symbol(EQUAL_PHASES, 1.0, 0.0)

    def test_gravity_sign_change_below_cutoff(self):
        # tau < sqrt(g*(rho2-rho1)/sigma) = 1: s(0) < 0 < s(large)
        p = RT_UNSTABLE
        tau = 0.5
        s0 = complex(sy.boundary_symbol(p, 0.0, tau))
        s_big = complex(sy.boundary_symbol(p, 1e4, tau))
        assert s0.real < 0.0 < s_big.real
        # bisection oracle: a positive real root exists
        a, b = 0.0, 1e4
        for _ in range(200):
            mid = 0.5 * (a + b)
            if complex(sy.boundary_symbol(p, mid, tau)).real < 0.0:
                a = mid
            else:
                b = mid
        root = 0.5 * (a + b)
        assert abs(complex(sy.boundary_symbol(p, root, tau))) < 1e-10


class TestSectorCertificate:
    @pytest.mark.parametrize("params", [
        EQUAL_PHASES,
        sy.FluidParams(rho1=1.0, rho2=1.0, mu1=0.1, mu2=10.0, sigma=1.0),
        sy.FluidParams(rho1=0.1, rho2=10.0, mu1=1.0, mu2=1.0, sigma=1.0),
    ])
    def test_stable_certificates_pass(self, params):
        cert = sy.certify_sector_bound(params, 0.1, 0.1, (32, 17, 32, 3))
        assert cert.passes and cert.c_min > 0.0
        assert cert.re_s_min > 0.0

    def test_budget_too_small_rejected(self):
        with pytest.raises(ValueError):
            sy.certify_sector_bound(EQUAL_PHASES, 0.1, 0.1, (8, 8, 8, 1))

    def test_gravity_unstable_certificate_fails(self):
        cert = sy.certify_sector_bound(RT_UNSTABLE, 0.1, 0.1, (32, 17, 32, 3))
        assert cert.unstable_roots
        assert not cert.passes
        assert cert.c_min < 1e-9

    def test_workers_agree_with_serial(self):
        c1 = sy.certify_sector_bound(CONTRAST, 0.1, 0.1, (32, 17, 32, 3))
        c4 = sy.certify_sector_bound(CONTRAST, 0.1, 0.1, (32, 17, 32, 3),
                                     workers=4)
        assert c1.c_min == c4.c_min


class TestDispersionRoot:
    def test_no_root_without_gravity(self):
        for tau in (0.1, 0.7, 2.0, 10.0):
            assert sy.dispersion_root(CONTRAST, tau) is None

    def test_neutral_cutoff_within_one_percent(self):
        # bisection on tau for the first disappearance of the root
        p = RT_UNSTABLE
        lo, hi = 0.5, 2.0
        assert sy.dispersion_root(p, lo) is not None
        assert sy.dispersion_root(p, hi) is None
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if sy.dispersion_root(p, mid) is None:
                hi = mid
            else:
                lo = mid
        tau_c = 0.5 * (lo + hi)
        expected = np.sqrt(p.gravity * p.jump_rho / p.sigma)
        assert abs(tau_c - expected) / expected < 0.01

    def test_beyond_cutoff_stable(self):
        assert sy.dispersion_root(RT_UNSTABLE, 2.0) is None

    def test_root_is_a_zero(self):
        root = sy.dispersion_root(RT_UNSTABLE, 0.5)
        s = complex(sy.boundary_symbol(RT_UNSTABLE, root, 0.5))
        assert abs(s) < 1e-9
