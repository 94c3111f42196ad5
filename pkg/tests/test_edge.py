import numpy as np
import pytest
from scipy.optimize import brentq

from ridgeroot.edge import (
    estimate_edge_params,
    estimate_rho,
    oracle_edge_params,
    solve_beta_theta,
    solve_s_init,
    solve_s_ode,
)
from ridgeroot.exceptions import BetaOutOfRangeError, InputError
from ridgeroot.spectrum_fit import DiscreteMeasure, h_funcs

from test_spectrum_fit import one_mass, three_mass_measure


class TestRho:
    def test_discrete_edge_branch(self):
        rho, discrete = estimate_rho(one_mass(), 1.0, gamma2=2.0)
        assert discrete
        assert rho == pytest.approx(1.0)

    def test_single_atom_closed_form(self):
        # gamma2/(lam - h + gamma2)^2 = 1 gives rho = lam + (1 - sqrt(g2))^2.
        rho, discrete = estimate_rho(one_mass(), 1.0, gamma2=0.25)
        assert not discrete
        assert rho == pytest.approx(1.25, abs=1e-10)

    def test_vanishing_ridge_recovers_mp_lower_edge(self):
        rho, _ = estimate_rho(one_mass(), 1e-8, gamma2=0.25)
        assert rho == pytest.approx((1 - 0.5) ** 2, abs=1e-4)

    def test_continuous_edge_exceeds_pole(self):
        m = three_mass_measure()
        lam = 1.0
        rho, discrete = estimate_rho(m, lam, gamma2=0.5)
        assert not discrete
        assert rho > lam / m.sigma_max


class TestSInit:
    def test_golden_ratio_case(self):
        # H_1(-1/(1+s)) = s with one unit mass at lam = 1: s^2 + s - 1 = 0.
        s0 = solve_s_init(one_mass(), 1.0, gamma2=1.0)
        assert s0 == pytest.approx((np.sqrt(5.0) - 1.0) / 2.0, abs=1e-12)

    def test_hint_does_not_change_root(self):
        m = three_mass_measure()
        a = solve_s_init(m, 1.0, 0.5)
        b = solve_s_init(m, 1.0, 0.5, s0_hint=a * 3.0)
        assert a == pytest.approx(b, abs=1e-12)


def _table(measure, lam=1.0, gamma2=0.5, steps=2000, margin_frac=1e-2):
    rho, _ = estimate_rho(measure, lam, gamma2)
    return solve_s_ode(measure, lam, gamma2, rho, margin=margin_frac * rho, steps=steps)


class TestOde:
    def test_finite_difference_consistency(self):
        # s'' has a stronger edge singularity than s', so its finite
        # difference check needs a slightly wider margin at equal steps.
        t = _table(three_mass_measure(), margin_frac=2e-2)
        h = t.xs[1] - t.xs[0]
        fd_s1 = (t.s[2:] - t.s[:-2]) / (2 * h)
        rel = np.abs(fd_s1 - t.s1[1:-1]) / t.s1[1:-1]
        assert rel.max() < 1e-3
        fd_s2 = (t.s1[2:] - t.s1[:-2]) / (2 * h)
        rel2 = np.abs(fd_s2 - t.s2[1:-1]) / t.s2[1:-1]
        assert rel2.max() < 1e-3

    def test_monotone_positive_functions(self):
        t = _table(three_mass_measure(), lam=0.7, gamma2=1.5)
        for arr in (t.s, t.s1, t.s2):
            assert np.all(arr > 0)
            assert np.all(np.diff(arr) > 0)

    def test_s0_matches_mp_fixed_point(self):
        # Independent oracle for the generalized MP equation at z -> 0+:
        # phi = sum w tau / (tau [ (1+g2 phi)^{-1} - z ] + lam), damped
        # fixed point at z = i*eta with eta -> 0.
        m = three_mass_measure()
        lam, gamma2 = 1.0, 0.5
        t = _table(m, lam, gamma2)

        def mp_value(eta):
            z = 1j * eta
            phi = complex(t.s[0])  # any reasonable start
            for _ in range(50000):
                denom = m.masses * (1.0 / (1.0 + gamma2 * phi) - z) + lam
                new = np.sum(m.weights * m.masses / denom)
                if abs(new - phi) < 1e-14:
                    phi = new
                    break
                phi = 0.5 * phi + 0.5 * new
            return phi.real

        extrapolated = 2 * mp_value(1e-6) - mp_value(2e-6)
        assert t.s[0] == pytest.approx(extrapolated, abs=1e-3)

    def test_branch_condition_along_table(self):
        # Smaller-root selection: x'(h) > 0 at h = g(x) for every table node.
        m = three_mass_measure()
        lam, gamma2 = 1.0, 0.5
        t = _table(m, lam, gamma2)
        for x, s in zip(t.xs[::100], t.s[::100]):
            g = x - 1.0 / (1.0 + gamma2 * s)
            h1 = h_funcs(m, lam, g, 1)
            h2 = h_funcs(m, lam, g, 2)
            assert 1.0 - gamma2 * h2 / (1.0 + gamma2 * h1) ** 2 > 0.0

    def test_table_matches_theorem2_inversion(self):
        # Independent route: solve x = h + [1 + g2 H1(h)]^{-1} for the smaller
        # root with brentq, then s = (1/g2)(1/(x - h) - 1).
        m = three_mass_measure()
        lam, gamma2 = 1.0, 0.5
        t = _table(m, lam, gamma2)

        def x_of_h(h):
            return h + 1.0 / (1.0 + gamma2 * h_funcs(m, lam, h, 1))

        def xprime(h):
            h1 = h_funcs(m, lam, h, 1)
            h2 = h_funcs(m, lam, h, 2)
            return 1.0 - gamma2 * h2 / (1.0 + gamma2 * h1) ** 2

        h_sup = lam / m.sigma_max
        h_peak = brentq(xprime, h_sup - 20.0, h_sup - 1e-12, xtol=1e-14)
        for idx in [0, len(t.xs) // 3, 2 * len(t.xs) // 3, len(t.xs) - 1]:
            x0 = t.xs[idx]
            h0 = brentq(lambda h: x_of_h(h) - x0, h_peak - 50.0, h_peak, xtol=1e-14)
            s_ref = (1.0 / (x0 - h0) - 1.0) / gamma2
            assert t.s[idx] == pytest.approx(s_ref, rel=1e-6, abs=1e-8)


class TestBetaTheta:
    def test_exact_node_crossing(self):
        t = _table(three_mass_measure())
        idx = len(t.xs) // 2
        gamma1 = 1.0 / (t.xs[idx] ** 2 * t.s1[idx])
        params = solve_beta_theta(t, gamma1, t.rho, t.lam)
        assert params.beta == pytest.approx(t.xs[idx], abs=1e-12)
        assert params.theta2 > 0

    def test_beta_out_of_range_reports_achieved(self):
        t = _table(three_mass_measure())
        tiny_gamma1 = 1e-9  # crossing far beyond the table
        with pytest.raises(BetaOutOfRangeError) as err:
            solve_beta_theta(t, tiny_gamma1, t.rho, t.lam)
        assert err.value.achieved_range[1] > 0

    def test_beta_residual_at_solver_tolerance(self):
        t = _table(three_mass_measure(), gamma2=0.8)
        params = solve_beta_theta(t, 0.9, t.rho, t.lam)
        assert params.beta**2 * params.s1_at_beta * 0.9 == pytest.approx(1.0, abs=1e-8)


class TestOracle:
    def test_identity_covariance_runs_full_chain(self):
        params = oracle_edge_params(np.ones(50), 1.0, gamma1=0.5, gamma2=0.25)
        assert params.rho == pytest.approx(1.25, abs=1e-10)
        assert 0 < params.beta < params.rho
        assert params.theta2 > 0

    def test_oracle_measure_in_estimator_path_is_identity(self):
        # Feeding the exact measure through the estimation chain reproduces
        # the oracle values exactly (same code path, no LP in between).
        eigs = np.concatenate([np.full(10, 2.5), np.full(30, 1.0), np.full(20, 0.4)])
        eigs = eigs * (eigs.size / eigs.sum())
        oracle = oracle_edge_params(eigs, 0.8, gamma1=0.75, gamma2=0.5)
        measure = DiscreteMeasure.from_eigenvalues(eigs)
        params, _ = estimate_edge_params(measure, 0.8, gamma1=0.75, gamma2=0.5)
        assert params.theta1 == pytest.approx(oracle.theta1, abs=1e-12)
        assert params.theta2 == pytest.approx(oracle.theta2, abs=1e-12)
        assert params.beta == pytest.approx(oracle.beta, abs=1e-12)

    def test_margin_halving_recovers_near_edge_beta(self):
        # Start with a margin too wide to bracket beta; it must halve until
        # the crossing is reached.
        m = one_mass()
        params, table = estimate_edge_params(
            m, 1.0, gamma1=0.5, gamma2=0.25, margin_frac=0.3
        )
        reference, _ = estimate_edge_params(m, 1.0, gamma1=0.5, gamma2=0.25)
        assert table.margin < 0.3 * params.rho
        assert params.beta == pytest.approx(reference.beta, rel=1e-6)

    def test_rejects_invalid_margin(self):
        m = one_mass()
        rho, _ = estimate_rho(m, 1.0, 0.25)
        with pytest.raises(InputError):
            solve_s_ode(m, 1.0, 0.25, rho, margin=2 * rho)
