import math

import numpy as np
import pytest

from mvdrift.grids import GridFunction
from mvdrift.invariant import (alpha_oracle, log_density_derivative, psi_oracle,
                               sample_from_density, solve_invariant_full)
from mvdrift.kde import EstimatorConfig
from mvdrift.model import BetaSpec, DriftSpec, ModelShape
from mvdrift.pipeline import (ContrastSystem, contrast_matrix, deconvolve,
                              empirical_cf, empirical_moments, fit_alpha,
                              oracle_estimator_config, parametric_log_derivative,
                              psi_estimate, run_pipeline, weight_function)


@pytest.fixture(scope="module")
def grid():
    return GridFunction(8.0, np.zeros(4097))


class TestWeightFunction:
    def test_indicator_mass(self):
        w = weight_function("indicator", 0.25)
        v = np.linspace(0, 1, 100_001)
        assert np.trapezoid(w(v), v) == pytest.approx(0.75, abs=1e-4)

    def test_support(self):
        for kind in ("indicator", "smooth-bump"):
            w = weight_function(kind, 0.25)
            assert w(0.2) == 0.0 and w(1.1) == 0.0 and w(-0.5) == 0.0

    def test_bump_below_indicator_with_unit_peak(self):
        w = weight_function("smooth-bump", 0.25)
        v = np.linspace(0, 1, 100_001)
        vals = w(v)
        assert np.max(vals) == pytest.approx(1.0, abs=1e-6)
        mass = np.trapezoid(vals, v)
        assert 0.0 < mass < 0.75

    def test_bad_epsilon(self):
        with pytest.raises(ValueError):
            weight_function("indicator", 1.5)


class TestContrastMatrix:
    def test_closed_form_single_term(self):
        shape = ModelShape(j1=1, j=1, theta=[])
        cs = contrast_matrix(shape, 3.0, weight_function("indicator", 0.25))
        assert cs.q[0, 0] == pytest.approx(4 * (1 - 0.25**3) / 3, abs=1e-10)

    @pytest.mark.parametrize("theta_u", [1.0, 5.0, 20.0])
    def test_positive_definite_with_trig(self, theta_u):
        shape = ModelShape(j1=1, j=2, theta=[theta_u])
        cs = contrast_matrix(shape, 1.0, weight_function("indicator", 0.25))
        np.testing.assert_allclose(cs.q, cs.q.T, atol=1e-14)
        assert np.min(np.linalg.eigvalsh(cs.q)) > 0

    def test_linear_in_weight(self):
        shape = ModelShape(j1=1, j=1, theta=[])
        w = weight_function("indicator", 0.25)

        class Doubled:
            kind, epsilon = "indicator", 0.25

            def __call__(self, v):
                return 2.0 * w(v)

        q1 = contrast_matrix(shape, 2.0, w).q
        q2 = contrast_matrix(shape, 2.0, Doubled()).q
        np.testing.assert_allclose(q2, 2 * q1, rtol=1e-10)


class TestFitAlpha:
    def test_exact_recovery_in_span(self, grid):
        shape = ModelShape(j1=2, j=3, theta=[1.3])
        alpha_true = np.array([0.5, 0.1, -0.2])
        l_hat = grid.with_values(parametric_log_derivative(shape, alpha_true, grid.x))
        w = weight_function("indicator", 0.25)
        alpha = fit_alpha(l_hat, 3.0, w, shape)
        np.testing.assert_allclose(alpha, alpha_true, atol=1e-8)

    def test_gaussian_oracle_log_slope(self, quad_spec, quad_solution):
        l_hat = log_density_derivative(quad_solution.pi)
        alpha = fit_alpha(l_hat, 3.0, weight_function("indicator", 0.25),
                          quad_spec.shape)
        assert alpha[0] == pytest.approx(0.5, abs=1e-6)

    def test_invariant_to_weight_rescaling(self, quad_solution, quad_spec):
        l_hat = log_density_derivative(quad_solution.pi)
        w = weight_function("indicator", 0.25)

        class Scaled:
            kind, epsilon = "indicator", 0.25

            def __call__(self, v):
                return 7.0 * w(v)

        a1 = fit_alpha(l_hat, 3.0, w, quad_spec.shape)
        a2 = fit_alpha(l_hat, 3.0, Scaled(), quad_spec.shape)
        np.testing.assert_allclose(a1, a2, atol=1e-10)

    def test_interaction_tail_bias_shrinks_with_window(self, beta1_spec):
        sol = solve_invariant_full(beta1_spec, half_width=10.0)
        l_hat = log_density_derivative(sol.pi)
        alpha_true = alpha_oracle(beta1_spec, sol.pi).alpha
        w = weight_function("indicator", 0.25)
        bias3 = abs(fit_alpha(l_hat, 3.0, w, beta1_spec.shape)[0] - alpha_true[0])
        bias5 = abs(fit_alpha(l_hat, 5.0, w, beta1_spec.shape)[0] - alpha_true[0])
        assert bias5 < bias3

    def test_symmetric_window_option(self, grid):
        shape = ModelShape(j1=1, j=1, theta=[])
        l_hat = grid.with_values(parametric_log_derivative(shape, [0.7], grid.x))
        w = weight_function("indicator", 0.25)
        one = fit_alpha(l_hat, 3.0, w, shape, symmetric_window=False)
        two = fit_alpha(l_hat, 3.0, w, shape, symmetric_window=True)
        np.testing.assert_allclose(one, two, atol=1e-10)

    def test_window_must_be_covered(self, quad_solution):
        l_hat = log_density_derivative(quad_solution.pi)
        with pytest.raises(ValueError):
            fit_alpha(l_hat, 50.0, weight_function("indicator", 0.25),
                      ModelShape(j1=1, j=1, theta=[]))


class TestEmpiricalStatistics:
    def test_moments_sign_pair(self):
        m = empirical_moments(np.array([1.0, -1.0]), 2)
        np.testing.assert_allclose(m, [1.0, 0.0, 1.0])

    def test_moments_single_point(self):
        m = empirical_moments(np.array([2.0]), 4)
        np.testing.assert_allclose(m, [1.0, 2.0, 4.0, 8.0, 16.0])

    def test_moments_match_population(self, quad_solution, rng):
        s = sample_from_density(quad_solution.pi, 100_000, rng)
        m = empirical_moments(s, 2)
        assert abs(m[2] - 1.0) < 0.02

    def test_cf_sign_pair_is_cosine(self):
        z = np.linspace(-3, 3, 11)
        vals = empirical_cf(np.array([1.0, -1.0]), z)
        np.testing.assert_allclose(vals, np.cos(z), atol=1e-14)

    def test_cf_at_zero_and_bounded(self, rng):
        s = rng.standard_normal(1000)
        assert empirical_cf(s, 0.0) == pytest.approx(1.0)
        z = rng.uniform(-20, 20, 50)
        assert np.all(np.abs(empirical_cf(s, z)) <= 1.0 + 1e-12)


class TestPsiEstimate:
    def test_zero_for_exact_parametric_fit(self, grid):
        shape = ModelShape(j1=1, j=1, theta=[])
        alpha = np.array([0.5])
        l_hat = grid.with_values(parametric_log_derivative(shape, alpha, grid.x))
        psi = psi_estimate(l_hat, alpha, shape, epsilon=0.25, u=3.0)
        assert np.all(psi.values == 0.0)

    def test_support_window(self, grid, rng):
        shape = ModelShape(j1=1, j=1, theta=[])
        l_hat = grid.with_values(rng.standard_normal(grid.n_points))
        psi = psi_estimate(l_hat, np.array([0.4]), shape, epsilon=0.25, u=3.0)
        outside = np.abs(grid.x) > 0.75
        assert np.all(psi.values[outside] == 0.0)
        assert np.any(psi.values[~outside] != 0.0)

    def test_recovers_interaction_term_inside_window(self, beta1_spec):
        sol = solve_invariant_full(beta1_spec, half_width=64.0, n_points=4097)
        psi_true = psi_oracle(beta1_spec, sol.pi)
        alpha = alpha_oracle(beta1_spec, sol.pi).alpha
        shape = beta1_spec.shape
        # oracle-exact inputs via the identity between l, its parametric
        # part and the interaction term
        l_exact = sol.pi.with_values(
            parametric_log_derivative(shape, alpha, sol.pi.x) + psi_true.values)
        psi_hat = psi_estimate(l_exact, alpha, shape, epsilon=0.9, u=60.0)
        err = math.sqrt(np.trapezoid((psi_hat.values - psi_true.values) ** 2, sol.pi.x))
        assert err < 1e-3


class TestDeconvolve:
    def test_zero_input_gives_zero(self, grid):
        psi = grid.with_values(np.zeros(grid.n_points))
        res = deconvolve(psi, lambda z: np.exp(-0.5 * np.asarray(z) ** 2),
                         omega=1e-6, z_max=4.0)
        assert not res.degenerate
        assert np.all(res.beta_prime.values == 0.0)

    def test_threshold_above_cf_degenerates(self, grid, rng):
        psi = grid.with_values(rng.standard_normal(grid.n_points) * 0.01)
        res = deconvolve(psi, lambda z: np.full(np.shape(z), 1e-8 + 0j),
                         omega=0.99, z_max=4.0)
        assert res.degenerate
        assert res.surviving_fraction == 0.0
        assert np.all(res.beta_prime.values == 0.0)

    def test_oracle_roundtrip(self, beta1_spec):
        g = GridFunction(192.0, np.zeros(4097))
        pi = g.with_values(np.exp(-0.5 * g.x**2) / math.sqrt(2 * math.pi))
        psi = psi_oracle(beta1_spec, pi)
        res = deconvolve(psi, lambda z: np.exp(-0.5 * np.asarray(z) ** 2),
                         omega=1e-6, z_max=8.0)
        true = beta1_spec.beta.deriv(g.x)
        err = math.sqrt(np.trapezoid((res.beta_prime.values - true) ** 2, g.x))
        assert err < 1e-3

    def test_odd_after_symmetrization(self, beta1_spec):
        g = GridFunction(96.0, np.zeros(4097))
        pi = g.with_values(np.exp(-0.5 * g.x**2) / math.sqrt(2 * math.pi))
        psi = psi_oracle(beta1_spec, pi)
        res = deconvolve(psi, lambda z: np.exp(-0.5 * np.asarray(z) ** 2),
                         omega=1e-6, z_max=8.0)
        v = res.beta_prime.values
        even_part = 0.5 * (v + v[::-1])
        assert np.max(np.abs(even_part)) < 1e-8

    def test_parseval_consistency(self, beta1_spec):
        g = GridFunction(96.0, np.zeros(4097))
        pi = g.with_values(np.exp(-0.5 * g.x**2) / math.sqrt(2 * math.pi))
        psi = psi_oracle(beta1_spec, pi)
        res = deconvolve(psi, lambda z: np.exp(-0.5 * np.asarray(z) ** 2),
                         omega=1e-6, z_max=8.0)
        space = np.trapezoid(res.beta_prime.values ** 2, g.x)
        freq = np.trapezoid(np.abs(res.f_beta_prime) ** 2, res.freq) / (2 * math.pi)
        assert space == pytest.approx(freq, abs=1e-6)

    def test_rejects_bad_omega(self, grid):
        psi = grid.with_values(np.zeros(grid.n_points))
        with pytest.raises(ValueError):
            deconvolve(psi, lambda z: np.ones(np.shape(z)), omega=2.0, z_max=4.0)


class TestRunPipeline:
    def test_deterministic(self, quad_spec, quad_solution, rng):
        cfg = oracle_estimator_config(quad_spec, quad_solution, n_eff=2000.0)
        samples = sample_from_density(quad_solution.pi, 2000, rng)
        r1 = run_pipeline(samples, cfg, quad_spec.shape)
        r2 = run_pipeline(samples, cfg, quad_spec.shape)
        assert np.array_equal(r1.a_hat, r2.a_hat)
        assert np.array_equal(r1.beta_prime_hat.values, r2.beta_prime_hat.values)
        assert r1.diagnostics == r2.diagnostics

    def test_recovers_quadratic_coefficient(self, quad_spec, quad_solution):
        rng = np.random.default_rng(99)
        samples = sample_from_density(quad_solution.pi, 20_000, rng)
        cfg = oracle_estimator_config(quad_spec, quad_solution, n_eff=20_000.0)
        res = run_pipeline(samples, cfg, quad_spec.shape)
        assert res.a_hat[0] == pytest.approx(0.5, abs=0.1)
        assert res.diagnostics["surviving_fraction"] > 0

    def test_trig_coefficients_recovered_loosely(self):
        spec = DriftSpec(j1=1, j=2, a=[1.0, 0.3], theta=[1.2], beta=BetaSpec.zero())
        sol = solve_invariant_full(spec)
        rng = np.random.default_rng(5)
        samples = sample_from_density(sol.pi, 50_000, rng)
        cfg = oracle_estimator_config(spec, sol, n_eff=50_000.0)
        res = run_pipeline(samples, cfg, spec.shape)
        assert res.a_hat[0] == pytest.approx(1.0, abs=0.25)
        assert res.a_hat[1] == pytest.approx(0.3, abs=0.25)

    def test_result_files(self, tmp_path, quad_spec, quad_solution, rng):
        samples = sample_from_density(quad_solution.pi, 1000, rng)
        cfg = oracle_estimator_config(quad_spec, quad_solution, n_eff=1000.0)
        res = run_pipeline(samples, cfg, quad_spec.shape)
        res.save(tmp_path / "out")
        for name in ("alpha.csv", "a.csv", "psi.csv", "beta_prime.csv",
                     "diagnostics.txt"):
            assert (tmp_path / "out" / name).exists()

    def test_oracle_config_values(self, quad_spec, quad_solution):
        cfg = oracle_estimator_config(quad_spec, quad_solution, n_eff=1e4, m=2)
        assert cfg.h0 == pytest.approx(1e4 ** (-1 / 6))
        assert cfg.h1 == pytest.approx(1e4 ** (-1 / 8))
        assert cfg.omega == pytest.approx(0.1)
        # window from the half-cap logarithmic rule with abar1 = 1/2
        assert cfg.u == pytest.approx(math.sqrt(0.25 * math.log(1e4)), rel=1e-6)
