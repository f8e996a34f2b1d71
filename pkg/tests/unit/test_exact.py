import unittest
from unittest.mock import patch

import numpy as np

from pyqebd.core.errors import DimensionError, DomainError, EnumerationLimitError
from pyqebd.core import exact
from pyqebd.core.exact import (
    ConfigTable,
    c_matrix,
    conditional_probability,
    config_index,
    enumerate_configs,
    exact_moments,
    exact_sampler,
    expected_estimating_function,
    gibbs_sample_clusters,
    gibbs_sampler,
    log_likelihood,
    log_normalizer,
    make_rng,
    mle_fit,
    pmf,
    sufficient_statistics,
)
from pyqebd.core.model import QebdParams, WorkingCorrelation, expit, n_pairs
from tests.util import naive_pmf, random_params, qebd5_params


class EnumerationTestCase(unittest.TestCase):
    def test_binary_counter_order(self):
        configs = enumerate_configs(3)
        np.testing.assert_array_equal(configs[1], [1, 0, 0])
        np.testing.assert_array_equal(configs[6], [0, 1, 1])
        np.testing.assert_array_equal(config_index(configs), np.arange(8))

    def test_sufficient_statistics(self):
        s = sufficient_statistics([[1, 1, 0]])
        np.testing.assert_array_equal(s, [[1, 1, 0, 1, 0, 0]])

    def test_cap_refuses_before_enumerating(self):
        with self.assertRaises(EnumerationLimitError) as ctx:
            log_normalizer(QebdParams.zeros(21))
        self.assertIn("Gibbs", ctx.exception.error)
        self.assertEqual(ctx.exception.m, 21)


class PmfTestCase(unittest.TestCase):
    def test_independence_normalizer(self):
        self.assertAlmostEqual(log_normalizer(QebdParams.zeros(5)), 5 * np.log(2), places=12)

    def test_pmf_sums_to_one(self):
        for m in range(1, 9):
            for seed in range(5):
                params = random_params(m, seed)
                total = pmf(enumerate_configs(m), params).sum()
                self.assertAlmostEqual(total, 1.0, places=12)

    def test_pmf_matches_naive_enumeration(self):
        params = random_params(4, 11)
        for y in ([0, 0, 0, 0], [1, 0, 1, 1], [1, 1, 1, 1]):
            self.assertAlmostEqual(pmf(y, params), naive_pmf(y, params), places=12)

    def test_large_parameters_stay_finite(self):
        params = QebdParams(beta=[400.0, 400.0], theta=[300.0])
        self.assertTrue(np.isfinite(log_normalizer(params)))
        self.assertAlmostEqual(pmf([1, 1], params), 1.0, places=12)

    def test_non_binary_configuration(self):
        with self.assertRaises(DomainError):
            pmf([0, 2], QebdParams.zeros(2))
        with self.assertRaises(DimensionError):
            pmf([0, 1, 1], QebdParams.zeros(2))

    def test_conditional_matches_joint_ratio(self):
        params = random_params(5, 3)
        rng = make_rng(0)
        for _ in range(20):
            y = rng.integers(0, 2, 5)
            j = int(rng.integers(0, 5))
            y1, y0 = y.copy(), y.copy()
            y1[j], y0[j] = 1, 0
            ratio = pmf(y1, params) / (pmf(y1, params) + pmf(y0, params))
            self.assertAlmostEqual(conditional_probability(params, j, y), ratio, places=10)
            eta = params.beta[j] + params.Theta[j] @ y0
            self.assertAlmostEqual(conditional_probability(params, j, y), expit(eta), places=10)

    def test_gradient_of_normalizer_is_mean_statistic(self):
        params = random_params(4, 7)
        table = ConfigTable.build(params)
        expected = table.probabilities @ sufficient_statistics(table.configs)
        h = 1e-6
        for i in range(params.vector.size):
            up, down = params.vector.copy(), params.vector.copy()
            up[i] += h
            down[i] -= h
            numeric = (
                log_normalizer(QebdParams.from_vector(up, 4))
                - log_normalizer(QebdParams.from_vector(down, 4))
            ) / (2 * h)
            self.assertLess(abs(numeric - expected[i]) / max(abs(expected[i]), 1e-8), 1e-5)

    def test_moments_under_independence(self):
        params = QebdParams(beta=[0.0, np.log(3.0)], theta=[0.0])
        moments = exact_moments(params)
        np.testing.assert_allclose(moments.mean, [0.5, 0.75])
        self.assertAlmostEqual(moments.cov[0, 1], 0.0, places=12)


class SamplerTestCase(unittest.TestCase):
    def test_exact_sampler_frequencies(self):
        params = random_params(3, 5)
        n = 40000
        panel = exact_sampler(params, n, seed=1)
        counts = np.bincount(config_index(panel.y), minlength=8)
        probs = pmf(enumerate_configs(3), params)
        sd = np.sqrt(n * probs * (1 - probs))
        self.assertTrue(np.all(np.abs(counts - n * probs) < 4.5 * sd + 1))

    def test_seed_determinism(self):
        params = random_params(4, 2)
        a = exact_sampler(params, 50, seed=9)
        b = exact_sampler(params, 50, seed=9)
        np.testing.assert_array_equal(a.y, b.y)

    def test_gibbs_agrees_with_exact(self):
        params = qebd5_params()
        n = 20000
        gibbs = gibbs_sampler(params, n, burn_in=200, thin=5, seed=4)
        exact = exact_moments(params)
        sd = np.sqrt(exact.mean * (1 - exact.mean) / n)
        # chains are autocorrelated, so allow more than the i.i.d. spread
        self.assertTrue(np.all(np.abs(gibbs.y.mean(axis=0) - exact.mean) < 8 * sd))

    def test_gibbs_has_no_cap(self):
        panel = gibbs_sampler(QebdParams.zeros(25), 7, burn_in=3, thin=1, seed=0)
        self.assertEqual((panel.n, panel.m), (7, 25))

    def test_gibbs_rejects_bad_thin(self):
        with self.assertRaises(ValueError):
            gibbs_sampler(QebdParams.zeros(3), 5, thin=0)

    def test_cluster_sampler_shape_check(self):
        with self.assertRaises(DimensionError):
            gibbs_sample_clusters(np.zeros((4, 3)), np.zeros((2, 2)), 1, 1, make_rng(0))


class MleTestCase(unittest.TestCase):
    def test_recovers_truth(self):
        truth = QebdParams(beta=[-0.5, 0.3, 0.0], theta=[0.8, 0.0, -0.6])
        panel = exact_sampler(truth, 20000, seed=3)
        fit = mle_fit(panel)
        self.assertTrue(fit.converged)
        self.assertFalse(fit.diverged)
        z = (fit.estimates.vector - truth.vector) / fit.standard_errors
        self.assertTrue(np.all(np.abs(z) < 4.5))
        np.testing.assert_allclose(fit.covariance, fit.covariance.T)
        self.assertEqual(fit.names[3], "y1:y2")

    def test_score_vanishes_at_optimum(self):
        panel = exact_sampler(random_params(4, 1), 500, seed=2)
        fit = mle_fit(panel)
        self.assertLess(np.max(np.abs(fit.score)), 1e-6)
        self.assertAlmostEqual(fit.loglik, log_likelihood(fit.estimates, panel), places=6)

    def test_non_convergence_warns(self):
        panel = exact_sampler(random_params(3, 1), 300, seed=2)
        with self.assertWarns(UserWarning):
            fit = mle_fit(panel, max_iter=1)
        self.assertFalse(fit.converged)

    def test_failed_step_halving_keeps_previous_iterate(self):
        panel = exact_sampler(random_params(3, 1), 300, seed=2)
        init = QebdParams(beta=[0.1, -0.2, 0.0], theta=[0.0, 0.0, 0.0])
        real = exact._statistic_moments
        calls = []

        def worse(params, cap):
            first, cov, lam = real(params, cap)
            calls.append(params)
            return first, cov, lam if len(calls) == 1 else lam + 1e6

        moments = patch.object(exact, "_statistic_moments", side_effect=worse)
        with moments:
            with self.assertWarns(UserWarning):
                fit = mle_fit(panel, init=init)
        self.assertEqual(len(calls), 31)
        np.testing.assert_array_equal(fit.estimates.vector, init.vector)
        self.assertFalse(fit.converged)
        self.assertFalse(fit.diverged)
        self.assertEqual(fit.iterations, 1)
        self.assertTrue(np.all(np.isfinite(fit.covariance)))

    def test_summary_has_p_values(self):
        panel = exact_sampler(random_params(3, 1), 300, seed=2)
        summary = mle_fit(panel).summary()
        self.assertEqual(list(summary.columns), ["estimate", "se", "z", "p_value"])
        self.assertTrue(((summary["p_value"] >= 0) & (summary["p_value"] <= 1)).all())


class EstimatingFunctionTestCase(unittest.TestCase):
    def test_independence_is_unbiased(self):
        for seed in range(3):
            params = random_params(4, seed)
            value = expected_estimating_function(params, WorkingCorrelation("independence"))
            self.assertEqual(value.size, 4 + n_pairs(4))
            self.assertLess(np.max(np.abs(value)), 1e-12)

    def test_exchangeable_interaction_block_is_biased(self):
        params = qebd5_params()
        for corr in (WorkingCorrelation("exchangeable"), WorkingCorrelation("ar1")):
            value = expected_estimating_function(params, corr, rho=0.3)
            self.assertGreater(np.max(np.abs(value[params.m :])), 1e-4)

    def test_main_effect_block_unbiased_without_interactions(self):
        params = QebdParams(beta=[0.2, -0.4, 0.9], theta=[0.0, 0.0, 0.0])
        value = expected_estimating_function(params, "exchangeable", rho=0.4)
        self.assertLess(np.max(np.abs(value[:3])), 1e-12)

    def test_c_matrix_zero_row_and_column(self):
        params = qebd5_params()
        for j in range(params.m):
            C = c_matrix(params, j)
            np.testing.assert_allclose(C[j, :], 0.0, atol=1e-12)
            np.testing.assert_allclose(C[:, j], 0.0, atol=1e-12)
        self.assertGreater(np.max(np.abs(c_matrix(params, 0))), 1e-4)
