#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import math
import unittest
import numpy as np
import pytest
from autocal_tools.exceptions import UsageError, SingularFitError, DegenerateError
from autocal_tools.learners import (
    FeatureBasis, BasisSpec, identity_basis, true_mean_basis, default_gam_basis, design_matrix,
    fit_glm, fit_glm_dataset, predict_glm, GlmFit, fit_boost, predict_boost, DEVIANCE_FLOOR,
)
from autocal_tools.simdata import SimConfig, simulate, mean_univariate


class TestDesignMatrix(unittest.TestCase):
    def setUp(self):
        self.x = np.array([0.0, 2.0, 5.0, 7.0, 10.0])

    def test_identity(self):
        X = design_matrix(self.x, identity_basis(1))
        np.testing.assert_array_equal(X, np.column_stack([np.ones(5), self.x]))

    def test_linear_spline(self):
        X = design_matrix(self.x, true_mean_basis())
        np.testing.assert_array_equal(X, np.column_stack([np.ones(5), self.x, np.maximum(self.x - 5, 0)]))

    def test_polynomial(self):
        basis = BasisSpec(features=(FeatureBasis(kind="polynomial", degree=2),))
        X = design_matrix(self.x, basis)
        np.testing.assert_array_equal(X, np.column_stack([np.ones(5), self.x, self.x ** 2]))

    def test_interaction(self):
        basis = BasisSpec(features=(FeatureBasis(), FeatureBasis()), interaction=True)
        features = np.column_stack([self.x, 2 * self.x])
        X = design_matrix(features, basis)
        np.testing.assert_array_equal(X[:, 3], 2 * self.x ** 2)

    def test_knot_outside_range(self):
        basis = BasisSpec(features=(FeatureBasis(kind="spline", degree=1, knots=(12.0,)),))
        with self.assertRaises(UsageError):
            design_matrix(self.x, basis)
        # prediction skips the range check
        self.assertEqual(design_matrix(self.x, basis, check_knots=False).shape, (5, 3))

    def test_invalid_specs(self):
        with self.assertRaises(UsageError):
            FeatureBasis(kind="spline", degree=4)
        with self.assertRaises(UsageError):
            FeatureBasis(kind="spline", degree=1, knots=(3.0, 2.0))
        with self.assertRaises(UsageError):
            design_matrix(np.zeros((3, 2)), identity_basis(1))

    def test_default_gam_basis(self):
        basis = default_gam_basis(self.x)
        spec = basis.features[0]
        self.assertEqual(spec.degree, 3)
        np.testing.assert_allclose(spec.knots, [10 / 6 * k for k in range(1, 6)])
        self.assertEqual(design_matrix(self.x, basis).shape, (5, 1 + 3 + 5))

    def test_basis_round_trip(self):
        basis = default_gam_basis(self.x)
        self.assertEqual(BasisSpec.from_dict(basis.to_dict()), basis)


class TestFitGlm(unittest.TestCase):
    def test_intercept_only(self):
        fit = fit_glm([1.0, 2.0, 3.0], [1.0, 1.0, 1.0], np.ones((3, 1)), tol=1e-12)
        self.assertTrue(fit.converged)
        self.assertAlmostEqual(fit.coefficients[0], math.log(2), places=10)
        np.testing.assert_allclose(predict_glm(fit, np.ones((4, 1))), 2.0, rtol=1e-10)

    def test_intercept_only_with_exposure(self):
        fit = fit_glm([2.0], [4.0], np.ones((1, 1)), tol=1e-12)
        self.assertAlmostEqual(fit.coefficients[0], math.log(0.5), places=10)

    def test_binary_groups(self):
        g = np.repeat([0.0, 1.0], 5)
        y = np.array([0, 1, 0, 2, 0, 1, 2, 1, 2, 1], dtype=float)  # group sums 3 and 7
        X = np.column_stack([np.ones(10), g])
        fit = fit_glm(y, np.ones(10), X, tol=1e-12)
        rates = predict_glm(fit, X)
        np.testing.assert_allclose(rates[:5], 0.6, rtol=1e-8)
        np.testing.assert_allclose(rates[5:], 1.4, rtol=1e-8)

    def test_singular(self):
        X = np.column_stack([np.ones(6), np.arange(6.0), 2 * np.arange(6.0)])
        with self.assertRaises(SingularFitError):
            fit_glm(np.arange(6.0), np.ones(6), X)

    def test_degenerate(self):
        with self.assertRaises(DegenerateError):
            fit_glm(np.zeros(4), np.ones(4), np.ones((4, 1)))

    def test_deviance_history_nonincreasing(self):
        ds = simulate(SimConfig(n=2000, seed=5))
        for xi in [1.0, 1.5, 2.0]:
            fit = fit_glm_dataset(ds, true_mean_basis(), p=xi)
            history = np.array(fit.deviance_history)
            self.assertTrue(np.all(np.diff(history) <= 1e-9 * np.abs(history[1:])))

    def test_stops_on_floored_relative_change(self):
        ds = simulate(SimConfig(n=2000, seed=6))
        fit = fit_glm_dataset(ds, true_mean_basis(), tol=1e-6)
        self.assertTrue(fit.converged)
        h = fit.deviance_history
        self.assertLess(abs(h[-2] - h[-1]) / (DEVIANCE_FLOOR + abs(h[-1])), 1e-6)
        if len(h) > 2:
            self.assertGreaterEqual(abs(h[-3] - h[-2]) / (DEVIANCE_FLOOR + abs(h[-2])), 1e-6)

    def test_recovers_univariate_mean(self):
        ds = simulate(SimConfig(n=20_000, seed=2))
        fit = fit_glm_dataset(ds, true_mean_basis())
        x = np.linspace(0.5, 9.5, 50)
        rel = np.abs(predict_glm(fit, x) - mean_univariate(x)) / mean_univariate(x)
        self.assertLess(rel.mean(), 0.08)

    def test_predict_zero_coefficients(self):
        fit = GlmFit(coefficients=np.zeros(2), power=1.0, basis=identity_basis(1), converged=True,
                     iterations=0, final_deviance=0.0)
        np.testing.assert_array_equal(predict_glm(fit, [1.0, 50.0]), [1.0, 1.0])


def test_intercept_only_closed_form_on_random_fixtures():
    rng = np.random.default_rng(11)
    for _ in range(50):
        n = int(rng.integers(1, 101))
        e = rng.uniform(0.2, 3.0, n)
        y = rng.poisson(2.0 * e).astype(float)
        if y.sum() == 0:
            y[0] = 1.0
        fit = fit_glm(y, e, np.ones((n, 1)), tol=1e-12)
        assert abs(math.exp(fit.coefficients[0]) / (y.sum() / e.sum()) - 1) < 1e-10


def test_canonical_link_balance_per_level():
    rng = np.random.default_rng(12)
    for _ in range(20):
        n = 80
        g = (rng.random(n) < 0.4).astype(float)
        x = rng.uniform(0, 1, n)
        e = rng.uniform(0.5, 1.5, n)
        y = rng.poisson(e * np.exp(0.3 + 0.5 * g + 0.4 * x)).astype(float)
        X = np.column_stack([np.ones(n), g, x])
        fit = fit_glm(y, e, X, tol=1e-12)
        m = e * predict_glm(fit, X)
        for level in [0.0, 1.0]:
            mask = g == level
            assert abs(m[mask].sum() - y[mask].sum()) <= 1e-6 * y[mask].sum()


class TestBoost(unittest.TestCase):
    def test_hand_fixture(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        y = np.array([1.0, 1.0, 3.0, 5.0])
        fit = fit_boost(y, np.ones(4), x, n_trees=1, shrinkage=1.0, min_leaf=1)
        self.assertEqual(len(fit.stumps), 1)
        stump = fit.stumps[0]
        self.assertEqual(stump.threshold, 2.5)
        self.assertAlmostEqual(stump.left_step, math.log(0.4), places=12)
        self.assertAlmostEqual(stump.right_step, math.log(1.6), places=12)
        np.testing.assert_allclose(predict_boost(fit, x), [1.0, 1.0, 4.0, 4.0], rtol=1e-12)

    def test_constant_feature(self):
        y = np.array([1.0, 0.0, 4.0, 2.0])
        e = np.array([1.0, 2.0, 1.0, 1.0])
        fit = fit_boost(y, e, np.ones(4), n_trees=5, min_leaf=1)
        self.assertEqual(fit.stumps, [])
        np.testing.assert_allclose(predict_boost(fit, np.ones(3)), 7 / 5, rtol=1e-12)

    def test_small_shrinkage(self):
        ds = simulate(SimConfig(n=500, seed=1))
        fit = fit_boost(ds.y, ds.exposure, ds.features, n_trees=1, shrinkage=1e-9)
        np.testing.assert_allclose(predict_boost(fit, ds.features), ds.y.sum() / ds.exposure.sum(), rtol=1e-6)

    def test_training_deviance_nonincreasing(self):
        ds = simulate(SimConfig(n=3000, seed=8, shape="bivariate"))
        fit = fit_boost(ds.y, ds.exposure, ds.features, n_trees=40, shrinkage=0.3)
        self.assertTrue(np.all(np.diff(fit.train_deviance) <= 1e-12 * np.abs(fit.train_deviance[1:])))
        self.assertTrue(np.all(predict_boost(fit, ds.features) > 0))

    def test_errors(self):
        with self.assertRaises(UsageError):
            fit_boost([1.0], [1.0], [1.0], n_trees=0)
        with self.assertRaises(UsageError):
            fit_boost([1.0], [1.0], [1.0], shrinkage=0.0)
        with self.assertRaises(DegenerateError):
            fit_boost(np.zeros(3), np.ones(3), np.arange(3.0))


def test_boost_two_valued_single_stump():
    ds = simulate(SimConfig(n=1000, seed=4))
    fit = fit_boost(ds.y, ds.exposure, ds.features, n_trees=1)
    assert len(np.unique(predict_boost(fit, ds.features))) == 2


def test_boost_feature_count_checked():
    ds = simulate(SimConfig(n=1000, seed=4, shape="bivariate"))
    fit = fit_boost(ds.y, ds.exposure, ds.features, n_trees=10)
    assert fit.stumps
    with pytest.raises(UsageError):
        predict_boost(fit, ds.features[:, :0])
