#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import math
import unittest
import numpy as np
import pytest
from autocal_tools.exceptions import DomainError, UsageError
from autocal_tools.tweedie import (
    PowerParam, TweedieClass, classify, variance_function, psi, psi_difference,
    unit_loss, unit_loss_gradient, mean_deviance,
)


class TestPowerParam(unittest.TestCase):
    def test_rejects_below_one(self):
        with self.assertRaises(DomainError):
            PowerParam(0.5)

    def test_rejects_non_finite(self):
        with self.assertRaises(DomainError):
            PowerParam(float("inf"))
        with self.assertRaises(DomainError):
            PowerParam(float("nan"))

    def test_float(self):
        self.assertEqual(float(PowerParam(1.5)), 1.5)

    def test_classify(self):
        expected = {1: TweedieClass.POISSON, 1.5: TweedieClass.COMPOUND_POISSON_GAMMA, 2: TweedieClass.GAMMA,
                    2.5: TweedieClass.CONTINUOUS_POSITIVE, 3: TweedieClass.INVERSE_GAUSSIAN,
                    4: TweedieClass.CONTINUOUS_POSITIVE}
        for xi, cls in expected.items():
            self.assertEqual(classify(PowerParam(xi)), cls)


class TestTransforms(unittest.TestCase):
    def test_variance_function(self):
        self.assertEqual(variance_function(1, 7.0), 7.0)
        self.assertEqual(variance_function(2, 3.0), 9.0)
        self.assertAlmostEqual(variance_function(1.6, 2.0), 2 ** 1.6, places=12)
        self.assertAlmostEqual(variance_function(1.6, 2.0), 3.03143, places=5)
        with self.assertRaises(DomainError):
            variance_function(1, 0.0)

    def test_psi(self):
        self.assertEqual(psi(1, 2.0), 2.0)
        self.assertAlmostEqual(psi(2, math.e), 1.0, places=15)
        self.assertEqual(psi(3, 2.0), -0.5)
        with self.assertRaises(DomainError):
            psi(1.5, -1.0)

    def test_psi_difference_continuity_at_two(self):
        pi1, pi2 = np.array([0.3, 2.0, 7.5]), np.array([1.1, 0.4, 7.0])
        target = np.log(pi1) - np.log(pi2)
        for xi in [2 - 1e-6, 2 + 1e-6]:
            np.testing.assert_allclose(psi_difference(xi, pi1, pi2), target, rtol=1e-4)
        np.testing.assert_array_equal(psi_difference(2, pi1, pi2), target)

    def test_psi_difference_matches_direct(self):
        pi1, pi2 = np.array([0.3, 2.0]), np.array([1.1, 0.4])
        for xi in [1, 1.5, 3]:
            np.testing.assert_allclose(psi_difference(xi, pi1, pi2), psi(xi, pi1) - psi(xi, pi2), rtol=1e-12)


class TestUnitLoss(unittest.TestCase):
    def test_examples(self):
        self.assertEqual(unit_loss(1, 0.0, 0.5), 0.5)
        self.assertEqual(unit_loss(2, 1.0, 1.0), 1.0)
        self.assertAlmostEqual(unit_loss(1.5, 1.0, 1.0), 4.0, places=12)

    def test_errors(self):
        with self.assertRaises(DomainError):
            unit_loss(1, 1.0, 0.0)
        with self.assertRaises(DomainError):
            unit_loss(1, -1.0, 1.0)

    def test_minimised_at_y(self):
        grid = np.exp(np.linspace(-4, 4, 401))
        for xi in [1, 1.3, 1.5, 2, 2.5, 3]:
            for y in [0.2, 1.0, 3.7]:
                best = unit_loss(xi, y, y)
                self.assertTrue(np.all(unit_loss(xi, y, grid) >= best - 1e-12 * abs(best)))

    def test_general_branch_continuity_at_two(self):
        y, pi = 1.7, np.array([0.5, 1.0, 3.0])
        for xi in [2 - 1e-6, 2 + 1e-6]:
            # losses differ from the xi = 2 branch by pi-free constants only
            diff = unit_loss(xi, y, pi) - unit_loss(xi, y, 1.0)
            np.testing.assert_allclose(diff, unit_loss(2, y, pi) - unit_loss(2, y, 1.0), rtol=1e-4, atol=1e-8)


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(9)
    for _ in range(1000):
        xi = rng.uniform(1, 3)
        y = rng.uniform(0, 5)
        pi = rng.uniform(0.2, 5)
        h = 1e-5 * pi
        numeric = (unit_loss(xi, y, pi + h) - unit_loss(xi, y, pi - h)) / (2 * h)
        analytic = unit_loss_gradient(xi, y, pi)
        # relative to the size of the two terms of the gradient, which stays away from 0 at pi = y
        scale = pi ** (1 - xi) + y * pi ** (-xi)
        assert abs(numeric - analytic) <= 1e-6 * scale


def test_mean_deviance_examples():
    assert mean_deviance(1, [1.0], [1.0], [1.0]) == 1.0
    assert mean_deviance(1, [0.0, 0.0], [1.0, 1.0], [0.3, 0.7]) == pytest.approx(0.5, rel=1e-12)
    assert mean_deviance(1, [2.0], [2.0], [1.0]) == pytest.approx(2 - 2 * math.log(2), rel=1e-14)
    assert mean_deviance(1, [2.0], [2.0], [1.0]) == pytest.approx(0.61371, abs=1e-5)


def test_mean_deviance_errors():
    with pytest.raises(UsageError):
        mean_deviance(1, [1.0, 2.0], [1.0], [1.0, 1.0])
    with pytest.raises(DomainError):
        mean_deviance(1, [1.0], [0.0], [1.0])
    with pytest.raises(DomainError):
        mean_deviance(1, [1.0], [1.0], [-1.0])
