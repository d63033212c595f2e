#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tweedie family: power classification, variance function, the psi transform and
the deviance losses with pi-free constants dropped (dispersion fixed to 1).
"""

import math
from enum import Enum
from dataclasses import dataclass
import numpy as np
from autocal_tools.exceptions import DomainError
from autocal_tools.utils import as_vector, check_same_length, check_positive


class TweedieClass(str, Enum):
    POISSON = "Poisson"
    COMPOUND_POISSON_GAMMA = "CompoundPoissonGamma"
    GAMMA = "Gamma"
    CONTINUOUS_POSITIVE = "ContinuousPositive"
    INVERSE_GAUSSIAN = "InverseGaussian"


@dataclass(frozen=True)
class PowerParam:
    """Tweedie power xi, restricted to xi >= 1. V(mu) = mu**xi."""
    xi: float

    def __post_init__(self):
        if not math.isfinite(self.xi):
            raise DomainError(f"xi must be finite, got {self.xi}")
        if self.xi < 1:
            raise DomainError(f"xi must be >= 1, got {self.xi}")

    def __float__(self):
        return float(self.xi)


def as_power(p):
    if isinstance(p, PowerParam):
        return p
    return PowerParam(float(p))


def _unwrap(value, scalar_input):
    if scalar_input:
        return float(value[0])
    return value


def _positive(values, name):
    scalar_input = np.ndim(values) == 0
    arr = as_vector(values, name)
    if np.any(~(arr > 0)):
        raise DomainError(f"{name} must be strictly positive")
    return arr, scalar_input


def classify(p):
    xi = as_power(p).xi
    if xi == 1:
        return TweedieClass.POISSON
    if xi < 2:
        return TweedieClass.COMPOUND_POISSON_GAMMA
    if xi == 2:
        return TweedieClass.GAMMA
    if xi == 3:
        return TweedieClass.INVERSE_GAUSSIAN
    return TweedieClass.CONTINUOUS_POSITIVE


def variance_function(p, mu):
    xi = as_power(p).xi
    mu, scalar_input = _positive(mu, "mu")
    return _unwrap(mu ** xi, scalar_input)


def psi(p, pi):
    """ln(pi) for xi = 2, pi**(2 - xi) / (2 - xi) otherwise."""
    xi = as_power(p).xi
    pi, scalar_input = _positive(pi, "pi")
    if xi == 2:
        out = np.log(pi)
    else:
        out = pi ** (2 - xi) / (2 - xi)
    return _unwrap(out, scalar_input)


def psi_difference(p, pi1, pi2):
    """
    psi(pi1) - psi(pi2) without forming the divergent 1/(2 - xi) constant separately.
    Stays accurate for xi arbitrarily close to 2.
    """
    xi = as_power(p).xi
    scalar_input = np.ndim(pi1) == 0 and np.ndim(pi2) == 0
    pi1, _ = _positive(pi1, "pi1")
    pi2, _ = _positive(pi2, "pi2")
    log_ratio = np.log(pi1) - np.log(pi2)
    if xi == 2:
        out = log_ratio
    else:
        a = 2 - xi
        out = pi2 ** a * np.expm1(a * log_ratio) / a
    return _unwrap(out, scalar_input)


def unit_loss(p, y, pi):
    """
    Tweedie loss of predicting pi for an observation y.

        xi = 1:  pi - y ln(pi)
        xi = 2:  ln(pi) + y / pi
        else:    pi**(2-xi)/(2-xi) - y pi**(1-xi)/(1-xi)
    """
    xi = as_power(p).xi
    scalar_input = np.ndim(y) == 0 and np.ndim(pi) == 0
    pi, _ = _positive(pi, "pi")
    y = as_vector(y, "y")
    if np.any(y < 0):
        raise DomainError("y must be nonnegative")
    y, pi = np.broadcast_arrays(y, pi)

    if xi == 1:
        out = pi - y * np.log(pi)
    elif xi == 2:
        out = np.log(pi) + y / pi
    else:
        out = pi ** (2 - xi) / (2 - xi) - y * pi ** (1 - xi) / (1 - xi)
    return _unwrap(out, scalar_input)


def unit_loss_gradient(p, y, pi):
    """dL/dpi = pi**(-xi) (pi - y), the same expression on every branch."""
    xi = as_power(p).xi
    scalar_input = np.ndim(y) == 0 and np.ndim(pi) == 0
    pi, _ = _positive(pi, "pi")
    y = as_vector(y, "y")
    out = pi ** (-xi) * (pi - y)
    return _unwrap(out, scalar_input)


def mean_deviance(p, y, e, scores):
    """
    Predictive deviance (1/n) sum L(y_i, e_i * scores_i).

    Observed totals y_i are compared with expected totals m_i = e_i * scores_i
    (offset convention). With e == 1 this is the plain mean unit loss.

    Args:
        p: PowerParam or float.
        y: responses, nonnegative.
        e: exposures, strictly positive.
        scores: annualised predictions, strictly positive.
    """
    y = as_vector(y, "y")
    e = as_vector(e, "exposure")
    scores = as_vector(scores, "scores")
    check_same_length(y=y, exposure=e, scores=scores)
    check_positive(e, "exposure")
    check_positive(scores, "scores")
    # numpy sums pairwise, so the result does not depend on threading
    return float(np.mean(unit_loss(p, y, e * scores)))


if __name__ == "__main__":
    for xi in [1, 1.5, 2, 2.5, 3]:
        print(xi, classify(xi).value, unit_loss(xi, 1.0, 1.0))
