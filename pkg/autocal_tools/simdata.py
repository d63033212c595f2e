#!/usr/bin/env python3
# -*- coding: utf-8 -*-

from enum import Enum
from dataclasses import dataclass
import numpy as np
from autocal_tools.exceptions import DomainError, UsageError
from autocal_tools.portfolio import Dataset
from autocal_tools.utils import as_vector

X_MIN = 0.0
X_MAX = 10.0


class Shape(str, Enum):
    UNIVARIATE = "univariate"
    BIVARIATE = "bivariate"


@dataclass(frozen=True)
class SimConfig:
    """
    Simulated Poisson portfolio.

    Args:
        n (int): Number of rows, at least 1.
        seed (int): Seed of numpy's PCG64 generator (np.random.default_rng).
            n=10000 and seed=42 are arbitrary defaults.
        shape (Shape): univariate (piecewise linear mean) or bivariate (Gaussian bumps).
    """
    n: int = 10_000
    seed: int = 42
    shape: Shape = Shape.UNIVARIATE

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise UsageError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "shape", Shape(self.shape))


def _check_domain(x, name):
    if np.any(~((x >= X_MIN) & (x <= X_MAX))):
        raise DomainError(f"{name} must lie in [{X_MIN}, {X_MAX}]")


def mean_univariate(x):
    """mu(x) = 8 - x + 3 (x - 5)_+ on [0, 10]; minimum 3 at the kink x = 5."""
    scalar_input = np.ndim(x) == 0
    x = as_vector(x, "x")
    _check_domain(x, "x")
    mu = 8 - x + 3 * np.maximum(x - 5, 0)
    return float(mu[0]) if scalar_input else mu


def mean_bivariate(x1, x2):
    """
    Three Gaussian bumps on top of the level 8, with u = (x1-5)/3 and v = (x2-5)/3:

        3 (1-u)^2 exp(-u^2 - (v+1)^2) - 10 (u/5 - u^3 - v^5) exp(-u^2 - v^2)
            - exp(-(u+1)^2 - v^2) / 3 + 8
    """
    scalar_input = np.ndim(x1) == 0 and np.ndim(x2) == 0
    x1 = as_vector(x1, "x1")
    x2 = as_vector(x2, "x2")
    _check_domain(x1, "x1")
    _check_domain(x2, "x2")
    u = (x1 - 5) / 3
    v = (x2 - 5) / 3
    mu = (3 * (1 - u) ** 2 * np.exp(-u ** 2 - (v + 1) ** 2)
          - 10 * (u / 5 - u ** 3 - v ** 5) * np.exp(-u ** 2 - v ** 2)
          - np.exp(-(u + 1) ** 2 - v ** 2) / 3
          + 8)
    return float(mu[0]) if scalar_input else mu


def sample_poisson(mu, rng):
    """
    Poisson draws by inversion with sequential search, one uniform per row.
    Means here stay below ~20 so the search is short.
    """
    mu = np.asarray(mu, dtype=np.float64)
    u = rng.random(mu.shape)
    k = np.zeros(mu.shape, dtype=np.int64)
    prob = np.exp(-mu)
    cdf = prob.copy()
    active = u > cdf
    while active.any():
        k[active] += 1
        prob[active] *= mu[active] / k[active]
        cdf[active] += prob[active]
        # the cdf can stall just below 1 in floating point
        active &= (u > cdf) & (prob > 0)
    return k


def simulate(cfg):
    """Features i.i.d. U[0,10], y ~ Poisson(mu(x)), unit exposure. Reproducible from cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    n_features = 1 if cfg.shape == Shape.UNIVARIATE else 2
    features = rng.uniform(X_MIN, X_MAX, size=(cfg.n, n_features))
    if cfg.shape == Shape.UNIVARIATE:
        mu = mean_univariate(features[:, 0])
    else:
        mu = mean_bivariate(features[:, 0], features[:, 1])
    mu = np.atleast_1d(mu)
    y = sample_poisson(mu, rng).astype(np.float64)
    return Dataset(y=y, exposure=np.ones(cfg.n), features=features, mu=mu)


def distort(scores, kind, param):
    """
    Manufacture a miscalibrated predictor.

    Args:
        scores: positive scores.
        kind (str): "scale" (c * pi), "power" (pi ** a) or "logit-shift" (exp(ln pi + param)).
        param (float): c > 0, a > 0 or the additive shift on the log scale.
    """
    scores = as_vector(scores, "scores")
    if np.any(~(scores > 0)):
        raise DomainError("scores must be strictly positive")
    if kind == "scale":
        if param <= 0:
            raise DomainError(f"scale must be positive, got {param}")
        return param * scores
    if kind == "power":
        if param <= 0:
            raise DomainError(f"power must be positive, got {param}")
        return scores ** param
    if kind in ("logit-shift", "shift"):
        return np.exp(np.log(scores) + param)
    raise UsageError(f"unknown distortion '{kind}', use scale, power or logit-shift")


if __name__ == "__main__":
    ds = simulate(SimConfig(n=100_000))
    print(f"mean mu {ds.mu.mean():.4f} (6.75 expected), mean y {ds.y.mean():.4f}, var y {ds.y.var():.4f}")
