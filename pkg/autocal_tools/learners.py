#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Baseline predictors: a log-link GLM fitted by IRLS on a (spline) basis and
gradient boosted stumps under Poisson deviance. Both return annualised scores;
exposure only enters as an offset during fitting.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple
import numpy as np
from scipy import linalg
from tqdm import tqdm
from autocal_tools.exceptions import (
    UsageError, SingularFitError, DivergenceError, DegenerateError,
)
from autocal_tools.logprint import default_logger
from autocal_tools.tweedie import as_power, unit_loss
from autocal_tools.utils import as_vector, check_same_length, check_positive

RANK_TOL = 1e-10
MAX_HALVINGS = 10
DEVIANCE_FLOOR = 0.1


@dataclass(frozen=True)
class FeatureBasis:
    """
    Expansion of one feature.

    Args:
        kind (str): "identity", "polynomial" or "spline" (truncated power basis).
        degree (int): 1, 2 or 3. Ignored for identity.
        knots (tuple): strictly increasing interior knots, spline only.
    """
    kind: str = "identity"
    degree: int = 1
    knots: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("identity", "polynomial", "spline"):
            raise UsageError(f"unknown basis kind '{self.kind}'")
        if self.degree not in (1, 2, 3):
            raise UsageError(f"degree must be 1, 2 or 3, got {self.degree}")
        knots = tuple(float(t) for t in self.knots)
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise UsageError(f"knots must be strictly increasing, got {knots}")
        if self.kind != "spline" and knots:
            raise UsageError("knots only apply to the spline basis")
        object.__setattr__(self, "knots", knots)

    def expand(self, x):
        if self.kind == "identity":
            return x[:, None]
        cols = [x ** d for d in range(1, self.degree + 1)]
        cols += [np.maximum(x - t, 0) ** self.degree for t in self.knots]
        return np.column_stack(cols)

    def to_dict(self):
        return {"kind": self.kind, "degree": self.degree, "knots": list(self.knots)}


@dataclass(frozen=True)
class BasisSpec:
    """Per-feature expansions plus an optional tensor product of the first two features' blocks."""
    features: Tuple[FeatureBasis, ...]
    interaction: bool = False

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if self.interaction and len(self.features) != 2:
            raise UsageError("the tensor product interaction needs exactly two features")

    def to_dict(self):
        return {"features": [f.to_dict() for f in self.features], "interaction": self.interaction}

    @classmethod
    def from_dict(cls, d):
        return cls(features=tuple(FeatureBasis(kind=f["kind"], degree=f["degree"], knots=tuple(f["knots"]))
                                  for f in d["features"]),
                   interaction=d.get("interaction", False))


def identity_basis(n_features):
    return BasisSpec(features=tuple(FeatureBasis() for _ in range(n_features)))


def true_mean_basis():
    """[1, x, (x-5)_+]: linear spline with the kink of the univariate simulated mean."""
    return BasisSpec(features=(FeatureBasis(kind="spline", degree=1, knots=(5.0,)),))


def default_gam_basis(features, n_knots=5, degree=3):
    """Cubic truncated power splines with equispaced interior knots over each feature's range."""
    features = _as_feature_matrix(features)
    specs = []
    for j in range(features.shape[1]):
        lo, hi = features[:, j].min(), features[:, j].max()
        knots = tuple(np.linspace(lo, hi, n_knots + 2)[1:-1])
        specs.append(FeatureBasis(kind="spline", degree=degree, knots=knots))
    return BasisSpec(features=tuple(specs))


def _as_feature_matrix(features):
    if hasattr(features, "features"):
        features = features.features
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features.reshape(-1, 1)
    return features


def design_matrix(features, basis, check_knots=True):
    """
    Intercept column followed by each feature's expansion (and the optional tensor product).

    Args:
        features: Dataset or (n, p) array.
        basis (BasisSpec): one FeatureBasis per column.
        check_knots (bool): require every knot strictly inside the observed feature range.
            Fitting checks, prediction does not (truncated powers extend beyond the range).

    Raises:
        UsageError: feature count mismatch, non-finite features or knots outside the range.
    """
    features = _as_feature_matrix(features)
    if features.shape[1] != len(basis.features):
        raise UsageError(f"basis describes {len(basis.features)} features, data has {features.shape[1]}")
    if not np.all(np.isfinite(features)):
        raise UsageError("features must be finite")

    blocks = []
    for j, spec in enumerate(basis.features):
        x = features[:, j]
        if check_knots and spec.knots:
            lo, hi = x.min(), x.max()
            outside = [t for t in spec.knots if not lo < t < hi]
            if outside:
                raise UsageError(f"knots {outside} of feature {j + 1} lie outside its range [{lo}, {hi}]")
        blocks.append(spec.expand(x))

    columns = [np.ones((features.shape[0], 1))] + blocks
    if basis.interaction:
        a, b = blocks
        columns.append(np.column_stack([a[:, i] * b[:, k] for i in range(a.shape[1]) for k in range(b.shape[1])]))
    return np.hstack(columns)


@dataclass
class GlmFit:
    coefficients: np.ndarray
    power: float
    basis: Optional[BasisSpec]
    converged: bool
    iterations: int
    final_deviance: float
    deviance_history: List[float] = field(default_factory=list)

    def to_dict(self):
        return {
            "model": "glm",
            "power": self.power,
            "basis": None if self.basis is None else self.basis.to_dict(),
            "coefficients": [float(c) for c in self.coefficients],
            "converged": self.converged,
            "iterations": self.iterations,
            "final_deviance": self.final_deviance,
        }


def _weighted_least_squares(X, z, w):
    """Solve min sum w (z - X b)^2 through a column-pivoted QR; rank checked on |diag R|."""
    sw = np.sqrt(w)
    Q, R, piv = linalg.qr(X * sw[:, None], mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > RANK_TOL * diag.max())) if diag.size and diag.max() > 0 else 0
    if rank < X.shape[1]:
        raise SingularFitError(f"design matrix has rank {rank} < {X.shape[1]} columns")
    beta = np.empty(X.shape[1])
    beta[piv] = linalg.solve_triangular(R, Q.T @ (z * sw))
    return beta


def _deviance(p, y, m):
    return float(np.sum(unit_loss(p, y, m)))


def fit_glm(y, e, X, p=1.0, tol=1e-8, max_iter=25, basis=None, logger=None):
    """
    Log-link quasi-likelihood IRLS with exposure offset.

    With eta = X beta and m = e exp(eta) the working weights are m^(2 - xi) and the working
    response is z = eta + (y - m) / m. Each step solves a weighted least squares problem;
    a step that raises the deviance is halved (at most 10 times). Stops when
    |dev_old - dev| / (DEVIANCE_FLOOR + |dev|) < tol or after max_iter iterations
    (the glm.fit rule; the floor covers a summed deviance at or near zero).

    Args:
        y: responses >= 0.
        e: exposures > 0.
        X: design matrix, first column the intercept.
        p: PowerParam or float.
        tol (float): deviance change relative to DEVIANCE_FLOOR + |dev|.
        max_iter (int): iteration cap.
        basis (BasisSpec): stored on the fit so predict_glm can rebuild the design.
        logger: LogPrint instance, optional.

    Returns:
        GlmFit

    Raises:
        SingularFitError: rank deficient design.
        DivergenceError: non-finite working quantities.
        DegenerateError: all responses zero (the log rate is -inf).
    """
    logger = logger if logger else default_logger()
    power = as_power(p)
    xi = power.xi
    y = as_vector(y, "y")
    e = as_vector(e, "exposure")
    X = np.asarray(X, dtype=np.float64)
    check_same_length(y=y, exposure=e, X=X)
    check_positive(e, "exposure")
    if np.any(y < 0):
        raise UsageError("y must be nonnegative")
    if y.sum() <= 0:
        raise DegenerateError("all responses are zero, the log rate is -inf")

    offset = np.log(e)
    global_rate = y.sum() / e.sum()
    m = (y + global_rate * e) / 2
    eta = np.log(m) - offset
    w = m ** (2 - xi)
    z = eta + (y - m) / m
    beta = _weighted_least_squares(X, z, w)

    def evaluate(beta):
        eta = X @ beta
        m = np.exp(eta + offset)
        if not np.all(np.isfinite(m)) or np.any(m <= 0):
            return eta, m, np.inf
        return eta, m, _deviance(power, y, m)

    eta, m, dev = evaluate(beta)
    if not np.isfinite(dev):
        raise DivergenceError("initial IRLS step produced non-finite fitted values")
    history = [dev]
    converged = False
    iteration = 0

    for iteration in range(1, max_iter + 1):
        w = m ** (2 - xi)
        z = eta + (y - m) / m
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(z))):
            raise DivergenceError(f"non-finite working weights or response at iteration {iteration}")
        beta_new = _weighted_least_squares(X, z, w)
        eta_new, m_new, dev_new = evaluate(beta_new)

        halvings = 0
        while dev_new > dev and halvings < MAX_HALVINGS:
            beta_new = (beta_new + beta) / 2
            eta_new, m_new, dev_new = evaluate(beta_new)
            halvings += 1
        if not np.isfinite(dev_new):
            raise DivergenceError(f"IRLS diverged at iteration {iteration}")
        if dev_new > dev:
            # no descent even after halving: keep the previous iterate
            logger.warning(f"fit_glm: step halving failed at iteration {iteration}, stopping")
            break

        change = abs(dev - dev_new) / (DEVIANCE_FLOOR + abs(dev_new))
        beta, eta, m, dev = beta_new, eta_new, m_new, dev_new
        history.append(dev)
        if change < tol:
            converged = True
            break

    if not converged:
        logger.warning(f"fit_glm: no convergence after {iteration} iterations (xi={xi})")
    else:
        logger.print(f"fit_glm: converged in {iteration} iterations, deviance {dev / len(y):.6f} (xi={xi})")

    return GlmFit(coefficients=beta, power=xi, basis=basis, converged=converged,
                  iterations=iteration, final_deviance=dev / len(y), deviance_history=history)


def fit_glm_dataset(dataset, basis, p=1.0, tol=1e-8, max_iter=25, logger=None):
    X = design_matrix(dataset, basis)
    return fit_glm(dataset.y, dataset.exposure, X, p=p, tol=tol, max_iter=max_iter, basis=basis, logger=logger)


def predict_glm(fit, features):
    """Annualised scores exp(design row . coefficients); exposure is not applied."""
    if fit.basis is None:
        X = np.asarray(features, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(fit.coefficients):
            raise UsageError("without a basis predict_glm expects the design matrix itself")
    else:
        X = design_matrix(features, fit.basis, check_knots=False)
    return np.exp(X @ fit.coefficients)


@dataclass(frozen=True)
class Stump:
    feature: int
    threshold: float
    left_step: float
    right_step: float


@dataclass
class BoostFit:
    """prediction = exp(initial_log_level + shrinkage * sum of stump steps); x <= threshold goes left."""
    initial_log_level: float
    stumps: List[Stump]
    shrinkage: float
    n_trees: int
    train_deviance: List[float] = field(default_factory=list)

    def to_dict(self):
        return {
            "model": "boost",
            "initial_log_level": self.initial_log_level,
            "shrinkage": self.shrinkage,
            "n_trees": self.n_trees,
            "stumps": [[s.feature, s.threshold, s.left_step, s.right_step] for s in self.stumps],
        }


def _poisson_deviance(y, m):
    return float(np.sum(unit_loss(1.0, y, m)))


def _best_split(y, m, sorted_features, min_leaf):
    """
    Depth-one split maximising the Poisson deviance drop with exact Newton leaf steps.

    A leaf moved by ln(Y/M) drops the loss by M - Y + Y ln(Y/M). Leaves with zero observed
    total are inadmissible. Ties resolve to the lowest feature index, then the lowest threshold.
    """
    best = None
    n = len(y)
    for j, (order, xs) in enumerate(sorted_features):
        ys = np.cumsum(y[order])
        ms = np.cumsum(m[order])
        y_tot, m_tot = ys[-1], ms[-1]
        # split after position i (left = rows 0..i), only between distinct values
        i = np.arange(min_leaf - 1, n - min_leaf)
        if len(i) == 0:
            continue
        i = i[xs[i] < xs[i + 1]]
        if len(i) == 0:
            continue
        yl, ml = ys[i], ms[i]
        yr, mr = y_tot - yl, m_tot - ml
        ok = (yl > 0) & (yr > 0)
        if not ok.any():
            continue
        i, yl, ml, yr, mr = i[ok], yl[ok], ml[ok], yr[ok], mr[ok]
        gain = (ml - yl + yl * np.log(yl / ml)) + (mr - yr + yr * np.log(yr / mr))
        k = int(np.argmax(gain))
        if best is None or gain[k] > best[0]:
            threshold = (xs[i[k]] + xs[i[k] + 1]) / 2
            best = (gain[k], j, threshold, np.log(yl[k] / ml[k]), np.log(yr[k] / mr[k]))
    return best


def fit_boost(y, e, X, n_trees=30, shrinkage=0.1, min_leaf=20, verbose=False, logger=None):
    """
    Gradient boosted stumps on the log scale under Poisson deviance.

    Starts from the global rate ln(sum y / sum e). Every round adds the best depth-one split
    (thresholds at midpoints of consecutive distinct feature values) with Newton leaf steps
    ln(sum y / sum m) on the current fitted totals m. A round whose shrunk step would raise
    the training deviance has its steps halved, up to 10 times; training stops early when no
    admissible split remains.

    Args:
        y: responses >= 0.
        e: exposures > 0.
        X: raw features, (n, p).
        n_trees (int): number of rounds, >= 1.
        shrinkage (float): learning rate in (0, 1].
        min_leaf (int): minimum number of rows per leaf, >= 1.
        verbose (bool): show a tqdm progress bar.
        logger: LogPrint instance, optional.

    Returns:
        BoostFit
    """
    logger = logger if logger else default_logger()
    if n_trees < 1:
        raise UsageError(f"n_trees must be >= 1, got {n_trees}")
    if not 0 < shrinkage <= 1:
        raise UsageError(f"shrinkage must lie in (0, 1], got {shrinkage}")
    if min_leaf < 1:
        raise UsageError(f"min_leaf must be >= 1, got {min_leaf}")
    y = as_vector(y, "y")
    e = as_vector(e, "exposure")
    X = _as_feature_matrix(X)
    check_same_length(y=y, exposure=e, X=X)
    check_positive(e, "exposure")
    if y.sum() <= 0:
        raise DegenerateError("all responses are zero, the initial log level is -inf")

    init = float(np.log(y.sum() / e.sum()))
    log_score = np.full(len(y), init)
    sorted_features = []
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        sorted_features.append((order, X[order, j]))

    m = e * np.exp(log_score)
    dev = _poisson_deviance(y, m)
    history = [dev]
    stumps = []

    for _ in tqdm(range(n_trees), disable=not verbose, desc="fit_boost"):
        split = _best_split(y, m, sorted_features, min_leaf)
        if split is None:
            logger.print(f"fit_boost: no admissible split left after {len(stumps)} stumps")
            break
        _, j, threshold, left, right = split
        goes_left = X[:, j] <= threshold

        for _ in range(MAX_HALVINGS + 1):
            step = shrinkage * np.where(goes_left, left, right)
            m_new = e * np.exp(log_score + step)
            dev_new = _poisson_deviance(y, m_new)
            if dev_new <= dev:
                break
            left, right = left / 2, right / 2
        else:
            logger.warning("fit_boost: step halving could not reduce the training deviance, stopping")
            break

        stumps.append(Stump(feature=j, threshold=float(threshold), left_step=float(left), right_step=float(right)))
        log_score = log_score + step
        m, dev = m_new, dev_new
        history.append(dev)

    logger.print(f"fit_boost: {len(stumps)} stumps, training deviance {dev / len(y):.6f}")
    return BoostFit(initial_log_level=init, stumps=stumps, shrinkage=shrinkage, n_trees=n_trees,
                    train_deviance=[d / len(y) for d in history])


def predict_boost(fit, features):
    X = _as_feature_matrix(features)
    if not np.all(np.isfinite(X)):
        raise UsageError("features must be finite")
    used = [s.feature for s in fit.stumps]
    if used and max(used) >= X.shape[1]:
        raise UsageError(f"fit uses feature {max(used) + 1}, data has {X.shape[1]} features")
    log_score = np.full(X.shape[0], fit.initial_log_level)
    for s in fit.stumps:
        log_score += fit.shrinkage * np.where(X[:, s.feature] <= s.threshold, s.left_step, s.right_step)
    return np.exp(log_score)


if __name__ == "__main__":
    from autocal_tools.simdata import SimConfig, simulate
    ds = simulate(SimConfig(n=10_000))
    glm = fit_glm_dataset(ds, true_mean_basis())
    bst = fit_boost(ds.y, ds.exposure, ds.features, n_trees=30, verbose=True)
    print(glm.coefficients, predict_boost(bst, ds.features).mean(), ds.y.mean())
