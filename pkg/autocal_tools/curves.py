#!/usr/bin/env python3
# -*- coding: utf-8 -*-

from dataclasses import dataclass
import numpy as np
import pandas as pd
from scipy.stats import spearmanr
from tqdm import tqdm
from autocal_tools.autocal import Kernel, BandwidthSpec, autocalibrate
from autocal_tools.exceptions import UsageError, DegenerateError
from autocal_tools.logprint import default_logger
from autocal_tools.portfolio import check_disjoint
from autocal_tools.tweedie import mean_deviance
from autocal_tools.utils import as_vector, check_same_length, check_positive

DEFAULT_ALPHA_GRID = np.round(np.arange(1, 101) / 100, 10)
DEFAULT_SWEEP_GRID = np.round(np.arange(1, 40) * 0.025, 10)


class Ecdf:
    """Empirical distribution function of a score vector, right-continuous."""

    def __init__(self, scores):
        scores = as_vector(scores, "scores")
        if len(scores) == 0:
            raise UsageError("ecdf of an empty score vector")
        self.values, counts = np.unique(scores, return_counts=True)
        self.proportions = np.cumsum(counts) / len(scores)
        self.proportions[-1] = 1.0

    def __call__(self, x):
        scalar_input = np.ndim(x) == 0
        idx = np.searchsorted(self.values, as_vector(x, "x"), side="right")
        out = np.where(idx > 0, self.proportions[np.maximum(idx - 1, 0)], 0.0)
        return float(out[0]) if scalar_input else out


def ecdf(scores):
    return Ecdf(scores)


def _order_index(n, alpha):
    """0-based index of the order statistic s_(ceil(alpha n))."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if np.any(~((alpha > 0) & (alpha <= 1))):
        raise UsageError(f"quantile level must lie in (0, 1], got {alpha}")
    # rounding keeps 0.3 * 10 from becoming 4 through 3.0000000000000004
    k = np.ceil(np.round(alpha * n, 10)).astype(np.int64)
    return np.clip(k, 1, n) - 1


def quantile(scores, alpha):
    """Lower empirical quantile s_(ceil(alpha n)), no interpolation."""
    scores = as_vector(scores, "scores")
    if len(scores) == 0:
        raise UsageError("quantile of an empty score vector")
    s = np.sort(scores)
    out = s[_order_index(len(s), alpha)]
    return float(out) if np.ndim(alpha) == 0 else out


@dataclass
class CurveSeries:
    alpha: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.alpha = as_vector(self.alpha, "alpha")
        self.values = as_vector(self.values, "values")
        check_same_length(alpha=self.alpha, values=self.values)
        if np.any(np.diff(self.alpha) <= 0):
            raise UsageError("curve grid must be strictly increasing")

    def to_frame(self):
        return pd.DataFrame({"alpha": self.alpha, "value": self.values})


def concentration_curve(y, scores, alpha_grid=DEFAULT_ALPHA_GRID):
    """
    Share of the total response carried by the rows scored at or below the alpha quantile:

        CC(alpha) = sum y_i 1(s_i <= q_alpha) / sum y_i

    Pass the true mean instead of y to get the theoretical variant.
    """
    y = as_vector(y, "y")
    scores = as_vector(scores, "scores")
    check_same_length(y=y, scores=scores)
    alpha_grid = as_vector(alpha_grid, "alpha_grid")
    if not np.sum(y) > 0:
        raise DegenerateError("concentration curve needs a positive response total")

    order = np.argsort(scores, kind="stable")
    s_sorted = scores[order]
    cum = np.concatenate([[0.0], np.cumsum(y[order])])
    q = s_sorted[_order_index(len(scores), alpha_grid)]
    idx = np.searchsorted(s_sorted, q, side="right")
    # the full set divides cum[-1] by itself, so CC(1) is exactly 1
    return CurveSeries(alpha=alpha_grid, values=cum[idx] / cum[-1])


def cc_density(curve):
    """dCC/dalpha: central differences inside, one-sided at both ends."""
    a, v = curve.alpha, curve.values
    if len(a) < 3:
        raise UsageError(f"density needs at least 3 curve points, got {len(a)}")
    d = np.empty(len(a))
    d[1:-1] = (v[2:] - v[:-2]) / (a[2:] - a[:-2])
    d[0] = (v[1] - v[0]) / (a[1] - a[0])
    d[-1] = (v[-1] - v[-2]) / (a[-1] - a[-2])
    return CurveSeries(alpha=a, values=d)


@dataclass
class QuantileSets:
    alpha_low: float
    alpha_high: float
    lower: np.ndarray
    upper: np.ndarray


def quantile_sets(scores, alpha_low=0.2, alpha_high=0.8):
    """Rows strictly below the alpha_low quantile and strictly above the alpha_high quantile."""
    if not 0 < alpha_low <= alpha_high < 1:
        raise UsageError(f"need 0 < alpha_low <= alpha_high < 1, got ({alpha_low}, {alpha_high})")
    scores = as_vector(scores, "scores")
    lower = scores < quantile(scores, alpha_low)
    upper = scores > quantile(scores, alpha_high)
    return QuantileSets(alpha_low=alpha_low, alpha_high=alpha_high, lower=lower, upper=upper)


def bias(y, e, scores):
    """(1/n) sum (e_i scores_i - y_i): positive means overpricing."""
    y = as_vector(y, "y")
    e = as_vector(e, "exposure")
    scores = as_vector(scores, "scores")
    check_same_length(y=y, exposure=e, scores=scores)
    check_positive(e, "exposure")
    check_positive(scores, "scores")
    return float(np.mean(e * scores - y))


def empirical_poisson_loss(y, e, scores):
    return mean_deviance(1.0, y, e, scores)


def spearman(a, b):
    """Spearman rank correlation, ties get average ranks."""
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    check_same_length(a=a, b=b)
    if len(a) < 2:
        raise UsageError("spearman needs at least two observations")
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise DegenerateError("rank correlation is undefined for a constant vector")
    rho, _ = spearmanr(a, b)
    return float(rho)


def qq_pairs(a, b, levels=DEFAULT_ALPHA_GRID):
    """Matched lower empirical quantiles of two score vectors, e.g. pi_BC against pi."""
    levels = as_vector(levels, "levels")
    return pd.DataFrame({"alpha": levels, "a": quantile(a, levels), "b": quantile(b, levels)})


def score_summary(scores):
    scores = as_vector(scores, "scores")
    return {"mean": float(np.mean(scores)), "q10": quantile(scores, 0.1), "q90": quantile(scores, 0.9)}


def alpha_sweep(y, e, scores_by_model, train_idx, smooth_idx, valid_idx, alpha0_grid=DEFAULT_SWEEP_GRID,
                kernel=Kernel.RECTANGULAR, alpha1=0.0, verbose=False, logger=None):
    """
    Validation bias and Poisson loss of autocalibrated scorers as a function of alpha0.

    Args:
        y, e: responses and exposures of the whole portfolio.
        scores_by_model (dict): model name -> scores on every row of the portfolio.
        train_idx, smooth_idx, valid_idx: disjoint index sets. The scorers were fitted on
            train_idx, the correction is learnt on smooth_idx and judged on valid_idx.
        alpha0_grid: nearest neighbour fractions in (0, 1].
        kernel, alpha1: smoother settings shared by every grid point.

    Returns:
        pandas.DataFrame with columns alpha0, bias, loss, model. The uncorrected validation
        bias and loss per model are in df.attrs["baseline"].
    """
    logger = logger if logger else default_logger()
    check_disjoint(train_idx, smooth_idx, valid_idx)
    y = as_vector(y, "y")
    e = as_vector(e, "exposure")
    alpha0_grid = as_vector(alpha0_grid, "alpha0_grid")

    rows = []
    baseline = {}
    for model in sorted(scores_by_model):
        scores = as_vector(scores_by_model[model], model)
        check_same_length(y=y, scores=scores)
        s_smooth, s_valid = scores[smooth_idx], scores[valid_idx]
        y_valid, e_valid = y[valid_idx], e[valid_idx]
        baseline[model] = {"bias": bias(y_valid, e_valid, s_valid),
                           "loss": empirical_poisson_loss(y_valid, e_valid, s_valid)}

        for alpha0 in tqdm(alpha0_grid, desc=f"sweep {model}", disable=not verbose):
            corrected = autocalibrate(s_smooth, y[smooth_idx], e[smooth_idx], s_valid, kernel=kernel,
                                      bandwidth=BandwidthSpec(float(alpha0), alpha1), logger=logger)
            rows.append({"alpha0": float(alpha0), "bias": bias(y_valid, e_valid, corrected),
                         "loss": empirical_poisson_loss(y_valid, e_valid, corrected), "model": model})

    df = pd.DataFrame(rows, columns=["alpha0", "bias", "loss", "model"])
    df.attrs["baseline"] = baseline
    logger.print(f"alpha_sweep: {len(alpha0_grid)} bandwidths x {len(baseline)} models")
    return df
