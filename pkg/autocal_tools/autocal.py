#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Autocalibration: correct a predictor by the local constant (intercept-only) GLM
of the response on the score itself,

    pi_BC(s) = sum nu_i y_i / sum nu_i e_i,   nu_i = nu((s_i - s) / h(s)),

with a nearest neighbour bandwidth h(s) = max(d_(k), alpha1), k = max(1, floor(n alpha0)).
With the rectangular kernel the sums run over a closed window of anchors, which
is the method of marginal totals on score neighbourhoods.
"""

from enum import Enum
from dataclasses import dataclass
import numpy as np
from sklearn.isotonic import IsotonicRegression
from autocal_tools.exceptions import UsageError, DomainError, DegenerateError
from autocal_tools.logprint import default_logger
from autocal_tools.utils import as_vector, check_same_length, check_positive


class Kernel(str, Enum):
    RECTANGULAR = "rectangular"
    TRICUBE = "tricube"
    EPANECHNIKOV = "epanechnikov"

    def weights(self, u):
        """nu(u): symmetric, supported on [-1, 1], maximal at 0."""
        a = np.abs(u)
        inside = a <= 1
        if self == Kernel.RECTANGULAR:
            return inside.astype(np.float64)
        if self == Kernel.TRICUBE:
            return np.where(inside, (1 - a ** 3) ** 3, 0.0)
        return np.where(inside, 1 - a ** 2, 0.0)


@dataclass(frozen=True)
class BandwidthSpec:
    """
    Args:
        alpha0 (float): nearest neighbour fraction in (0, 1].
        alpha1 (float): constant bandwidth floor in score units, >= 0.
    """
    alpha0: float = 0.05
    alpha1: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha0 <= 1:
            raise UsageError(f"alpha0 must lie in (0, 1], got {self.alpha0}")
        if not self.alpha1 >= 0:
            raise UsageError(f"alpha1 must be >= 0, got {self.alpha1}")

    def k(self, n):
        # floor(n * alpha0) can land one below an integer product in floating point
        return int(min(n, max(1, np.floor(n * self.alpha0 + 1e-9))))


AUTOCAL_BANDWIDTH = BandwidthSpec(0.05, 0.0)
CURVE_BANDWIDTH = BandwidthSpec(0.7, 0.0)


class CalibrationMap:
    def __init__(self, scores, y, e, kernel=Kernel.RECTANGULAR, bandwidth=AUTOCAL_BANDWIDTH,
                 monotone_projection=False, logger=None):
        """
        Local constant GLM of (y, e) on the scores of a smoothing set.

        Args:
            scores: anchor scores s_i (finite).
            y: anchor responses.
            e: anchor exposures (> 0).
            kernel (Kernel or str): rectangular, tricube or epanechnikov.
            bandwidth (BandwidthSpec): nearest neighbour fraction and constant floor.
            monotone_projection (bool): project the map onto nondecreasing functions
                (pool adjacent violators over the distinct anchor scores) before lookup.
            logger: LogPrint instance, optional.
        """
        self.logger = logger if logger else default_logger()
        scores = as_vector(scores, "scores")
        y = as_vector(y, "y")
        e = as_vector(e, "exposure")
        check_same_length(scores=scores, y=y, exposure=e)
        if len(scores) == 0:
            raise UsageError("the smoothing set is empty")
        if not np.all(np.isfinite(scores)):
            raise DomainError("anchor scores must be finite")
        check_positive(e, "exposure")

        order = np.argsort(scores, kind="stable")
        self.s = scores[order]
        self.y = y[order]
        self.e = e[order]
        self.kernel = Kernel(kernel)
        self.bandwidth = bandwidth
        self.n = len(self.s)
        self.k = bandwidth.k(self.n)
        self.cum_y = np.concatenate([[0.0], np.cumsum(self.y)])
        self.cum_e = np.concatenate([[0.0], np.cumsum(self.e)])
        # window of k consecutive anchors starting at j: centre criterion s_j + s_{j+k-1}
        self._pair_sums = self.s[: self.n - self.k + 1] + self.s[self.k - 1:]

        self.monotone_projection = monotone_projection
        self._isotonic = None
        if monotone_projection:
            grid = np.unique(self.s)
            raw = self._evaluate_raw(grid)
            self._isotonic = IsotonicRegression(increasing=True, out_of_bounds="clip").fit(grid, raw)

        self.logger.print(f"CalibrationMap: {self.n} anchors, kernel={self.kernel.value}, "
                          f"alpha=({bandwidth.alpha0}, {bandwidth.alpha1}), k={self.k}")

    @property
    def global_rate(self):
        return float(self.cum_y[-1] / self.cum_e[-1])

    def _kth_distance(self, q):
        """d_(k) per query: the k nearest anchors form a contiguous block of the sorted scores."""
        last = self.n - self.k
        j = np.searchsorted(self._pair_sums, 2 * q, side="left")
        j_hi = np.clip(j, 0, last)
        j_lo = np.clip(j - 1, 0, last)

        def radius(jj):
            return np.maximum(q - self.s[jj], self.s[jj + self.k - 1] - q)

        return np.minimum(radius(j_hi), radius(j_lo))

    def bandwidth_at(self, s):
        """
        h(s) = max(d_(k), alpha1). Zero means at least k anchors sit exactly at s, and the
        window is those tied anchors.
        """
        scalar_input = np.ndim(s) == 0
        q = as_vector(s, "s")
        h = np.maximum(self._kth_distance(q), self.bandwidth.alpha1)
        return float(h[0]) if scalar_input else h

    def _window(self, q, h):
        """Closed windows [q - h, q + h] as index ranges [lo, hi) into the sorted anchors."""
        lo = np.searchsorted(self.s, q - h, side="left")
        hi = np.searchsorted(self.s, q + h, side="right")
        # membership must agree with the distances that defined h, not with rounded q +- h
        prev = np.maximum(lo - 1, 0)
        grow = (lo > 0) & (q - self.s[prev] <= h)
        lo = np.where(grow, np.searchsorted(self.s, self.s[prev], side="left"), lo)
        cur = np.minimum(lo, self.n - 1)
        shrink = (lo < self.n) & (q - self.s[cur] > h)
        lo = np.where(shrink, np.searchsorted(self.s, self.s[cur], side="right"), lo)

        nxt = np.minimum(hi, self.n - 1)
        grow = (hi < self.n) & (self.s[nxt] - q <= h)
        hi = np.where(grow, np.searchsorted(self.s, self.s[nxt], side="right"), hi)
        cur = np.maximum(hi - 1, 0)
        shrink = (hi > 0) & (self.s[cur] - q > h)
        hi = np.where(shrink, np.searchsorted(self.s, self.s[cur], side="left"), hi)
        return lo, hi

    def _evaluate_raw(self, q):
        h = self.bandwidth_at(q)
        lo, hi = self._window(q, h)
        assert np.all(hi > lo), "empty smoothing window"

        if self.kernel == Kernel.RECTANGULAR:
            return (self.cum_y[hi] - self.cum_y[lo]) / (self.cum_e[hi] - self.cum_e[lo])

        out = np.empty(len(q))
        for i in range(len(q)):
            s = self.s[lo[i]:hi[i]]
            if h[i] > 0:
                nu = self.kernel.weights((s - q[i]) / h[i])
            else:
                nu = np.ones(len(s))
            if not np.any(nu > 0):
                # only edge anchors in the window, where a smooth kernel vanishes
                nu = np.ones(len(s))
            num = np.dot(nu, self.y[lo[i]:hi[i]])
            den = np.dot(nu, self.e[lo[i]:hi[i]])
            assert den > 0
            out[i] = num / den
        return out

    def evaluate(self, s):
        """pi_BC at the query score(s): a convex combination of the anchor rates y_i / e_i."""
        scalar_input = np.ndim(s) == 0
        q = as_vector(s, "s")
        if not np.all(np.isfinite(q)):
            raise DomainError("query scores must be finite")
        if self._isotonic is not None:
            out = self._isotonic.predict(q)
        else:
            out = self._evaluate_raw(q)
        return float(out[0]) if scalar_input else out

    __call__ = evaluate


def bandwidth_at(s, calibration_map):
    return calibration_map.bandwidth_at(s)


def evaluate(calibration_map, s):
    return calibration_map.evaluate(s)


def autocalibrate(smooth_scores, smooth_y, smooth_e, query_scores, kernel=Kernel.RECTANGULAR,
                  bandwidth=AUTOCAL_BANDWIDTH, monotone_projection=False, logger=None):
    """
    Balance-corrected scores pi_BC for query_scores, learnt on a smoothing set.

    The smoothing set must not overlap the data the scorer was trained on; the CLI and
    alpha_sweep enforce this, direct callers are responsible for it.
    """
    if len(as_vector(smooth_scores, "smooth_scores")) == 0:
        raise UsageError("the smoothing set is empty")
    cmap = CalibrationMap(smooth_scores, smooth_y, smooth_e, kernel=kernel, bandwidth=bandwidth,
                          monotone_projection=monotone_projection, logger=logger)
    return np.atleast_1d(cmap.evaluate(as_vector(query_scores, "query_scores")))


@dataclass
class CalibrationCurve:
    grid: np.ndarray
    values: np.ndarray
    central_low: float
    central_high: float
    departure: float

    @property
    def central_mask(self):
        return (self.grid >= self.central_low) & (self.grid <= self.central_high)

    def share_above_identity(self):
        """Fraction of central grid points where the curve lies above s (underestimation)."""
        mask = self.central_mask
        return float(np.mean(self.values[mask] > self.grid[mask])) if mask.any() else float("nan")


def calibration_curve(scores, y, e, grid=None, kernel=Kernel.RECTANGULAR, bandwidth=CURVE_BANDWIDTH,
                      central=0.8, n_grid=101, logger=None):
    """
    Empirical s -> E[Y | pi(X) = s] and its sup departure from the identity over the central
    share of the score distribution (default: between the 10% and 90% score quantiles).

    Args:
        scores, y, e: the sample the curve is estimated on.
        grid: query scores within [min score, max score]; default n_grid equispaced points.
        kernel, bandwidth: smoother settings, default rectangular alpha = (0.7, 0).
        central (float): share of the score distribution used for the departure.
    """
    scores = as_vector(scores, "scores")
    lo, hi = scores.min(), scores.max()
    if grid is None:
        grid = np.linspace(lo, hi, n_grid)
    grid = as_vector(grid, "grid")
    if np.any(grid < lo) or np.any(grid > hi):
        raise UsageError("calibration grid must lie within the score range")

    cmap = CalibrationMap(scores, y, e, kernel=kernel, bandwidth=bandwidth, logger=logger)
    values = np.atleast_1d(cmap.evaluate(grid))
    tail = (1 - central) / 2
    central_low, central_high = np.quantile(scores, [tail, 1 - tail])
    mask = (grid >= central_low) & (grid <= central_high)
    departure = float(np.max(np.abs(values[mask] - grid[mask]))) if mask.any() else float("nan")
    return CalibrationCurve(grid=grid, values=values, central_low=float(central_low),
                            central_high=float(central_high), departure=departure)


def global_balance_correction(scores, y, e):
    """
    Rescale scores so the expected total matches the observed total: c = sum y / sum (e scores).
    Restores global balance only, local imbalances stay.
    """
    scores = as_vector(scores, "scores")
    y = as_vector(y, "y")
    e = as_vector(e, "exposure")
    check_same_length(scores=scores, y=y, exposure=e)
    check_positive(scores, "scores")
    check_positive(e, "exposure")
    if not y.sum() > 0:
        raise DegenerateError("global balance correction needs a positive response total")
    factor = float(y.sum() / np.sum(e * scores))
    return factor * scores, factor


if __name__ == "__main__":
    cmap = CalibrationMap([1, 2, 3, 4, 5], [0, 1, 2, 1, 4], [1, 1, 1, 1, 1], bandwidth=BandwidthSpec(0.4, 0))
    print(cmap.evaluate(np.array([1.0, 3.0, 5.0])))  # [0.5, 1.333, 2.5]
