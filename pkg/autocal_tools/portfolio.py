#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import os
from dataclasses import dataclass, field
from typing import List, Optional, Tuple
import numpy as np
import pandas as pd
from autocal_tools.exceptions import DataError, UsageError
from autocal_tools.logprint import default_logger
from autocal_tools.utils import write_frame

REQUIRED_COLUMNS = ["y", "exposure"]


@dataclass
class Dataset:
    """
    A portfolio: responses y >= 0, exposures e > 0 and a feature matrix.
    mu holds the true mean when the data was simulated (oracle only, never fitted on).
    """
    y: np.ndarray
    exposure: np.ndarray
    features: np.ndarray
    feature_names: List[str] = field(default_factory=list)
    mu: Optional[np.ndarray] = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64)
        self.exposure = np.asarray(self.exposure, dtype=np.float64)
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim == 1:
            self.features = self.features.reshape(-1, 1)
        if not self.feature_names:
            self.feature_names = [f"x{j + 1}" for j in range(self.features.shape[1])]
        if self.mu is not None:
            self.mu = np.asarray(self.mu, dtype=np.float64)
        n = len(self.y)
        if len(self.exposure) != n or self.features.shape[0] != n:
            raise UsageError("y, exposure and features must have the same number of rows")

    @property
    def n_rows(self):
        return len(self.y)

    def subset(self, idx):
        return Dataset(
            y=self.y[idx],
            exposure=self.exposure[idx],
            features=self.features[idx],
            feature_names=list(self.feature_names),
            mu=None if self.mu is None else self.mu[idx],
        )

    def to_frame(self):
        columns = {"y": self.y, "exposure": self.exposure}
        for j, name in enumerate(self.feature_names):
            columns[name] = self.features[:, j]
        if self.mu is not None:
            columns["mu"] = self.mu
        return pd.DataFrame(columns)


def _parse_cell(cell):
    try:
        return float(cell)
    except ValueError:
        return np.nan


def _numeric_column(df, name):
    # float() is correctly rounded, so 17-digit output reads back bit-identical
    values = np.fromiter((_parse_cell(c) for c in df[name]), dtype=np.float64, count=len(df))
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.argmax(bad)) + 1
        raise DataError(f"row {row}: column '{name}' holds a non-numeric value {df[name].iloc[row - 1]!r}")
    return values


def _read_csv(fp_csv):
    try:
        return pd.read_csv(fp_csv, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"{fp_csv}: {exc}") from exc


def ingest(fp_csv, logger=None):
    """
    Read a portfolio CSV. Required columns: y, exposure. Optional: x1..xp, mu.

    Args:
        fp_csv (str): Path of the CSV file (header required).
        logger: LogPrint instance, optional.

    Returns:
        Dataset

    Raises:
        DataError: missing column, non-numeric cell, exposure <= 0 or y < 0. Row numbers are
            1-based data rows (the header is not counted).
    """
    logger = logger if logger else default_logger()
    if not os.path.isfile(fp_csv):
        raise UsageError(f"Input file not found: {fp_csv}")

    df = _read_csv(fp_csv)
    df.columns = [c.strip() for c in df.columns]
    for name in REQUIRED_COLUMNS:
        if name not in df.columns:
            raise DataError(f"{fp_csv}: missing required column '{name}'")

    y = _numeric_column(df, "y")
    exposure = _numeric_column(df, "exposure")

    bad_y = np.flatnonzero(y < 0)
    if len(bad_y):
        raise DataError(f"row {bad_y[0] + 1}: y must be nonnegative, got {y[bad_y[0]]}")
    bad_e = np.flatnonzero(~(exposure > 0) | ~np.isfinite(exposure))
    if len(bad_e):
        raise DataError(f"row {bad_e[0] + 1}: exposure must be positive, got {exposure[bad_e[0]]}")

    feature_names = sorted((c for c in df.columns if c.startswith("x") and c[1:].isdigit()),
                           key=lambda c: int(c[1:]))
    features = np.column_stack([_numeric_column(df, c) for c in feature_names]) if feature_names \
        else np.zeros((len(df), 0))

    mu = None
    if "mu" in df.columns:
        mu = _numeric_column(df, "mu")
        if np.any(mu <= 0):
            bad = int(np.argmax(mu <= 0))
            raise DataError(f"row {bad + 1}: mu must be positive, got {mu[bad]}")

    logger.print(f"ingest: {len(df)} rows from {fp_csv}, columns {list(df.columns)}")
    return Dataset(y=y, exposure=exposure, features=features, feature_names=feature_names, mu=mu)


def write_dataset(dataset, fp_csv):
    """Header y,exposure,x1[,x2][,mu]; floats with 17 significant digits so ingest round-trips."""
    write_frame(dataset.to_frame(), fp_csv)


def read_scores(fp_csv):
    """Score CSV with columns row_id,score, returned ordered by row_id. The ids must be 0..n-1."""
    if not os.path.isfile(fp_csv):
        raise UsageError(f"Score file not found: {fp_csv}")
    df = _read_csv(fp_csv)
    for name in ["row_id", "score"]:
        if name not in df.columns:
            raise DataError(f"{fp_csv}: missing required column '{name}'")
    row_id = _numeric_column(df, "row_id")
    if not np.array_equal(np.sort(row_id), np.arange(len(row_id))):
        raise DataError(f"{fp_csv}: row_id must be 0..{len(row_id) - 1} without gaps or duplicates")
    row_id = row_id.astype(np.int64)
    score = _numeric_column(df, "score")
    order = np.argsort(row_id, kind="stable")
    return score[order]


def write_scores(scores, fp_csv):
    df = pd.DataFrame({"row_id": np.arange(len(scores)), "score": np.asarray(scores, dtype=np.float64)})
    write_frame(df, fp_csv)


def split_indices(n, fractions=(0.6, 0.2, 0.2), seed=42) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Disjoint seeded train / smoothing / validation index sets.

    Fractions must be positive and sum to at most 1; rows left over are unused.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3:
        raise UsageError(f"need three split fractions, got {fractions}")
    if any(f <= 0 for f in fractions):
        raise UsageError(f"split fractions must be positive, got {fractions}")
    if sum(fractions) > 1 + 1e-12:
        raise UsageError(f"split fractions sum to {sum(fractions)} > 1: {fractions}")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    # guard against 1/3 * 3n landing just below an integer
    sizes = [int(np.floor(f * n + 1e-9)) for f in fractions]
    if any(s == 0 for s in sizes):
        raise UsageError(f"split of {n} rows with fractions {fractions} leaves an empty set")
    cut1 = sizes[0]
    cut2 = cut1 + sizes[1]
    cut3 = cut2 + sizes[2]
    return np.sort(perm[:cut1]), np.sort(perm[cut1:cut2]), np.sort(perm[cut2:cut3])


def check_disjoint(*index_sets):
    seen = set()
    for idx in index_sets:
        idx = set(np.asarray(idx).tolist())
        if seen & idx:
            raise UsageError("train, smoothing and validation sets overlap")
        seen |= idx
