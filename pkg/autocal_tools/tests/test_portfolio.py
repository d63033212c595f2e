#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import os
import tempfile
import unittest
import numpy as np
import pytest
from autocal_tools.exceptions import DataError, UsageError
from autocal_tools.portfolio import (
    Dataset, ingest, write_dataset, read_scores, write_scores, split_indices, check_disjoint,
)
from autocal_tools.simdata import SimConfig, simulate


class TestIngest(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmpdir.cleanup()

    def write(self, name, lines):
        fp = os.path.join(self.tmpdir.name, name)
        with open(fp, "w") as f:
            f.write("\n".join(lines) + "\n")
        return fp

    def test_clean_file(self):
        fp = self.write("clean.csv", ["y,exposure,x2,x1", "0,1,5,0.5", "3,0.5,6,1.5", "1,2,7,2.5"])
        ds = ingest(fp)
        self.assertEqual(ds.n_rows, 3)
        self.assertEqual(ds.feature_names, ["x1", "x2"])
        np.testing.assert_array_equal(ds.features[:, 0], [0.5, 1.5, 2.5])
        np.testing.assert_array_equal(ds.exposure, [1.0, 0.5, 2.0])
        self.assertIsNone(ds.mu)

    def test_zero_exposure_names_row(self):
        lines = ["y,exposure,x1"] + [f"1,1,{i}" for i in range(6)] + ["1,0,6", "1,1,7"]
        fp = self.write("bad.csv", lines)
        with self.assertRaisesRegex(DataError, "row 7"):
            ingest(fp)

    def test_negative_response(self):
        fp = self.write("neg.csv", ["y,exposure", "1,1", "-2,1"])
        with self.assertRaisesRegex(DataError, "row 2"):
            ingest(fp)

    def test_missing_column(self):
        fp = self.write("nocol.csv", ["y,x1", "1,1"])
        with self.assertRaisesRegex(DataError, "exposure"):
            ingest(fp)

    def test_non_numeric(self):
        fp = self.write("text.csv", ["y,exposure,x1", "1,1,0.5", "1,1,abc"])
        with self.assertRaisesRegex(DataError, "row 2"):
            ingest(fp)

    def test_missing_file(self):
        with self.assertRaises(UsageError):
            ingest(os.path.join(self.tmpdir.name, "absent.csv"))

    def test_round_trip_is_bit_identical(self):
        ds = simulate(SimConfig(n=300, seed=13, shape="bivariate"))
        fp = os.path.join(self.tmpdir.name, "data.csv")
        write_dataset(ds, fp)
        back = ingest(fp)
        np.testing.assert_array_equal(back.y, ds.y)
        np.testing.assert_array_equal(back.exposure, ds.exposure)
        np.testing.assert_array_equal(back.features, ds.features)
        np.testing.assert_array_equal(back.mu, ds.mu)
        self.assertEqual(back.feature_names, ["x1", "x2"])

    def test_scores_round_trip(self):
        fp = os.path.join(self.tmpdir.name, "scores.csv")
        scores = np.array([0.1, 2 / 3, 7.25])
        write_scores(scores, fp)
        np.testing.assert_array_equal(read_scores(fp), scores)

    def test_scores_sorted_by_row_id(self):
        fp = self.write("scores.csv", ["row_id,score", "2,30", "0,10", "1,20"])
        np.testing.assert_array_equal(read_scores(fp), [10.0, 20.0, 30.0])

    def test_scores_row_ids_must_cover_rows(self):
        duplicate = self.write("dup.csv", ["row_id,score", "0,10", "0,20", "1,30"])
        with self.assertRaises(DataError):
            read_scores(duplicate)
        gap = self.write("gap.csv", ["row_id,score", "0,10", "2,20", "3,30"])
        with self.assertRaises(DataError):
            read_scores(gap)

    def test_ragged_and_empty_files(self):
        ragged = self.write("ragged.csv", ["y,exposure,x1", "1,1,0", "1,1,0,5,6"])
        with self.assertRaises(DataError):
            ingest(ragged)
        empty = os.path.join(self.tmpdir.name, "empty.csv")
        open(empty, "w").close()
        with self.assertRaises(DataError):
            ingest(empty)
        with self.assertRaises(DataError):
            read_scores(empty)


class TestDataset(unittest.TestCase):
    def test_length_check(self):
        with self.assertRaises(UsageError):
            Dataset(y=[1.0, 2.0], exposure=[1.0], features=[0.0, 1.0])

    def test_subset(self):
        ds = simulate(SimConfig(n=50, seed=1))
        sub = ds.subset(np.array([3, 7]))
        np.testing.assert_array_equal(sub.y, ds.y[[3, 7]])
        np.testing.assert_array_equal(sub.mu, ds.mu[[3, 7]])


def test_split_sizes_and_disjoint():
    train, smooth, valid = split_indices(1000, (0.6, 0.2, 0.2), seed=42)
    assert (len(train), len(smooth), len(valid)) == (600, 200, 200)
    check_disjoint(train, smooth, valid)
    assert len(np.union1d(np.union1d(train, smooth), valid)) == 1000


def test_split_leaves_rows_unused():
    train, smooth, valid = split_indices(900, (1 / 3, 1 / 3, 0.2), seed=1)
    assert (len(train), len(smooth), len(valid)) == (300, 300, 180)


def test_split_deterministic():
    a = split_indices(500, seed=3)
    b = split_indices(500, seed=3)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_split_rejects_bad_fractions():
    with pytest.raises(UsageError):
        split_indices(100, (0.7, 0.4, 0.2))
    with pytest.raises(UsageError):
        split_indices(100, (0.5, 0.0, 0.2))
    with pytest.raises(UsageError):
        split_indices(3, (0.2, 0.2, 0.2))


def test_check_disjoint_overlap():
    with pytest.raises(UsageError):
        check_disjoint([0, 1, 2], [2, 3], [4])


if __name__ == "__main__":
    pytest.main([__file__])
