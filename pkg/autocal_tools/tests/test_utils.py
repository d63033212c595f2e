#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import unittest
import os
import json
import tempfile
import numpy as np
import pandas as pd
import pytest
from autocal_tools.exceptions import UsageError, DomainError
from autocal_tools.utils import (
    read_config, get_setting, atomic_write, write_frame, write_json,
    as_vector, check_same_length, check_positive,
)


class TestConfigUtils(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.TemporaryDirectory()
        self.fp_config = os.path.join(self.tmpdir.name, "config.json")
        with open(self.fp_config, "w") as f:
            json.dump({"seed": 7, "alpha0": "0.1"}, f)
        os.environ.pop("AUTOCAL_SEED", None)

    def tearDown(self):
        os.environ.pop("AUTOCAL_SEED", None)
        self.tmpdir.cleanup()

    def test_read_config(self):
        self.assertEqual(read_config(self.fp_config)["seed"], 7)
        self.assertEqual(read_config(None), {})

    def test_read_config_missing(self):
        with self.assertRaises(UsageError):
            read_config(os.path.join(self.tmpdir.name, "nope.json"))

    def test_read_config_invalid(self):
        fp = os.path.join(self.tmpdir.name, "bad.json")
        with open(fp, "w") as f:
            f.write("{not json")
        with self.assertRaises(UsageError):
            read_config(fp)

    def test_setting_precedence(self):
        config = read_config(self.fp_config)
        self.assertEqual(get_setting("seed", config, default=1, cast=int), 7)
        os.environ["AUTOCAL_SEED"] = "11"
        self.assertEqual(get_setting("seed", config, default=1, cast=int), 11)
        self.assertEqual(get_setting("missing", config, default=3), 3)
        self.assertAlmostEqual(get_setting("alpha0", config, cast=float), 0.1)

    def test_setting_bad_cast(self):
        with self.assertRaises(UsageError):
            get_setting("alpha0", {"alpha0": "abc"}, cast=float)


class TestWriters(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmpdir.cleanup()

    def test_atomic_write_creates_dirs(self):
        fp = os.path.join(self.tmpdir.name, "a", "b", "out.txt")
        atomic_write(fp, "hello\n")
        with open(fp) as f:
            self.assertEqual(f.read(), "hello\n")
        self.assertEqual([n for n in os.listdir(os.path.dirname(fp)) if n.startswith(".tmp_")], [])

    def test_write_frame_keeps_full_precision(self):
        fp = os.path.join(self.tmpdir.name, "frame.csv")
        x = np.array([0.1, 1 / 3, 2.0 ** -40])
        write_frame(pd.DataFrame({"x": x}), fp)
        back = [float(line) for line in open(fp).read().splitlines()[1:]]
        np.testing.assert_array_equal(back, x)

    def test_write_json_sorted(self):
        fp = os.path.join(self.tmpdir.name, "r.json")
        write_json({"b": 1, "a": 2}, fp)
        text = open(fp).read()
        self.assertLess(text.index('"a"'), text.index('"b"'))


def test_as_vector():
    assert as_vector(3.0).shape == (1,)
    assert as_vector([1, 2]).dtype == np.float64
    with pytest.raises(UsageError):
        as_vector(np.zeros((2, 2)))


def test_checks():
    check_same_length(a=[1, 2], b=[3, 4])
    with pytest.raises(UsageError):
        check_same_length(a=[1, 2], b=[3])
    with pytest.raises(DomainError):
        check_positive(np.array([1.0, 0.0]), "x")
