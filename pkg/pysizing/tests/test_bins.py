"""PySizing bins tests"""
import numpy as np
from numpy.testing import assert_equal, assert_raises, assert_array_almost_equal

from pysizing import bins


def test_decade_space():
    obs = bins.decade_space(1.0, 100.0, 2)
    exp = np.array([1.0, 3.16227766, 10.0, 31.6227766, 100.0])
    assert_array_almost_equal(obs, exp)
    assert_equal(len(bins.decade_space(1.0, 1e10, 20)), 201)
    assert_raises(ValueError, bins.decade_space, 0.0, 10.0)


def test_sweep_space():
    obs = bins.sweep_space(0.0, 1.8, 0.05)
    assert_equal(len(obs), 37)
    assert_equal(obs[-1], 1.8)
    assert_array_almost_equal(np.diff(obs), 0.05 * np.ones(36))
    assert_equal(len(bins.sweep_space(0.0, 1.8, 1e-3)), 1801)
    assert_raises(ValueError, bins.sweep_space, 1.0, 0.0, 0.1)


def test_period_grid():
    t = bins.period_grid(0.02, 1e3, 8, 16)
    assert_equal(len(t), 16)
    assert_array_almost_equal(t[0], 0.012)
    assert_array_almost_equal(t[-1] + 8e-3 / 16, 0.02)


def test_contiguous_runs():
    assert_equal(bins.contiguous_runs(np.array([0, 1, 1, 0, 1], dtype=bool)), [(1, 3), (4, 5)])
    assert_equal(bins.contiguous_runs(np.ones(3, dtype=bool)), [(0, 3)])
    assert_equal(bins.contiguous_runs(np.zeros(3, dtype=bool)), [])
    assert_equal(bins.contiguous_runs([]), [])
