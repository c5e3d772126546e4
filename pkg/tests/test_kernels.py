"""The numba and numpy paths must agree bit for bit."""

import numpy as np
import pytest

from tempbell import kernels
from tempbell.geometry import reference_config_18
from tempbell.lhv import RealityDistribution
from tempbell.quantum import QubitState, branch_tables

pytestmark = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


def test_env_flag_disables_numba(monkeypatch):
    monkeypatch.setenv("TBS_NO_NUMBA", "1")
    assert not kernels.numba_enabled()
    monkeypatch.setenv("TBS_NO_NUMBA", "0")
    assert kernels.numba_enabled()


def test_reality_cdf_pins_tail():
    w = np.array([0.3, 0.3, 0.4, 0, 0, 0, 0, 0])
    cdf = kernels.reality_cdf(w)
    assert np.all(cdf[2:] == 1.0)


def test_lhv_paths_agree(rng):
    d = RealityDistribution.random(rng)
    u = rng.random((50_000, 2))
    cdf = kernels.reality_cdf(d.weights)
    a = kernels.lhv_runs(u[:, 0].copy(), u[:, 1].copy(), cdf, use_numba=True)
    b = kernels.lhv_runs(u[:, 0].copy(), u[:, 1].copy(), cdf, use_numba=False)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


@pytest.mark.parametrize("retain", [0, 1, -1])
def test_qubit_paths_agree(rng, retain):
    cfg = reference_config_18()
    tables = branch_tables(QubitState((0.6, 0.0, 0.8)), cfg)
    u = rng.random((50_000, 3))
    f1, s1 = kernels.decode_pairs(u[:, 0].copy(), use_numba=True)
    f2, s2 = kernels.decode_pairs(u[:, 0].copy(), use_numba=False)
    assert np.array_equal(f1, f2) and np.array_equal(s1, s2)
    a = kernels.qubit_runs(f1, s1, u[:, 1].copy(), u[:, 2].copy(), *tables, retain=retain, use_numba=True)
    b = kernels.qubit_runs(f1, s1, u[:, 1].copy(), u[:, 2].copy(), *tables, retain=retain, use_numba=False)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@pytest.mark.parametrize("obj", [kernels.OBJ_INEQ16, kernels.OBJ_INEQ18])
def test_grid_paths_agree(obj):
    polar = np.deg2rad(np.arange(0, 181, 3.0))
    az = np.deg2rad(np.arange(0, 360, 3.0))
    a = kernels.grid_scan(obj, polar, polar, az, use_numba=True)
    b = kernels.grid_scan(obj, polar, polar, az, use_numba=False)
    assert a[0] == b[0] and a[1] == b[1] and a[4] == b[4]
    assert np.array_equal(a[2], b[2]) and np.array_equal(a[3], b[3])


def test_pair_decoding_is_uniform_and_in_range(rng):
    f, s = kernels.decode_pairs(rng.random(90_000))
    counts = np.bincount(f.astype(int) * 3 + s, minlength=9)
    assert counts.size == 9 and counts.min() > 9000
    f, s = kernels.decode_pairs(np.array([0.0, np.nextafter(1.0, 0.0)]))
    assert (f[0], s[0]) == (0, 0) and (f[1], s[1]) == (2, 2)
