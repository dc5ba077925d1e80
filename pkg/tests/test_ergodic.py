import math

import numpy as np
import pytest

from attractlab import ergodic as eg
from attractlab import green
from attractlab import trapping as tr
from attractlab.errors import BadMeasure

LOG2 = math.log(2)


def circle_haar(rng, count):
    """Random-angle atoms of the Haar measure on the unit circle of {z2 = 0}."""
    th = rng.uniform(0, 2 * np.pi, count)
    pts = np.stack([np.ones(count), np.exp(1j * th), np.zeros(count)], axis=1) / math.sqrt(2)
    return green.AtomicMeasure(pts, np.full(count, 1.0 / count))


def test_lyapunov_line_exponents(lin, rng):
    rep = eg.lyapunov(lin(0.0), circle_haar(rng, 200), n=30, samples=200, rng=rng)
    assert rep.exponents[0] == pytest.approx(LOG2, abs=1e-3)
    assert rep.exponents[1] == -np.inf


def test_lyapunov_pow_torus(pow2, rng):
    th = rng.uniform(0, 2 * np.pi, (300, 2))
    pts = np.concatenate([np.ones((300, 1)), np.exp(1j * th)], axis=1) / math.sqrt(3)
    rep = eg.lyapunov(pow2, green.AtomicMeasure(pts, np.ones(300)), n=20, samples=200, rng=rng)
    assert rep.lifted[0] == pytest.approx(LOG2, abs=1e-3)
    assert rep.radial == pytest.approx(LOG2, abs=1e-3)


def test_lyapunov_region_without_atoms(lin, rng):
    with pytest.raises(BadMeasure):
        eg.lyapunov(lin(0.0), circle_haar(rng, 50), region=tr.BallUnion([[0, 0, 1]], [0.1]))


def test_mixing_doubling_mode(lin, rng):
    phi = eg.coord_ratio(1, 0)
    rep = eg.mixing_correlations(lin(0.0), circle_haar(rng, 10000), phi, phi, n_max=5)
    assert rep.values[0] == pytest.approx(0.5, abs=0.02)
    assert np.all(np.abs(rep.values[1:]) < 0.02)


def test_mixing_constant_observable(lin, rng):
    rep = eg.mixing_correlations(lin(0.02), circle_haar(rng, 500), eg.coord_ratio(1, 0),
                                 eg.constant(3.0), n_max=4)
    assert np.max(np.abs(rep.values)) < 1e-15


def test_topdeg_backward_fiber(lin):
    # backward fibre modulus 1e-4 ** 2**-n passes 0.2 at n = 3
    rep = eg.small_topdeg_rate(lin(0.0), tr.Gauge(0.2), [[1, 0.7, 1e-4]], n_max=4)
    assert list(rep.counts[0]) == [4, 16, 0, 0]


def test_topdeg_outside_and_bezout(lin, rng):
    out = eg.small_topdeg_rate(lin(0.0), tr.Gauge(0.2), [[1, 0.7, 0.5]], n_max=1)
    assert out.counts[0, 0] == 0
    x = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    full = eg.small_topdeg_rate(lin(0.02), tr.Gauge(1e9), x, n_max=2)
    assert np.array_equal(full.counts, [[4, 16], [4, 16]])


def test_wedge_vanishes_on_line(lin, rng):
    th = rng.uniform(0, 2 * np.pi, 50)
    r = rng.uniform(0.2, 3, 50)
    x = np.stack([np.ones(50), r * np.exp(1j * th), np.zeros(50)], axis=1)
    assert np.max(eg.wedge_norm(lin(0.0), x)) < 1e-14


def test_contraction_pow_fails(pow2, rng):
    rep = eg.contraction_check(pow2, tr.Gauge(1.5), samples=20000, rng=rng)
    assert rep.sup > 1 and not rep.passed


def test_dloc_empty_region(lin, rng):
    rep = eg.dloc_estimate(lin(0.0), tr.BallUnion([[0, 0, 1]], [1e-6]), n_max=3, samples=2000, rng=rng)
    assert rep.hits == 0
    assert np.all(rep.mass == 0) and rep.rate == 0.0


def test_fit_slope_exact_line():
    slope, window = eg.fit_slope(0.7 * np.arange(8) + 1.0)
    assert slope == pytest.approx(0.7) and window == (0, 7)


def test_entropy_counts_monotone(lin, rng):
    rep = eg.entropy_estimate(lin(0.0), tr.Gauge(0.2), n=5, eps=(0.1, 0.2), budget=20000, rng=rng)
    c = rep.counts
    assert np.all(np.diff(c, axis=0) >= 0)
    assert np.all(c[:, 0] >= c[:, 1])
