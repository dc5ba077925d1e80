import math

import numpy as np
import pytest

from attractlab import endo, green
from attractlab import projgeom as pg
from attractlab.errors import ParameterError


def test_green_power_map_closed_form(pow2, rng):
    g, tail = green.green_value(pow2, np.array([1, 1, 1], dtype=complex), 40)
    assert abs(g) < 1e-12
    g, _ = green.green_value(pow2, np.array([2, 1, 1], dtype=complex), 40)
    assert abs(g - math.log(2)) < 1e-9
    z = rng.standard_normal((1000, 3)) + 1j * rng.standard_normal((1000, 3))
    g, _ = green.green_value(pow2, z, 40)
    assert np.max(np.abs(g - np.log(np.abs(z)).max(axis=1))) < 1e-9


def test_green_scale_covariance(lin, rng):
    ge = green.GreenEval(lin(0.02))
    z = rng.standard_normal((100, 3)) + 1j * rng.standard_normal((100, 3))
    c = 3.0 - 2.0j
    assert np.allclose(ge.value(c * z), ge.value(z) + math.log(abs(c)), atol=1e-12)


@pytest.mark.parametrize("name", ["lin", "sinks"])
def test_green_functional_equation(name, lin, sinks, rng):
    f = lin(0.02) if name == "lin" else sinks
    ge = green.GreenEval(f)
    z = rng.standard_normal((1000, 3)) + 1j * rng.standard_normal((1000, 3))
    n = 40
    resid = np.abs(ge.value(f.lift(z), n) - f.d * ge.value(z, n))
    assert np.max(resid) <= 2 * f.d * ge.tail_bound(n) + 1e-12


def test_green_self_consistency(sinks):
    ge = green.GreenEval(sinks)
    z = np.array([0.3, 0.2, 1.0], dtype=complex)  # bounded orbit in the chart
    assert abs(ge.value(z, 20) - ge.value(z, 40)) <= 2 * ge.tail_bound(20)


def test_slice_power_map_circle(pow2):
    sm = green.slice_measure(pow2, ([1, 0, 0], [0, 1, 0]),
                             {"kind": "polar", "tmax": 8.0, "nt": 161, "ntheta": 64})
    r = np.abs(sm.zeta)
    assert abs(sm.mass - 1) < 0.02
    assert sm.atoms.weights[(r > 0.9) & (r < 1.1)].sum() >= 0.98
    assert abs(np.sum(sm.atoms.weights * sm.zeta)) < 0.01


def test_slice_square_grid_mass(pow2):
    sm = green.slice_measure(pow2, ([1, 0, 0], [0, 1, 0]), {"kind": "square", "h": 0.02,
                                                            "radius": 2.0})
    assert abs(sm.mass - 1) < 0.02
    assert sm.clipped_mass < 0.01 * sm.raw_mass


def test_atomic_measure_csv_roundtrip(tmp_path, rng):
    pts = pg.random_points(rng, 5)
    m = green.AtomicMeasure(pts, np.full(5, 0.2), {})
    path = tmp_path / "atoms.csv"
    m.to_csv(path)
    back = green.AtomicMeasure.from_csv(path)
    assert np.array_equal(back.points, pts) and np.array_equal(back.weights, m.weights)


def test_preimage_examples(pow2, sinks):
    one = green.preimages(pow2, [1, 1, 1], 1)
    assert one.count == 4 and len(one) == 4
    chart = endo.chart_coords(one.points, 2)
    assert np.allclose(np.sort_complex(np.round(chart[:, 0] * chart[:, 1], 12)), [-1, -1, 1, 1])
    assert green.preimages(pow2, [1, 1, 1], 2).count == 16
    pre = green.preimages(sinks, [0, 0, 1], 1)
    assert pre.count == 4 and len(pre) == 2
    assert sorted(pre.multiplicities.tolist()) == [2, 2]
    zs = np.sort(endo.chart_coords(pre.points, 2)[:, 0].real)
    assert np.allclose(zs, [-1, 1])


def test_preimage_completeness_generic(pow2, sinks, lin, rng):
    for f in (pow2, sinks, lin(0.02)):
        x = pg.random_points(rng, 1)[0]
        for n in (1, 2, 3):
            pre = green.preimages(f, x, n, rng=rng)
            assert pre.count == 4 ** n
            assert np.max(pre.residuals) < 1e-8


def test_preimage_cap(pow2):
    with pytest.raises(ParameterError):
        green.preimages(pow2, [1, 1, 1], 7)


def test_mu_sample_power_map(pow2, rng):
    mu = green.mu_sample(pow2, 500, 20, rng)
    a = np.abs(mu.points)
    ok = (np.abs(a[:, 0] - a[:, 1]) < 0.05) & (np.abs(a[:, 1] - a[:, 2]) < 0.05)
    assert ok.mean() >= 0.95


def test_mu_avoids_lin_region(lin, rng):
    from attractlab import trapping as tr
    mu = green.mu_sample(lin(0.0), 2000, 20, rng)
    assert tr.Gauge(0.2).contains(mu.points).mean() < 0.01


def test_mu_invariance(lin, rng):
    f = lin(0.02)
    mu = green.mu_sample(f, 4000, 20, rng)
    y, _ = endo.apply(f, mu.points)
    def moment(p):
        return np.mean(np.minimum(np.abs(p[:, 0] / p[:, 2]), 50))
    assert abs(moment(mu.points) - moment(y)) < 0.05 * max(1.0, moment(mu.points))
