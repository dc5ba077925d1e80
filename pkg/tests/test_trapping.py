import numpy as np
import pytest

from attractlab import attractor as at
from attractlab import endo
from attractlab import projgeom as pg
from attractlab import trapping as tr
from attractlab.errors import ParameterError


def test_gauge_scale_invariant(rng):
    g = tr.Gauge(0.2)
    x = pg.random_points(rng, 200)
    s = (rng.standard_normal(200) + 1j * rng.standard_normal(200))[:, None]
    assert np.array_equal(g.contains(x), g.contains(x * s))
    assert np.allclose(g.value(x), g.value(x * s))


def test_gauge_boundary_and_interior(rng):
    g = tr.Gauge(0.3)
    assert np.allclose(g.value(g.sample_boundary(rng, 500)), 0.3)
    assert np.all(g.contains(g.sample_interior(rng, 500)))


def test_ball_radius_bounds():
    with pytest.raises(ParameterError):
        tr.BallUnion([[1, 0, 0]], [2.0])
    with pytest.raises(ParameterError):
        tr.BallUnion([[1, 0, 0]], [0.1, 0.2])


def test_ball_boundary_not_inside_other_balls(rng):
    u = tr.BallUnion([[1, 0, 0], [1, 0.1, 0]], [0.2, 0.2])
    b = u.sample_boundary(rng, 400)
    assert len(b) == 400
    assert np.all(np.abs(u.distance_to_complement(b)) < 1e-9)


def test_region_json_round_trip():
    for reg in (tr.Gauge(0.25, 1), tr.BallUnion([[1, 0, 0], [0, 0, 1]], [0.2, 0.1])):
        back = tr.region_from_json(reg.to_json())
        assert back.to_json() == reg.to_json()
    with pytest.raises(ParameterError):
        tr.region_from_json({"variant": "disc"})


def test_pow_gauge_squares(pow2):
    rep = tr.verify_trap(pow2, tr.Gauge(0.5), samples=2000)
    assert rep.verified
    assert rep.contraction == pytest.approx(0.5, abs=1e-12)  # 0.25 / 0.5


def test_lin_trap_and_not_trap(lin, rng):
    assert tr.verify_trap(lin(0.02), tr.Gauge(0.2), 10000, rng).verified
    rep = tr.verify_trap(lin(0.5), tr.Gauge(0.2), 10000, rng)
    assert isinstance(rep, tr.NotTrapping) and not rep.verified


def test_verify_trap_needs_samples(pow2):
    with pytest.raises(ParameterError):
        tr.verify_trap(pow2, tr.Gauge(0.5), samples=100)


def test_rU_positive_and_stable(pow2):
    vals = [tr.estimate_rU(pow2, tr.Gauge(0.5), np.random.default_rng(s)).r_U for s in range(3)]
    assert min(vals) > 0
    assert (max(vals) - min(vals)) / max(vals) < 0.1


def test_rU_iterate_not_smaller(lin):
    f = lin(0.02)
    a = tr.estimate_rU(f, tr.Gauge(0.2), np.random.default_rng(1)).r_U
    b = tr.estimate_rU(endo.iterate_map(f, 2), tr.Gauge(0.2), np.random.default_rng(1)).r_U
    assert b >= 0.9 * a


def test_grow_contains_seed_and_monotone(sinks):
    sink = np.array([[1, 0, 0]], dtype=complex)
    big = tr.grow_pseudo_region(sinks, sink, 0.02, np.random.default_rng(2))
    small = tr.grow_pseudo_region(sinks, sink, 0.005, np.random.default_rng(2))
    assert big.contains(sink)[0]
    assert np.max(pg.fs_distance(big.centers, sink[0])) < 0.2
    # small cover inside big cover up to tol
    d = pg.fs_distance(small.centers[:, None, :], big.centers[None, :, :]).min(axis=1)
    assert np.all(d <= 0.02 + 1e-12)
    assert tr.invariance_rate(sinks, big, 0.02, np.random.default_rng(3)) >= 0.99


def test_grow_escape_reported(pow2):
    # [1:1:1] is a repelling fixed point, so perturbed orbits leave a tiny ball
    tight = tr.BallUnion([[1, 1, 1]], [1e-3])
    out = tr.grow_pseudo_region(pow2, np.array([[1, 1, 1]]), 0.05, np.random.default_rng(0),
                                enclosing=tight)
    assert isinstance(out, tr.Escaped)


def test_dimension_examples(lin, sinks):
    rng = np.random.default_rng(5)
    assert tr.dimension_detect(lin(0.0), tr.Gauge(0.2), rng).s == 1
    assert tr.dimension_detect(sinks, at.sinks_regions()["sink"], rng).s == 0
    assert tr.dimension_detect(lin(0.0), tr.Gauge(1e3), rng).s == 2
