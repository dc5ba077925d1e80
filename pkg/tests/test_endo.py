import math

import numpy as np
import pytest

from attractlab import endo
from attractlab import projgeom as pg
from attractlab.errors import IndeterminacyHit, ParameterError


def test_apply_examples(pow2, lin, sinks):
    x, _ = endo.apply(pow2, pg.normalize_point([1, 2, 3]))
    assert np.allclose(x, pg.normalize_point([1, 4, 9]))
    y, _ = endo.apply(lin(0.0), pg.normalize_point([1, 1, 0]))
    assert np.allclose(y, [1 / math.sqrt(2), 1 / math.sqrt(2), 0])
    # chart (z, w) = (z0/z2, z1/z2)
    z, _ = endo.apply(sinks, endo.from_chart([0, 0.1], 2))
    assert np.allclose(endo.chart_coords(z, 2), [-1, 0.01])


def test_family_instances(pow2, lin, sinks, rng):
    z = rng.standard_normal((10, 3)) + 1j * rng.standard_normal((10, 3))
    assert np.allclose(lin(0.0).lift(z), pow2.lift(z))
    ref = np.stack([z[:, 0] ** 2 - z[:, 2] ** 2, z[:, 1] ** 2, z[:, 2] ** 2], axis=1)
    assert np.allclose(sinks.lift(z), ref)
    crit = endo.instantiate_family(endo.FamilySpec("CRIT", data={"epsilon": 0.1}))
    ref = np.stack([z[:, 0] ** 2, z[:, 1] ** 2, z[:, 2] ** 2 + 0.1 * z[:, 0] * z[:, 1]], axis=1)
    assert np.allclose(crit.lift(z), ref)


def test_lin_epsilon_bound():
    spec = endo.FamilySpec("LIN", eps_bound=0.1)
    with pytest.raises(ParameterError):
        endo.instantiate_family(spec, 0.5)


def test_degree_homogeneity(lin, rng):
    f = lin(0.02)
    z = rng.standard_normal((50, 3)) + 1j * rng.standard_normal((50, 3))
    c = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    assert np.allclose(f.lift(c[:, None] * z), c[:, None] ** 2 * f.lift(z), rtol=1e-12, atol=1e-12)


def test_indeterminacy_hit():
    bad = endo.HomogeneousMap(2, [[((1, 1, 0), 1.0)], [((0, 2, 0), 1.0)], [((0, 1, 1), 1.0)]])
    with pytest.raises(IndeterminacyHit):
        endo.apply(bad, np.array([1, 0, 0], dtype=complex))


def test_iterate_semigroup(lin, rng):
    f = lin(0.02)
    x = pg.random_points(rng, 20)
    x0, logs = endo.iterate(f, x, 0)
    assert np.allclose(x0, pg.normalize_point(x)) and logs.shape[0] == 0
    a, _ = endo.iterate(f, x, 5)
    b, _ = endo.iterate(f, endo.iterate(f, x, 2)[0], 3)
    assert np.max(pg.fs_distance(a, b)) < 1e-10


def test_iterate_green_power_map(pow2):
    x = np.array([2, 1, 1], dtype=complex)
    _, logs = endo.iterate(pow2, x, 30)
    g = math.log(np.linalg.norm(x)) + sum(lg / 2 ** (j + 1) for j, lg in enumerate(logs))
    assert abs(g - math.log(2)) < 1e-8


def test_jet_matches_finite_difference(lin, rng):
    f = lin(0.03)
    p = pg.normalize_point([1, np.exp(0.3j), 0.05])
    v = np.array([0.2, 1.0, 0.3j])
    jet = endo.make_jet(p, v)
    h = 1e-7
    for n in range(1, 6):
        jet = endo.propagate_jet(f, jet)
        a, _ = endo.iterate(f, p, n)
        b, _ = endo.iterate(f, p + h * v, n)
        fd = pg.fs_distance(a, b) / pg.fs_distance(p, p + h * v)
        est = math.exp(float(jet.logscale) - float(endo.make_jet(p, v).logscale))
        assert abs(est - fd) / fd < 1e-5


def test_jet_power_map_increment(pow2):
    p = pg.normalize_point([1, 1, 1])
    v = np.array([1, 0, 0], dtype=complex)
    j0 = endo.make_jet(p, v)
    j1 = endo.propagate_jet(pow2, j0)
    assert abs(float(j1.logscale - j0.logscale) - math.log(2)) < 1e-12


def test_jet_along_invariant_line(lin):
    jet = endo.make_jet([1, 0.5, 0], [0, 1, 0])
    for _ in range(5):
        jet = endo.propagate_jet(lin(0.0), jet)
        assert abs(jet.point[2]) < 1e-15 and abs(jet.tangent[2]) < 1e-15


def test_critical_jet_on_cycle(sinks):
    jet = endo.make_jet([0, 0, 1], [0, 1, 0])
    out = endo.propagate_jet(sinks, jet)
    assert out.critical and out.logscale == -np.inf


def test_iterate_map_composition(sinks, rng):
    f2 = endo.iterate_map(sinks, 2)
    x = pg.random_points(rng, 10)
    a, _ = endo.apply(f2, x)
    b, _ = endo.iterate(sinks, x, 2)
    assert np.max(pg.fs_distance(a, b)) < 1e-12
    assert f2.d == 4


def test_family_json_roundtrip():
    spec = endo.FamilySpec("LIN", data={"epsilon": [0.01 + 0.02j]}, rho=0.3)
    back = endo.family_from_json(endo.family_to_json(spec))
    z = np.array([[1, 0.3, 0.1j]])
    assert np.allclose(endo.instantiate_family(back).lift(z), endo.instantiate_family(spec).lift(z))
    with pytest.raises(ParameterError):
        endo.family_from_json({"family": "LIN", "colour": 1})


def test_gauge_contracts_for_lin_zero(lin, rng):
    from attractlab import trapping as tr
    g = tr.Gauge(0.2)
    x = g.sample_interior(rng, 500)
    y, _ = endo.apply(lin(0.0), x)
    assert np.all(g.value(y) <= g.value(x) ** 2 + 1e-15)
