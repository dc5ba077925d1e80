import numpy as np
import pytest
from scipy.spatial import cKDTree

from attractlab import attractor as at
from attractlab import currents as cu
from attractlab import projgeom as pg
from attractlab import trapping as tr
from attractlab.errors import NullSeed

LINE_A = (np.array([1, 0, 0.03]), np.array([0, 1, -0.02j]))
LINE_B = (np.array([1, 0, -0.04 + 0.01j]), np.array([0, 1, 0.02]))


def test_null_seed_cutoff_inside_disk(lin):
    # the slice of T on the line is the unit circle; chi vanishes there
    seed = at.Seed(frame=LINE_A, cutoff=cu.Cutoff(0.3, 0.5))
    with pytest.raises(NullSeed):
        at.estimate_attracting_current(lin(0.02), tr.Gauge(0.2), [seed], N=3)


def test_null_seed_outside_basin(lin):
    # |w| > 1 on this line, so the fibre coordinate escapes instead of entering U
    seed = at.Seed(frame=(np.array([1, 0, 3]), np.array([0, 1, 0])), cutoff=cu.Cutoff(2, 3))
    with pytest.raises(NullSeed):
        at.estimate_attracting_current(lin(0.02), tr.Gauge(0.2), [seed], N=3)


def test_n0_fixed_line(lin):
    seed = at.Seed(frame=(np.array([1, 0, 0]), np.array([0, 1, 0])))
    rep = at.detect_n0(lin(0.0), tr.Gauge(0.2), seed, N=12)
    assert isinstance(rep, at.PeriodReport) and rep.n0 == 1


def test_cycle_cesaro_is_residue_average(sinks):
    region = at.sinks_regions()["cycle"]
    seed = at.Seed(ball=([0, 0, 1], 0.05))
    rep = at.detect_n0(sinks, region, seed, N=20, rng=np.random.default_rng(4))
    assert rep.n0 == 2
    (est,), _ = at.estimate_attracting_current(sinks, region, [seed], N=20,
                                               rng=np.random.default_rng(4))
    avg = rep.residues.mean(axis=0)
    # superattracting cycle: the gap is at rounding level, hence the small floor
    assert cu.fingerprint_distance(est.fingerprint, avg) <= 2 * est.cauchy_gap + 1e-12
    assert est.eventually_decreasing


def test_census_reproducible(lin):
    a = at.census(lin(0.02), tr.Gauge(0.2), 3, 10, rng=np.random.default_rng(9))
    b = at.census(lin(0.02), tr.Gauge(0.2), 3, 10, rng=np.random.default_rng(9))
    assert np.array_equal(a.fingerprints, b.fingerprints)
    assert a.count == 1 and a.stable


def test_cluster_single_linkage():
    fps = np.zeros((4, 16))
    fps[1, 0] = 0.04
    fps[2, 0] = 0.08
    fps[3, 0] = 1.0
    assert list(at.cluster(fps, 0.05)) == [0, 0, 0, 1]


def _moments(meas):
    z = meas.points[:, 1] / meas.points[:, 0]
    return [abs(np.sum(meas.weights * z ** m)) for m in range(1, 5)]


def test_equilibrium_measure_circle_haar(lin):
    f = lin(0.0)
    est = at.estimate_equilibrium_measure(f, tr.Gauge(0.2), at.Seed(frame=LINE_A, cutoff=cu.Cutoff(2, 3)), N=10)
    assert est.atoms.weights.sum() == pytest.approx(1.0, abs=0.01)
    assert max(_moments(est.atoms)) < 0.01


def test_equilibrium_measure_seed_independent(lin):
    f = lin(0.02)
    nus = [at.estimate_equilibrium_measure(f, tr.Gauge(0.2), at.Seed(frame=l, cutoff=cu.Cutoff(1.5, 2.5)), N=10).atoms
           for l in (LINE_A, LINE_B)]
    for m in (1, 2):
        za = [np.sum(n.weights * (n.points[:, 1] / n.points[:, 0]) ** m) for n in nus]
        assert abs(za[0] - za[1]) < 0.02


def test_support_compare(lin, sinks):
    f = lin(0.0)
    seed = at.Seed(frame=LINE_A, cutoff=cu.Cutoff(2, 3))
    (est,), _ = at.estimate_attracting_current(f, tr.Gauge(0.2), [seed], N=6, materialize=True)
    pts, w = est.cloud.atoms()
    pts = pts[w > 1e-9 * np.abs(w).sum()]
    # covering radius of the tau cloud on L = {z2 = 0}, from FS-uniform points of L
    u = pg.random_points(np.random.default_rng(7), 20000, k=1)
    on_l = np.concatenate([u, np.zeros((len(u), 1))], axis=1)
    d, _ = cKDTree(pg.chordal_embedding(pts)).query(pg.chordal_embedding(on_l))
    cover = float(np.arcsin(d.max() / np.sqrt(2)))
    gap = at.support_compare(f, tr.Gauge(0.2), pts, samples=64000)
    assert gap.A_to_tau <= 1.05 * cover
    assert gap.tau_to_A < 0.05
    regs = at.sinks_regions()
    sink_only = np.array([[1, 0, 0]], dtype=complex)
    gap2 = at.support_compare(sinks, regs["mixed"], sink_only)
    assert gap2.A_to_tau > 0.5
