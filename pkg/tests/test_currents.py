import math

import numpy as np
import pytest

from attractlab import currents as cu
from attractlab import endo
from attractlab import projgeom as pg
from attractlab import trapping as tr
from attractlab.errors import EmptyCloud

L0 = ([1, 0, 0], [0, 1, 0])
SEED = ([1, 0, 0.03], [0, 1, -0.02j])


def test_full_line_mass():
    assert abs(cu.seed_cloud(L0).mass - 1) < 1e-3


def test_disk_mass_closed_form():
    # FS area of |w| < r on a line is r^2 / (1 + r^2)
    cloud = cu.seed_cloud(L0, cu.Cutoff(0.5, 0.5))
    assert abs(cloud.mass - 0.2) < 1e-3


def test_cutoff_outside_chart():
    with pytest.raises(EmptyCloud):
        cu.seed_cloud(L0, cu.Cutoff(0.5, 0.6, center=1e20), quad={"tmax": 4.0})


@pytest.mark.parametrize("eps", [0.0, 0.02])
def test_lambda_preserves_mass(lin, eps):
    f = lin(eps)
    cloud = cu.seed_cloud(SEED, f=f)
    m0 = cloud.mass
    for _ in range(8):
        cloud = cu.lambda_push(f, cloud)
        assert abs(cloud.mass - m0) < 1e-6


def test_mass_conservation_random_seeds(lin, rng):
    f = lin(0.02)
    for _ in range(3):
        a, b = 0.05 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
        cloud = cu.seed_cloud(([1, 0, a], [0, 1, b]), f=f)
        m0 = cloud.mass
        for _ in range(4):
            cloud = cu.lambda_push(f, cloud)
        assert abs(cloud.mass - m0) < 4e-6


def test_invariant_line_image(pow2):
    cloud = cu.lambda_push(pow2, cu.seed_cloud(L0))
    pts, _ = cloud.atoms()
    assert np.max(np.abs(pts[:, 2])) < 1e-15


def test_gauge_shrinks_under_lin(lin):
    g = tr.Gauge(0.2)
    cloud = cu.seed_cloud(SEED, cu.Cutoff(2.0, 3.0))
    pts0, w0 = cloud.atoms()
    rho0 = g.value(pts0[w0 > 0]).max()
    pts, w = cu.lambda_push(lin(0.0), cloud).atoms()
    assert g.value(pts[w > 0]).max() < rho0


def test_fixed_current_cesaro_constant(lin):
    # the image grid is coarser in t after each push; what remains is quadrature error
    res = cu.cesaro(lin(0.0), cu.seed_cloud(L0), 6)
    assert np.max(np.abs(res.running[:, 0] - 1)) < 1e-12
    assert np.max(np.abs(res.running - res.running[0])) < 1e-4


def test_cesaro_cauchy_decay(lin):
    res = cu.cesaro(lin(0.02), cu.seed_cloud(SEED, cu.Cutoff(2.0, 3.0), f=lin(0.02)), 24)
    gaps = [cu.fingerprint_distance(res.running[2 * n - 1], res.running[n - 1]) for n in (3, 6, 12)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_sinks_cycle_oscillation(sinks, rng):
    atoms = cu.seed_atoms([0, 0, 1], 0.05, 100, rng)
    res = cu.cesaro(sinks, atoms, 20)
    it = res.iterates
    assert cu.fingerprint_distance(it[-1], it[-3]) < 1e-8
    assert cu.fingerprint_distance(it[-1], it[-2]) > 0.1
    assert cu.fingerprint_distance(res.running[-1], res.running[-3]) < 0.05


def test_smoothing_identity_and_mass(rng):
    cloud = cu.seed_cloud(L0, cu.Cutoff(1.0, 2.0))
    tiny = cu.smooth_cloud(cloud, 1e-12, 1, rng)
    assert cu.fingerprint_distance(cu.fingerprint(tiny), cu.fingerprint(cloud)) < 1e-8
    # mass is a cohomological invariant for closed currents, so use the full line
    full = cu.seed_cloud(L0)
    sm = cu.smooth_cloud(full, 0.1, 8, rng)
    assert abs(sm.mass - full.mass) < 1e-6


def test_smoothing_covers_neighbourhood(rng):
    cloud = cu.seed_cloud(L0, cu.Cutoff(1.0, 2.0), quad={"tmax": 3.0})
    sm = cu.smooth_cloud(cloud, 0.1, 8, rng)
    pts, w = cloud.atoms()
    spts, sw = sm.atoms()
    src = pts[w > 1e-9][::37]
    eta = pg.matching_constant(0.05)
    d = pg.fs_distance(src[:, None, :], spts[None, sw > 0, :]).min(axis=1)
    assert np.all(d <= eta)


def test_pair_examples():
    cloud = cu.seed_cloud(L0)
    assert cu.pair(cloud) == pytest.approx(cloud.mass)
    far = cu.Bump((0, 0, 1), 0.9)  # support inside |z2/z0| > 0.5
    assert cu.pair(cloud, far) == 0.0
    # radially symmetric bump on the line against the FS area element
    bump = cu.Bump((1, 0, 0), 1.0)
    r = np.linspace(0, math.tan(1.0), 200001)
    d = np.arctan(r)
    dens = 2 * r / (1 + r * r) ** 2 * (1 - d * d) ** 3
    exact = np.sum(0.5 * (dens[1:] + dens[:-1]) * np.diff(r))
    assert abs(cu.pair(cu.seed_cloud(L0, quad={"h_max": 0.05, "ntheta": 64}), bump) - exact) < 1e-3


def test_pair_linearity():
    a = cu.seed_cloud(L0, cu.Cutoff(1.0, 2.0))
    b = cu.seed_cloud(SEED, cu.Cutoff(0.5, 1.0))
    phi = cu.FP_BUMPS[3]
    lhs = cu.pair(a.scaled(0.3) + b.scaled(2.0), phi)
    assert lhs == pytest.approx(0.3 * cu.pair(a, phi) + 2.0 * cu.pair(b, phi), abs=1e-14)


def test_refinement_consistency():
    chi = cu.Cutoff(1.0, 2.0)
    a = cu.fingerprint(cu.seed_cloud(SEED, chi, quad={"ntheta": 29}))
    b = cu.fingerprint(cu.seed_cloud(SEED, chi, quad={"ntheta": 58, "h_max": 0.25}))
    assert cu.fingerprint_distance(a, b) < 1e-3


def test_push_pull_adjunction(lin):
    f = lin(0.02)
    errs = []
    for quad in ({"ntheta": 29}, {"ntheta": 64, "h_max": 0.1}, {"ntheta": 128, "h_max": 0.03}):
        cloud = cu.seed_cloud(SEED, cu.Cutoff(1.0, 2.0), quad=quad, f=f)
        errs.append(abs(cu.lambda_push(f, cloud, refine=False).mass
                        - cu.pullback_omega_pairing(f, cloud)))
    assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-4


def test_fingerprint_first_entry_is_mass(rng):
    pts = pg.random_points(rng, 30)
    w = rng.uniform(size=30)
    fp = cu.fingerprint_atoms(pts, w)
    assert fp[0] == pytest.approx(w.sum()) and len(fp) == 16
    ref = [np.sum(w * b(pts)) for b in cu.FP_BUMPS]
    assert np.allclose(fp[1:], ref, atol=1e-10)


def test_cloud_csv(tmp_path):
    cloud = cu.seed_cloud(L0, cu.Cutoff(1.0, 2.0), quad={"tmax": 2.0, "ntheta": 5})
    cloud.to_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert len(lines[0].split(",")) == 16 and len(lines) == cloud.size + 1
