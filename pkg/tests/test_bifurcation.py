import math

import numpy as np
import pytest

from attractlab import bifurcation as bf
from attractlab import endo
from attractlab import trapping as tr
from attractlab.errors import ParameterError

FAST = bf.PipelineConfig(nu_N=4, lyap_n=10, lyap_samples=50, census_seeds=2, census_N=4)


def grid_values(fn, n=201, half=1.0):
    x = np.linspace(-half, half, n)
    lam = x[None, :] + 1j * x[:, None]
    return fn(lam), (-half, half, -half, half), 2 * half / (n - 1)


def test_psh_harmonic_control():
    u, bounds, h = grid_values(lambda lam: lam.real, n=41)
    rep = bf.psh_test(u, bounds, 2 * h, 1e-10)
    assert rep.violations == 0 and rep.tested > 0


def test_psh_capped_log_flags_cap_crossings():
    star, R = 0.013 + 0.007j, 0.2
    cap = -math.log(R)
    u, bounds, h = grid_values(lambda lam: np.minimum(-np.log(np.abs(lam - star)), cap))
    radius = 5 * h
    rep = bf.psh_test(u, bounds, radius, 1e-3)
    # min(harmonic, const) fails the sub-mean-value property only where the circle meets |lam - star| = R
    flagged = np.array([abs(abs(complex(a, b) - star) - R) for a, b, _ in rep.locations])
    assert rep.violations > 0
    assert np.all(flagged <= radius + h)
    x = np.linspace(-1, 1, 201)
    lam = x[None, :] + 1j * x[:, None]
    deep = np.abs(np.abs(lam - star) - R) <= radius / 2
    assert rep.violations >= deep.sum()


def test_psh_skips_non_finite():
    u, bounds, h = grid_values(lambda lam: lam.real, n=11)
    u[5, 5] = -np.inf
    rep = bf.psh_test(u, bounds, h, 1e-10)
    assert rep.sentinel > 0 and rep.violations == 0


def test_param_grid():
    g = bf.ParamGrid(endo.FamilySpec("LIN"), 0.1j, 0.02, 0.01, 3, 2)
    nodes = g.nodes()
    assert len(nodes) == 6
    assert nodes[0] == pytest.approx(-0.02 + 0.09j) and nodes[-1] == pytest.approx(0.02 + 0.11j)
    assert g.spacing == pytest.approx((0.02, 0.02))
    assert len(g.corners()) == 4
    with pytest.raises(ParameterError):
        bf.ParamGrid(endo.FamilySpec("LIN"), n_re=1)


def test_sweep_deterministic_and_frozen_axis():
    g = bf.ParamGrid(endo.FamilySpec("LIN"), 0j, 0.02, 0.0, 3, 2)
    a = bf.sweep(g, tr.Gauge(0.2), FAST, master_seed=3)
    b = bf.sweep(g, tr.Gauge(0.2), FAST, master_seed=3)
    assert np.array_equal(np.array(a.rows()), np.array(b.rows()), equal_nan=True)
    assert np.all(a.array("census") == 1)
    cont = bf.continuity_diagnostic(a)
    # both rows share their parameters; only estimator noise separates them
    assert np.nanmax(cont.axis_jumps["im"][0]) < 0.05
    assert cont.max_jump < 0.05


def test_sweep_rejects_untrapped_corner():
    g = bf.ParamGrid(endo.FamilySpec("LIN"), 0j, 0.5, 0.5, 2, 2)
    with pytest.raises(bf.TrapCornerError):
        bf.sweep(g, tr.Gauge(0.2), FAST)


def test_open_question_column():
    r = bf.NodeResult(0j, np.array([0.7, 1.4, -np.inf]), np.zeros(3), np.array([0.7, -np.inf]),
                      1, np.zeros(16))
    assert bf.open_question_value(r) == pytest.approx(math.log(2) + 0.7)
