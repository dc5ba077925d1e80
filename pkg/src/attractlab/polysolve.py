"""Batched solver for pairs of homogeneous equations in three variables.

Each system E(y) = 0 (two forms of degree d on P^2) is written in a random
unitary chart y = Q (u, v, 1).  The v-coefficients of both equations are
recovered by a DFT over roots of unity, the Sylvester resultant in v is
sampled at d^2 + 1 points of the unit circle and interpolated, and its roots
come from companion eigenvalues.  Every candidate is then polished by Newton
on the original system and near-duplicates are merged into multiplicities.
"""
import numpy as np

from . import projgeom as pg
from .errors import SolverError

MERGE_TOL = 1e-7
RESIDUAL_TOL = 1e-8
NEWTON_STEPS = 60
QUICK_STEPS = 8
MAX_CHARTS = 8
SINGULAR_TOL = 1e-4
SINGULAR_COND = 1e-3


def random_unitary(rng, n=3):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def companion_roots(coeffs):
    """Roots of a batch of polynomials, coefficients lowest degree first (B, m+1)."""
    coeffs = np.asarray(coeffs, dtype=complex)
    m = coeffs.shape[-1] - 1
    lead = coeffs[..., -1:]
    comp = np.zeros(coeffs.shape[:-1] + (m, m), dtype=complex)
    comp[..., 1:, :-1] = np.eye(m - 1)
    comp[..., :, -1] = -coeffs[..., :-1] / lead
    return np.linalg.eigvals(comp)


def _sylvester(p, q):
    """Sylvester matrices of two batches of degree-d polynomials (highest first)."""
    d = p.shape[-1] - 1
    mat = np.zeros(p.shape[:-1] + (2 * d, 2 * d), dtype=complex)
    for i in range(d):
        mat[..., i, i:i + d + 1] = p
        mat[..., d + i, i:i + d + 1] = q
    return mat


class PairSystem:
    """Two degree-d forms E(y) in C^3 with their Jacobians, batched over B systems.

    ``evaluate(y)`` takes y of shape (B, ..., 3) and returns (B, ..., 2);
    ``jacobian(y)`` returns (B, ..., 2, 3).
    """

    def __init__(self, d, evaluate, jacobian):
        self.d = d
        self.evaluate = evaluate
        self.jacobian = jacobian


def fibre_system(f, targets):
    """System F(y) parallel to x for each target x (rows of ``targets``)."""
    x = pg.normalize_point(np.atleast_2d(targets))
    a = np.argmax(np.abs(x), axis=-1)
    others = np.array([[i for i in range(3) if i != ai] for ai in a])
    bidx = np.arange(len(x))
    xa = x[bidx, a]
    xo = x[bidx[:, None], others]

    def _expand(arr, y):
        return arr.reshape(arr.shape[:1] + (1,) * (y.ndim - 2) + arr.shape[1:])

    def evaluate(y):
        fy = f.lift(y)
        fa = np.take_along_axis(fy, _expand(a, y)[..., None], axis=-1)
        fo = np.take_along_axis(fy, np.broadcast_to(_expand(others, y), fy.shape[:-1] + (2,)), axis=-1)
        return _expand(xa, y)[..., None] * fo - _expand(xo, y) * fa

    def jacobian(y):
        jy = f.jacobian(y)
        ja = np.take_along_axis(jy, _expand(a, y)[..., None, None], axis=-2)
        oi = np.broadcast_to(_expand(others, y)[..., None], jy.shape[:-2] + (2, 3))
        jo = np.take_along_axis(jy, oi, axis=-2)
        return _expand(xa, y)[..., None, None] * jo - _expand(xo, y)[..., None] * ja

    return PairSystem(f.d, evaluate, jacobian), x


def _solve_in_chart(system, batch, q, steps=NEWTON_STEPS):
    """Candidate roots (B, d^2, 3) in the chart y = q (u, v, 1) plus residual norms."""
    d = system.d
    m = d * d + 1
    un = np.exp(2j * np.pi * np.arange(m) / m)
    vn = np.exp(2j * np.pi * np.arange(d + 1) / (d + 1))
    uu, vv = np.meshgrid(un, vn, indexing="ij")
    local = np.stack([uu, vv, np.ones_like(uu)], axis=-1) @ q.T  # (m, d+1, 3)
    vals = system.evaluate(np.broadcast_to(local, (batch,) + local.shape))  # (B, m, d+1, 2)
    # v-coefficients (lowest first) for every u node and both equations
    vc = np.fft.fft(vals, axis=2) / (d + 1)
    syl = _sylvester(vc[..., ::-1, 0], vc[..., ::-1, 1])
    res = np.linalg.det(syl)  # (B, m)
    rc = np.fft.fft(res, axis=1) / m
    scale = np.max(np.abs(rc), axis=1, keepdims=True)
    if np.any(scale == 0):
        raise SolverError("resultant vanishes identically", step=None)
    ur = companion_roots(rc[:, : d * d + 1] / scale)  # (B, d^2)

    # v from the first equation, picking the root that best solves the second
    uu2 = np.repeat(ur[..., None], d + 1, axis=-1)
    loc2 = np.stack([uu2, np.broadcast_to(vn, uu2.shape), np.ones_like(uu2)], axis=-1) @ q.T
    v1 = system.evaluate(loc2)[..., 0]  # (B, d^2, d+1)
    c1 = np.fft.fft(v1, axis=-1) / (d + 1)
    vr = companion_roots(c1)  # (B, d^2, d)
    cand = np.stack([np.repeat(ur[..., None], d, axis=-1), vr, np.ones_like(vr)], axis=-1) @ q.T
    e2 = np.abs(system.evaluate(cand)[..., 1])
    pick = np.argmin(np.where(np.isfinite(e2), e2, np.inf), axis=-1)
    v = np.take_along_axis(vr, pick[..., None], axis=-1)[..., 0]
    uv = np.stack([ur, v], axis=-1)
    return _newton(system, uv, q, steps)


def _newton(system, uv, q, steps):
    qa = q[:, :2]
    for _ in range(steps):
        y = np.concatenate([uv, np.ones(uv.shape[:-1] + (1,))], axis=-1) @ q.T
        e = system.evaluate(y)
        jac = system.jacobian(y) @ qa
        try:
            step = np.linalg.solve(jac, e[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(jac.reshape(-1, 2, 2)[0], e.reshape(-1, 2)[0], rcond=None)[0]
        step = np.where(np.isfinite(step), step, 0)
        uv = uv - step
        if np.max(np.abs(step)) < 1e-15 * max(1.0, np.max(np.abs(uv))):
            break
    y = np.concatenate([uv, np.ones(uv.shape[:-1] + (1,))], axis=-1) @ q.T
    return y


def _merge(points, cond=None, tol=MERGE_TOL):
    """Group unit points into clusters; return representatives and multiplicities.

    Points closer than ``tol`` merge.  Near a singular solution the attainable
    accuracy is only about eps**(1/m), so points whose chart Jacobian is nearly
    singular also merge within SINGULAR_TOL.
    """
    n = len(points)
    cond = np.ones(n) if cond is None else cond
    label = -np.ones(n, dtype=int)
    reps, mult = [], []
    for i in range(n):
        if label[i] >= 0:
            continue
        dist = pg.fs_distance(points, points[i])
        near = (dist < tol) | ((dist < SINGULAR_TOL) & (cond < SINGULAR_COND) & (cond[i] < SINGULAR_COND))
        near &= label < 0
        label[near] = len(reps)
        reps.append(_cluster_mean(points[near]))
        mult.append(int(near.sum()))
    return np.array(reps), np.array(mult, dtype=int)


def _cluster_mean(pts):
    if len(pts) == 1:
        return pts[0]
    # align phases with the first member before averaging
    ph = pg.hermitian(pts, pts[0])
    return pg.normalize_point(np.sum(pts * (ph / np.abs(ph))[:, None], axis=0))


def _residual_fibre(f, y, x):
    return pg.fs_distance(pg.normalize_point(f.lift(y)), x[:, None, :])


def solve_fibres(f, targets, rng=None, merge=True):
    """All d^2 solutions of f(y) = x for every row x of ``targets`` (k = 2).

    Returns (roots, multiplicities, residuals) as lists per target when merging,
    else raw arrays of shape (B, d^2, 3) with residuals (B, d^2).
    """
    if f.k != 2:
        raise SolverError("the resultant solver handles P^2 only", step=None)
    rng = np.random.default_rng(2024) if rng is None else rng
    system, x = fibre_system(f, targets)
    batch = len(x)
    out = np.empty((batch, f.d ** 2, 3), dtype=complex)
    resid = np.full((batch, f.d ** 2), np.inf)
    conds = np.ones((batch, f.d ** 2))
    todo = np.arange(batch)
    for attempt in range(MAX_CHARTS):
        q = random_unitary(rng)
        sub, _ = fibre_system(f, x[todo])
        # a short polish suffices for simple roots; retries polish longer
        steps = QUICK_STEPS if attempt == 0 else NEWTON_STEPS
        with np.errstate(all="ignore"):
            y = _solve_in_chart(sub, len(todo), q, steps)
        good_pts = np.all(np.isfinite(y), axis=-1)
        y = np.where(good_pts[..., None], y, 1.0)
        y = pg.normalize_point(y)
        r = _residual_fibre(f, y, x[todo])
        r = np.where(good_pts, r, np.inf)
        ok = np.all(r < RESIDUAL_TOL, axis=-1)
        if merge:
            cond = _conditioning(sub, y, q, f)
            for j in np.nonzero(ok)[0]:
                ok[j] = _multiplicity_consistent(y[j], cond[j])
            conds[todo[ok]] = cond[ok]
        out[todo[ok]] = y[ok]
        resid[todo[ok]] = r[ok]
        todo = todo[~ok]
        if len(todo) == 0:
            break
    if len(todo):
        raise SolverError(f"{len(todo)} fibre systems failed to converge in {MAX_CHARTS} charts", step=None)
    if not merge:
        return out, resid
    roots, mults, res = [], [], []
    for b in range(batch):
        reps, mult = _merge(out[b], conds[b])
        roots.append(reps)
        mults.append(mult)
        res.append(_residual_fibre(f, reps[None], x[b:b + 1])[0])
    return roots, mults, res


def _conditioning(system, y, q, f):
    """Smallest singular value of the chart Jacobian, scaled by d |F(y)| / |y|.

    Of order one at simple solutions and near zero at multiple ones; the
    scaling makes it independent of the chart and of the lift.
    """
    jac = system.jacobian(y) @ q[:, :2]
    sv = np.linalg.svd(jac, compute_uv=False)
    scale = f.d * np.linalg.norm(f.lift(y), axis=-1) / np.linalg.norm(y, axis=-1)
    return sv[..., -1] / np.maximum(scale, 1e-300)


def _multiplicity_consistent(points, cond, tol=MERGE_TOL):
    """Clustered roots must sit at singular points of the system, simple ones need not."""
    for i in range(len(points)):
        near = pg.fs_distance(points, points[i]) < tol
        if near.sum() > 1 and cond[i] > SINGULAR_COND:
            return False
    return True
