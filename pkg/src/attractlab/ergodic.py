"""Estimators over equilibrium measures: Lyapunov exponents, entropy, mixing and
the hypothesis checks (small topological degree, exterior-power contraction,
local degree growth)."""
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import endo
from . import green
from . import projgeom as pg
from .currents import Bump
from .errors import BadMeasure, ParameterError, SolverError

LYAP_FLOOR = -50.0
RANK_TOL = 64 * np.finfo(float).eps


# ---------------------------------------------------------------------------
# Lyapunov exponents


@dataclass
class LyapunovReport:
    exponents: np.ndarray
    lifted: np.ndarray
    sums: np.ndarray
    stderr: np.ndarray
    samples: int
    n: int
    radial: float
    sums_stderr: np.ndarray = None

    def to_json(self):
        return {"exponents": self.exponents, "lifted": self.lifted, "L": self.sums,
                "stderr": self.stderr, "L_stderr": self.sums_stderr, "samples": self.samples,
                "n": self.n, "radial": self.radial}


def _orbit_green(f, x, n, tail):
    """Unit orbit x_0..x_n and g(x_j) from the telescoped tail of the same orbit."""
    pts = [x]
    logs = []
    for _ in range(n + tail):
        F = f.lift(pts[-1])
        nf = np.linalg.norm(F, axis=-1)
        logs.append(np.log(nf))
        pts.append(F / nf[:, None])
    g = np.zeros(len(x))
    gs = [None] * (n + tail)
    for j in range(n + tail - 1, -1, -1):
        g = (logs[j] + g) / f.d
        gs[j] = g
    return np.array(pts[:n]), np.array(gs[:n])


def lyapunov(f, nu, n=30, samples=400, rng=None, region=None, floor=LYAP_FLOOR, tail=40,
             warmup=5):
    """Exponents of the lifted derivative cocycle along orbits of nu-atoms.

    The frame starts as [x, tangent frame of x]; the radial column stays on the
    orbit, so its diagonal entries give the lifted direction (log d) and the
    other columns give the projective exponents.  Lifts are normalized by the
    Green function so the lifted cocycle is the one of the level set G = 0.
    The first ``warmup`` steps only align the frame and are not accumulated.
    """
    if n < 1:
        raise ParameterError("orbit length must be positive")
    rng = np.random.default_rng(21) if rng is None else rng
    pts = np.atleast_2d(nu.points)
    w = np.asarray(nu.weights, dtype=float)
    if region is not None:
        inside = region.contains(pts)
        if not np.any(inside & (w > 0)):
            raise BadMeasure("no atom of the measure lies in the region")
        pts, w = pts[inside], w[inside]
    if np.sum(w) <= 0:
        raise BadMeasure("measure has no mass")
    idx = rng.choice(len(pts), size=samples, p=w / np.sum(w))
    x = pg.normalize_point(pts[idx])
    orbit, g = _orbit_green(f, x, n + warmup, tail)
    k = f.k
    # a random unitary mix of the tangent frame avoids starting on invariant axes
    z = rng.standard_normal((samples, k, k)) + 1j * rng.standard_normal((samples, k, k))
    mix, _ = np.linalg.qr(z)
    Q = np.concatenate([x[:, :, None], pg.tangent_frames(x) @ mix], axis=2)
    acc = np.zeros((samples, k + 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        for j in range(n + warmup):
            M = f.jacobian(orbit[j]) @ Q
            Q, R = np.linalg.qr(M)
            diag = np.abs(np.diagonal(R, axis1=1, axis2=2))
            # directions collapsed to rounding level count as exact zeros
            scale = np.linalg.norm(M, axis=(1, 2))
            diag = np.where(diag <= RANK_TOL * scale[:, None], 0.0, diag)
            if j >= warmup:
                acc += np.log(diag) - (f.d - 1) * g[j][:, None]
        per = acc / n
    per = np.where(per < floor, -np.inf, per)
    radial = per[:, 0]
    proj = -np.sort(-per[:, 1:], axis=1)
    lifted_each = -np.sort(-per, axis=1)

    def mean_se(a):
        with np.errstate(invalid="ignore"):
            m = np.mean(a, axis=0)
            se = np.std(a, axis=0) / math.sqrt(len(a))
        se = np.where(np.isfinite(m), se, np.nan)
        return m, se

    expo, se = mean_se(proj)
    lifted, _ = mean_se(lifted_each)
    with np.errstate(invalid="ignore"):
        sums = np.cumsum(lifted)
    with np.errstate(invalid="ignore"):
        _, sums_se = mean_se(np.cumsum(lifted_each, axis=1))
    return LyapunovReport(expo, lifted, sums, se, samples, n, float(np.mean(radial)), sums_se)


# ---------------------------------------------------------------------------
# entropy


@dataclass
class EntropyReport:
    value: float
    slopes: dict
    windows: dict
    counts: np.ndarray
    eps: tuple
    n: int
    candidates: int

    @property
    def stable(self):
        s = [self.slopes[e] for e in sorted(self.slopes)]
        return len(s) < 2 or abs(s[0] - s[1]) < 0.1

    def to_json(self):
        return {"value": self.value, "n": self.n, "eps": list(self.eps),
                "slopes": {f"{e:g}": v for e, v in self.slopes.items()},
                "windows": {f"{e:g}": list(v) for e, v in self.windows.items()},
                "counts": self.counts, "candidates": self.candidates, "stable": self.stable}


class UnderResolved(EntropyReport):
    pass


def _ball(rng, center, radius, count):
    """Points at FS distance <= radius from center, uniform in the 4-ball chart."""
    c = pg.normalize_point(np.asarray(center, dtype=complex))
    F = pg.tangent_frame(c)
    u = rng.standard_normal((count, 2)) + 1j * rng.standard_normal((count, 2))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = radius * rng.uniform(size=count) ** 0.25
    return pg.normalize_point(np.cos(r)[:, None] * c + np.sin(r)[:, None] * (u @ F))


def _balls(rng, centers, radii, per):
    """``per`` points in each ball (an int or one count per center)."""
    c = np.repeat(pg.normalize_point(centers), per, axis=0)
    r = np.repeat(radii, per)
    W = pg.tangent_frames(c)
    u = rng.standard_normal((len(c), 2)) + 1j * rng.standard_normal((len(c), 2))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = r * rng.uniform(size=len(c)) ** 0.25
    v = np.einsum("mij,mj->mi", W, u)
    return pg.normalize_point(np.cos(r)[:, None] * c + np.sin(r)[:, None] * v)


def expansion(f, x, n):
    """Running max over i <= n of the FS operator norm of Df^i at x, shape (n+1, m)."""
    x = np.atleast_2d(x)
    W = pg.tangent_frames(x)
    out = [np.ones(len(x))]
    y = x
    for _ in range(n):
        F = f.lift(y)
        nf = np.linalg.norm(F, axis=1)
        u = F / nf[:, None]
        V = f.jacobian(y) @ W / nf[:, None, None]
        W = V - u[:, :, None] * np.einsum("mi,mij->mj", u.conj(), V)[:, None, :]
        y = u
        out.append(np.linalg.norm(W, ord=2, axis=(1, 2)))
    return np.maximum.accumulate(np.array(out), axis=0)


def _orbits(f, x, n):
    out = [x]
    for _ in range(n):
        x, _ = endo.apply(f, x)
        out.append(x)
    return np.array(out)


def _bowen_close(orb, a, b, j, eps):
    out = np.zeros(len(a), dtype=bool)
    step = 50000
    for s in range(0, len(a), step):
        d = pg.fs_distance(orb[: j + 1, a[s:s + step]], orb[: j + 1, b[s:s + step]])
        out[s:s + step] = np.max(d, axis=0) <= eps
    return out


def separated_greedy(orb, j, eps, seed=(), chunk=8000):
    """Greedy maximal (j, eps)-separated subset of the orbit segments in index order.

    ``seed`` indices are taken first (they must already be separated).  Close
    pairs are found with a Chebyshev KD-tree on chordal embeddings at three
    times, a superset of Bowen-close pairs, and then checked exactly.
    """
    m = orb.shape[1]
    rc = math.sqrt(2) * math.sin(eps)
    times = sorted({0, j // 2, j})
    E = np.concatenate([pg.chordal_embedding(orb[t]) for t in times], axis=1)
    tree = cKDTree(E)
    alive = np.ones(m, dtype=bool)
    seed = np.asarray(seed, dtype=int)
    sel = list(seed)
    alive[seed] = False

    def prune(new):
        if not len(new):
            return
        hits = tree.query_ball_point(E[new], rc, p=np.inf)
        lens = np.fromiter((len(h) for h in hits), int, len(hits))
        if not lens.sum():
            return
        b = np.repeat(np.asarray(new), lens)
        a = np.concatenate([np.asarray(h, dtype=int) for h in hits if h])
        live = alive[a]
        a, b = a[live], b[live]
        alive[np.unique(a[_bowen_close(orb, a, b, j, eps)])] = False

    prune(seed)
    while alive.any():
        block = np.nonzero(alive)[0][:chunk]
        alive[block] = False
        pairs = cKDTree(E[block]).query_pairs(rc, p=np.inf, output_type="ndarray")
        earlier = [[] for _ in block]
        if len(pairs):
            ok = _bowen_close(orb, block[pairs[:, 0]], block[pairs[:, 1]], j, eps)
            for p, q in pairs[ok]:
                earlier[q].append(p)
        chosen = np.zeros(len(block), dtype=bool)
        for i in range(len(block)):
            if not any(chosen[p] for p in earlier[i]):
                chosen[i] = True
        new = block[chosen]
        sel.extend(new.tolist())
        prune(new)
    return np.array(sorted(sel), dtype=int)


def _adaptive_counts(f, region, n, eps, centers, rng, radius, start, per, budget):
    """Separated counts for j = 0..n with candidates added inside the Bowen balls
    of the current separated set at the scale of its previous level.

    Each selected point gets ``per`` new candidates times the local area growth
    of its last step, clipped to [per / 2, 8 per]."""
    x = _balls(rng, centers, np.full(len(centers), radius), max(start // len(centers), 1))
    x = x[region.contains(x)]
    orb = _orbits(f, x, n)
    grow = expansion(f, x, n)
    sel = np.zeros(0, dtype=int)
    counts = []
    for j in range(n + 1):
        if j > 0 and len(sel):
            area = (grow[j, sel] / grow[j - 1, sel]) ** 2
            count = np.clip(np.ceil(per * area / 4), max(per // 2, 1), 8 * per).astype(int)
            new = _balls(rng, orb[0, sel], eps / grow[j - 1, sel], count)
            new = new[region.contains(new)]
            if orb.shape[1] + len(new) > budget:
                return counts, orb.shape[1], False
            orb = np.concatenate([orb, _orbits(f, new, n)], axis=1)
            grow = np.concatenate([grow, expansion(f, new, n)], axis=1)
        sel = separated_greedy(orb, j, eps, sel)
        counts.append(len(sel))
    return counts, orb.shape[1], True


def fit_slope(logc, tol=0.05, min_len=3):
    """Slope over the longest window ending at the last n with max residual < tol."""
    n = len(logc)
    best = None
    for a in range(0, n - min_len + 1):
        t = np.arange(a, n)
        A = np.vstack([t, np.ones_like(t)]).T
        coef, *_ = np.linalg.lstsq(A, logc[a:], rcond=None)
        if np.max(np.abs(A @ coef - logc[a:])) < tol:
            best = (float(coef[0]), (a, n - 1))
            break
    if best is None:
        t = np.arange(n - 2, n)
        return float(logc[-1] - logc[-2]), (n - 2, n - 1)
    return best


def entropy_estimate(f, region, n=10, eps=(0.05, 0.1), budget=200000, rng=None,
                     centers=1, pilot=400, start=300, per=12, radius=None):
    """Topological entropy on the region from greedy Bowen-separated sets.

    Ball centers are the pilot samples of U with the largest finite-time
    expansion; candidates are added adaptively inside the Bowen balls of the
    separated set.  Counts are made monotone by taking, at each (n, eps), the
    largest set found at any (n' <= n, eps' >= eps), all of which are separated.
    """
    rng = np.random.default_rng(31) if rng is None else rng
    eps = tuple(sorted(float(e) for e in eps))
    radius = eps[0] / 4 if radius is None else radius
    P = region.sample_interior(rng, pilot)
    g = expansion(f, P, min(n, 6))[-1]
    chosen = []
    for i in np.argsort(-g, kind="stable"):
        if all(pg.fs_distance(P[i], c) > 2 * radius for c in chosen):
            chosen.append(P[i])
        if len(chosen) == centers:
            break
    chosen = np.array(chosen)
    table = np.zeros((n + 1, len(eps)))
    ok_all = True
    used = 0
    for i, e in enumerate(eps):
        c, used_e, ok = _adaptive_counts(f, region, n, e, chosen, rng, radius, start, per, budget)
        used = max(used, used_e)
        ok_all &= ok
        table[: len(c), i] = c
        if not ok:
            table[len(c):, i] = np.nan
    # monotone repair: larger sets found at coarser eps or shorter n remain separated
    rep = table.copy()
    for i in range(len(eps) - 2, -1, -1):
        rep[:, i] = np.fmax(rep[:, i], rep[:, i + 1])
    rep = np.fmax.accumulate(rep, axis=0)
    slopes, windows = {}, {}
    for i, e in enumerate(eps):
        col = rep[:, i]
        col = col[np.isfinite(col) & (col > 0)]
        if len(col) >= 2:
            slopes[e], windows[e] = fit_slope(np.log(col))
    value = slopes.get(eps[0], float("nan"))
    cls = EntropyReport if ok_all else UnderResolved
    return cls(value, slopes, windows, rep, eps, n, used)


# ---------------------------------------------------------------------------
# mixing


def coord_ratio(i, j, part="re", cap=1e3):
    """Observable Re or Im of z_i / z_j, clipped in modulus to keep it bounded."""

    def phi(x):
        x = np.atleast_2d(x)
        den = x[:, j]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(den != 0, x[:, i] / np.where(den != 0, den, 1), cap)
        a = np.abs(r)
        r = np.where(a > cap, r / a * cap, r)
        return r.real if part == "re" else r.imag

    return phi


def radial_bump(center, radius):
    b = Bump(tuple(np.asarray(center, dtype=complex)), float(radius))
    return lambda x: b(np.atleast_2d(x))


def constant(value=1.0):
    return lambda x: np.full(len(np.atleast_2d(x)), float(value))


@dataclass
class CorrelationReport:
    n: np.ndarray
    values: np.ndarray
    mean_phi: float
    mean_psi: float


def mixing_correlations(f, nu, phi, psi, n_max=10):
    """C(n) = <nu, phi (psi o f^n)> - <nu, phi><nu, psi> for n = 0..n_max by pushing atoms."""
    pts = np.atleast_2d(nu.points)
    w = np.asarray(nu.weights, dtype=float)
    w = w / np.sum(w)
    a = phi(pts)
    mphi = float(np.sum(w * a))
    mpsi = float(np.sum(w * psi(pts)))
    vals = []
    x = pts
    for m in range(n_max + 1):
        if m:
            x, _ = endo.apply(f, x)
        vals.append(float(np.sum(w * a * psi(x))) - mphi * mpsi)
    return CorrelationReport(np.arange(n_max + 1), np.array(vals), mphi, mpsi)


# ---------------------------------------------------------------------------
# hypotheses of the hyperbolicity criterion


@dataclass
class TopDegreeReport:
    counts: np.ndarray
    rates: np.ndarray
    flagged: list
    limsup: float


def small_topdeg_rate(f, V, xs, n_max=4, cap=green.PREIMAGE_CAP, rng=None):
    """Multiplicity-weighted counts of order-n preimages lying in V, per sample x."""
    xs = np.atleast_2d(xs)
    if f.d ** (f.k * n_max) > cap:
        raise ParameterError(f"d^(k n_max) = {f.d ** (f.k * n_max)} exceeds the cap {cap}")
    rng = np.random.default_rng(41) if rng is None else rng
    counts = np.full((len(xs), n_max), np.nan)
    flagged = []
    for i, x in enumerate(xs):
        for n in range(1, n_max + 1):
            try:
                pre = green.preimages(f, x, n, region=V, cap=cap, rng=rng)
            except SolverError as exc:
                flagged.append((i, n, str(exc)))
                break
            counts[i, n - 1] = np.sum(pre.multiplicities)
    with np.errstate(divide="ignore", invalid="ignore"):
        rates = counts ** (1.0 / np.arange(1, n_max + 1))
    last = rates[:, -1]
    limsup = float(np.nanmax(last)) if np.any(np.isfinite(last)) else float("nan")
    return TopDegreeReport(counts, rates, flagged, limsup)


def projective_derivative(f, x):
    """Matrix of Df at unit lifts x in orthonormal bases of the tangent spaces, (m, k, k)."""
    x = pg.normalize_point(np.atleast_2d(x))
    F = f.lift(x)
    nf = np.linalg.norm(F, axis=1)
    u = F / nf[:, None]
    Win = pg.tangent_frames(x)
    Wout = pg.tangent_frames(u)
    V = f.jacobian(x) @ Win / nf[:, None, None]
    return np.einsum("mij,mik->mjk", Wout.conj(), V)


def wedge_norm(f, x, l=2):
    """Norm of the l-th exterior power of Df: product of the top l singular values."""
    s = np.linalg.svd(projective_derivative(f, x), compute_uv=False)
    return np.prod(s[:, :l], axis=1)


@dataclass
class ContractionReport:
    sup: float
    argmax: np.ndarray
    samples: int
    margin: float

    @property
    def passed(self):
        return self.sup < 1 - self.margin


def contraction_check(f, V2, samples=100000, rng=None, margin=0.0, s=1, batch=20000):
    """Monte Carlo sup over V2 of the (s+1)-th exterior power norm of Df."""
    rng = np.random.default_rng(51) if rng is None else rng
    best, arg = -np.inf, None
    left = samples
    while left > 0:
        m = min(batch, left)
        x = V2.sample_interior(rng, m)
        w = wedge_norm(f, x, s + 1)
        i = int(np.argmax(w))
        if w[i] > best:
            best, arg = float(w[i]), x[i]
        left -= m
    return ContractionReport(best, arg, samples, margin)


@dataclass
class DlocReport:
    n: np.ndarray
    mass: np.ndarray
    stderr: np.ndarray
    normalized: np.ndarray
    rate: float
    hits: int
    samples: int

    @property
    def hyperbolic(self):
        """Conditional verdict: local degree growth below d^s."""
        return bool(np.isfinite(self.rate) and self.rate < 1)

    @property
    def exponent_bound(self):
        """Bound on the negative exponents implied by the measured rate."""
        return 0.5 * math.log(self.rate) if self.rate > 0 else -math.inf


def dloc_estimate(f, Vt, n_max=5, samples=20000, rng=None, s=1):
    """Mass of (f^n)^* omega^{s+1} on Vt for n = 1..n_max, as a fraction of the FS volume.

    By the area formula the integral over x of #(f^-n x in Vt) equals the
    integral over Vt of the volume Jacobian of f^n, |det Df^n|^2 in the FS
    metric; we average that over uniform samples of the projective plane.
    """
    if f.k != 2 or s != 1:
        raise ParameterError("dloc_estimate is implemented for k = 2, s = 1")
    rng = np.random.default_rng(61) if rng is None else rng
    y = pg.random_points(rng, samples)
    inside = Vt.contains(y)
    x = y[inside]
    jac = np.ones(len(x))
    mass, se = [], []
    for _ in range(n_max):
        jac = jac * np.abs(np.linalg.det(projective_derivative(f, x))) ** 2
        x, _ = endo.apply(f, x)
        full = np.zeros(samples)
        full[inside] = jac
        mass.append(float(np.mean(full)))
        se.append(float(np.std(full) / math.sqrt(samples)))
    mass = np.array(mass)
    n = np.arange(1, n_max + 1)
    norm = mass / float(f.d) ** (s * n)
    good = norm > 0
    if good.sum() >= 2:
        slope = np.polyfit(n[good], np.log(norm[good]), 1)[0]
        rate = float(math.exp(slope))
    else:
        rate = 0.0 if not good.any() else float("nan")
    return DlocReport(n, mass, np.array(se), norm, rate, int(inside.sum()), samples)
