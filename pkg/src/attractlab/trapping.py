"""Trapping regions: gauge sublevel sets and unions of Fubini-Study balls.

Everything here is verified by sampling; reports carry the sample counts and
margins so a caller can judge how much the verdict is worth.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import endo
from . import green
from . import projgeom as pg
from .errors import ParameterError


@dataclass(frozen=True)
class Gauge:
    """{max_{i>s}|z_i| <= rho * max_{i<=s}|z_i|}."""

    rho: float
    split: int = 1

    def value(self, x):
        a = np.abs(np.asarray(x))
        base = np.max(a[..., : self.split + 1], axis=-1)
        fib = np.max(a[..., self.split + 1:], axis=-1)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.where(base > 0, fib / np.where(base > 0, base, 1), np.inf)

    def contains(self, x):
        return self.value(x) <= self.rho

    def sample_boundary(self, rng, count, k=2):
        """Points with gauge exactly rho."""
        s = self.split
        base = rng.standard_normal((count, s + 1)) + 1j * rng.standard_normal((count, s + 1))
        fib = rng.standard_normal((count, k - s)) + 1j * rng.standard_normal((count, k - s))
        # random fibre shape with its largest modulus equal to rho * max base
        fib = fib / np.max(np.abs(fib), axis=1, keepdims=True)
        fib = fib * (self.rho * np.max(np.abs(base), axis=1, keepdims=True))
        return pg.normalize_point(np.concatenate([base, fib], axis=1))

    def sample_interior(self, rng, count, k=2):
        pts = self.sample_boundary(rng, count, k)
        shrink = rng.uniform(0, 1, count)[:, None]
        pts = pts.copy()
        pts[:, self.split + 1:] *= shrink
        return pg.normalize_point(pts)

    def distance_to_complement(self, x):
        """FS distance from x to its radial projection on the gauge boundary.

        Positive exactly when the gauge is below rho; used as the trapping margin.
        """
        x = np.atleast_2d(x)
        g = self.value(x)
        y = x.copy()
        factor = np.where(g > 0, self.rho / np.where(g > 0, g, 1), 0)
        y[:, self.split + 1:] *= factor[:, None]
        # a fibre identically zero: push it out along the first fibre axis
        zero = g == 0
        if np.any(zero):
            base = np.max(np.abs(x[zero, : self.split + 1]), axis=1)
            y[zero, self.split + 1] = self.rho * base
        d = pg.fs_distance(x, y)
        return np.where(g <= self.rho, d, -d)

    def to_json(self):
        return {"variant": "gauge", "rho": self.rho, "split": self.split, "balls": []}


@dataclass(frozen=True)
class BallUnion:
    """Finite union of closed FS balls."""

    centers: tuple
    radii: tuple

    def __post_init__(self):
        c = pg.normalize_point(np.atleast_2d(np.asarray(self.centers, dtype=complex)))
        r = np.asarray(self.radii, dtype=float).reshape(-1)
        if len(c) != len(r):
            raise ParameterError("one radius per ball")
        if np.any(r <= 0) or np.any(r >= np.pi / 2):
            raise ParameterError("ball radii must lie in (0, pi/2)")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)

    def _signed(self, x):
        """max over balls of radius minus distance (positive inside)."""
        x = np.atleast_2d(x)
        if len(self.radii) > 64 and len(x) > 64:
            return self._signed_tree(x)
        d = pg.fs_distance(x[:, None, :], self.centers[None, :, :])
        return np.max(self.radii[None, :] - d, axis=1)

    def _signed_tree(self, x):
        tree = cKDTree(pg.chordal_embedding(self.centers))
        rmax = float(self.radii.max())
        best = np.full(len(x), -np.inf)
        hits = tree.query_ball_point(pg.chordal_embedding(x), pg.chordal_radius(rmax) + 1e-12)
        for i, idx in enumerate(hits):
            if idx:
                d = pg.fs_distance(x[i], self.centers[idx])
                best[i] = np.max(self.radii[idx] - d)
        out = best
        miss = ~np.isfinite(out)
        if np.any(miss):
            _, j = tree.query(pg.chordal_embedding(x[miss]))
            out[miss] = self.radii[j] - pg.fs_distance(x[miss], self.centers[j])
        return out

    def contains(self, x):
        return self._signed(x) >= 0

    def distance_to_complement(self, x):
        return self._signed(x)

    def sample_boundary(self, rng, count, k=2):
        """Points on the ball spheres that are not inside another ball."""
        out = []
        need = count
        for _ in range(50):
            idx = rng.integers(0, len(self.radii), need * 2)
            pts = self._sphere_points(rng, idx)
            d = pg.fs_distance(pts[:, None, :], self.centers[None, :, :])
            inner = np.any((self.radii[None, :] - d > 1e-12) & (np.arange(len(self.radii))[None, :] != idx[:, None]), axis=1)
            pts = pts[~inner]
            out.append(pts[:need])
            need -= len(out[-1])
            if need <= 0:
                break
        return np.concatenate(out)[:count]

    def _sphere_points(self, rng, idx):
        k = self.centers.shape[1] - 1
        pts = np.empty((len(idx), k + 1), dtype=complex)
        for b in np.unique(idx):
            sel = idx == b
            c = self.centers[b]
            frame = pg.tangent_frame(c)
            u = rng.standard_normal((sel.sum(), k)) + 1j * rng.standard_normal((sel.sum(), k))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            r = self.radii[b]
            pts[sel] = np.cos(r) * c + np.sin(r) * (u @ frame)
        return pg.normalize_point(pts)

    def sample_interior(self, rng, count, k=2):
        idx = rng.integers(0, len(self.radii), count)
        pts = self._sphere_points(rng, idx)
        c = self.centers[idx]
        s = rng.uniform(0, 1, count) ** 0.25
        # geodesic interpolation between the center and the sphere point
        ang = s * self.radii[idx]
        v = pts - pg.hermitian(c, pts)[:, None] * c
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return pg.normalize_point(np.cos(ang)[:, None] * c + np.sin(ang)[:, None] * v)

    def to_json(self):
        return {"variant": "balls", "rho": None, "split": None,
                "balls": [{"center": [[c.real, c.imag] for c in cen], "radius": float(r)}
                          for cen, r in zip(self.centers, self.radii)]}


def region_from_json(doc):
    allowed = {"variant", "rho", "split", "balls"}
    unknown = set(doc) - allowed
    if unknown:
        raise ParameterError(f"unknown region keys: {sorted(unknown)}")
    if doc.get("variant") == "gauge":
        return Gauge(float(doc["rho"]), int(doc.get("split", 1)))
    if doc.get("variant") == "balls":
        centers = [[complex(*c) if isinstance(c, (list, tuple)) else complex(c) for c in b["center"]]
                   for b in doc["balls"]]
        return BallUnion(centers, [b["radius"] for b in doc["balls"]])
    raise ParameterError(f"unknown region variant {doc.get('variant')!r}")


# ---------------------------------------------------------------------------
# verification


@dataclass
class TrapReport:
    margin: float
    samples: int
    contraction: float = None
    witness: np.ndarray = None

    @property
    def verified(self):
        return self.margin > 0


@dataclass
class NotTrapping(TrapReport):
    pass


def verify_trap(f, region, samples=2000, rng=None):
    """Minimum over boundary samples of the distance from f(x) to the complement."""
    if samples < 1000:
        raise ParameterError("verify_trap needs at least 1000 boundary samples")
    rng = np.random.default_rng(3) if rng is None else rng
    x = region.sample_boundary(rng, samples, f.k)
    y, _ = endo.apply(f, x)
    marg = region.distance_to_complement(y)
    i = int(np.argmin(marg))
    contraction = None
    if isinstance(region, Gauge):
        contraction = float(np.max(region.value(y)) / region.rho)
    cls = TrapReport if marg[i] > 0 else NotTrapping
    return cls(float(marg[i]), len(x), contraction, x[i])


@dataclass
class SizeEstimate:
    r_U: float
    eta_U: float
    inconsistent: bool = False


def estimate_rU(f, region, rng=None, samples=1000, iters=12):
    """Largest r (bisection) such that f(sigma(x)) stays in U for x on the boundary
    of U and random sigma on the boundary sphere of B_W(r)."""
    rng = np.random.default_rng(4) if rng is None else rng
    x = region.sample_boundary(rng, samples, f.k)

    def passes(r):
        y = pg.perturb_points(x, r, rng, norm=1.0)
        fy, _ = endo.apply(f, y)
        return bool(np.all(region.contains(fy)))

    lo, hi = 0.0, 1.0
    if passes(hi):
        lo = hi
    else:
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if passes(mid):
                lo = mid
            else:
                hi = mid
    eta = pg.matching_constant(lo, rng=np.random.default_rng(0)) if lo > 0 else 0.0
    return SizeEstimate(lo, eta, inconsistent=lo == 0)


# ---------------------------------------------------------------------------
# pseudo-orbit regions


@dataclass
class Escaped:
    witness: np.ndarray
    rounds: int


def grow_pseudo_region(f, seeds, r, rng=None, tol=0.02, enclosing=None, draws=8,
                       max_rounds=40, max_points=20000):
    """Cover of the pseudo-orbits of ``seeds`` under f o sigma, sigma in B_W(r).

    Each round maps every frontier point through ``draws`` random f o sigma;
    images farther than tol from the cover join it and form the next frontier.
    Stops when a round adds nothing (successive covers within tol).
    """
    rng = np.random.default_rng(6) if rng is None else rng
    pts = pg.normalize_point(np.atleast_2d(getattr(seeds, "points", seeds)))
    cover = [pts]
    frontier = pts
    ctol = pg.chordal_radius(tol)
    for rnd in range(max_rounds):
        rep = np.repeat(frontier, draws, axis=0)
        img, _ = endo.apply(f, pg.perturb_points(rep, r, rng))
        if enclosing is not None:
            out = ~enclosing.contains(img)
            if np.any(out):
                return Escaped(img[np.argmax(out)], rnd + 1)
        allpts = np.concatenate(cover)
        tree = cKDTree(pg.chordal_embedding(allpts))
        dist, _ = tree.query(pg.chordal_embedding(img))
        new = img[dist > ctol]
        if len(new) == 0:
            break
        # thin the new points among themselves at the covering scale
        keep = _thin(new, ctol)
        frontier = new[keep]
        cover.append(frontier)
        if sum(len(c) for c in cover) > max_points:
            break
    centers = np.concatenate(cover)
    return BallUnion(centers, np.full(len(centers), tol))


def _thin(points, ctol):
    emb = pg.chordal_embedding(points)
    tree = cKDTree(emb)
    keep = np.ones(len(points), dtype=bool)
    for i in range(len(points)):
        if not keep[i]:
            continue
        for j in tree.query_ball_point(emb[i], ctol):
            if j > i:
                keep[j] = False
    return keep


def invariance_rate(f, region, r, rng, samples=2000):
    """Fraction of random x in the region with f(sigma(x)) back in the region."""
    x = region.sample_interior(rng, samples)
    y, _ = endo.apply(f, pg.perturb_points(x, r, rng))
    return float(np.mean(region.contains(y)))


# ---------------------------------------------------------------------------
# dimension


@dataclass
class DimensionEvidence:
    s: int
    slice_mass: float
    mu_fraction: float
    details: dict = field(default_factory=dict)


@dataclass
class Inconclusive:
    slice_mass: float
    mu_fraction: float
    details: dict = field(default_factory=dict)


def probe_lines(region, rng, count=3):
    """Lines that meet the region: horizontal lines inside a gauge region,
    random lines through ball centres otherwise."""
    lines = []
    for _ in range(count):
        if isinstance(region, Gauge):
            s = region.split
            if s != 1:
                raise ParameterError("gauge lines are implemented for k = 2, s = 1")
            a, b = (rng.uniform(-1, 1, 2) + 1j * rng.uniform(-1, 1, 2)) * min(region.rho, 1.0) / 4
            lines.append((np.array([1, 0, a]), np.array([0, 1, b])))
        else:
            c = region.centers[rng.integers(0, len(region.radii))]
            v = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            lines.append(pg.ProjLine.through(c, v))
    return lines


def dimension_detect(f, region, rng=None, mass_threshold=0.05, mu_threshold=0.01,
                     mu_count=4000, burn_in=16, lines=3, grid=None):
    """Dimension of the attracting set in U from slice mass and mu-mass.

    (a) Green slice mass inside U along lines meeting U exceeds the threshold;
    (b) fewer than mu_threshold of the mu-samples fall inside U.
    """
    if f.k != 2:
        raise ParameterError("dimension detection is implemented on P^2")
    rng = np.random.default_rng(8) if rng is None else rng
    grid = grid or {"kind": "polar", "tmax": 8.0, "nt": 161, "ntheta": 64}
    ge = green.GreenEval(f)
    masses = []
    for line in probe_lines(region, rng, lines):
        sm = green.slice_measure(f, line, grid, check=False, ge=ge)
        inside = region.contains(sm.atoms.points)
        masses.append(float(sm.atoms.weights[inside].sum()))
    mass = float(np.min(masses))
    mu = green.mu_sample(f, mu_count, burn_in, rng)
    frac = float(np.mean(region.contains(mu.points)))
    details = {"line_masses": masses, "mu_count": mu_count}
    near_a = mass_threshold / 2 < mass < 2 * mass_threshold
    near_b = mu_threshold / 2 < frac < 2 * mu_threshold
    if near_a or near_b:
        return Inconclusive(mass, frac, details)
    a = mass > mass_threshold
    b = frac < mu_threshold
    if not b:
        s = 2
    else:
        s = 1 if a else 0
    return DimensionEvidence(s, mass, frac, details)
