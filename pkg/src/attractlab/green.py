"""Green functions, slice measures on lines, preimage trees and mu-sampling."""
import math
from dataclasses import dataclass, field

import numpy as np

from . import io
from . import polysolve
from . import projgeom as pg
from .errors import ParameterError, ResolutionError, SolverError

PREIMAGE_CAP = 4096


@dataclass
class AtomicMeasure:
    """Weighted point cloud in P^k; ``points`` are unit rows, weights may be any sign."""

    points: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=complex))
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(self.points) != len(self.weights):
            raise ParameterError("points and weights differ in length")

    def __len__(self):
        return len(self.weights)

    @property
    def mass(self):
        return float(self.weights.sum())

    def integrate(self, func):
        """Integral of func(points) -> array against the weights."""
        if len(self) == 0:
            return 0.0
        return np.sum(self.weights * func(self.points))

    def normalized(self):
        return AtomicMeasure(self.points, self.weights / self.mass, dict(self.meta))

    def scaled(self, c):
        return AtomicMeasure(self.points, self.weights * c, dict(self.meta))

    def concat(self, other):
        return AtomicMeasure(np.concatenate([self.points, other.points]),
                             np.concatenate([self.weights, other.weights]), dict(self.meta))

    def to_csv(self, path, meta=None):
        k1 = self.points.shape[1]
        header = [f"{p}(z{i})" for i in range(k1) for p in ("re", "im")] + ["weight"]
        rows = []
        for p, w in zip(self.points, self.weights):
            rows.append([v for c in p for v in (c.real, c.imag)] + [w])
        io.write_csv(path, header, rows, meta)

    @classmethod
    def from_csv(cls, path):
        _, data = io.read_csv(path)
        k1 = (data.shape[1] - 1) // 2
        pts = data[:, 0:2 * k1:2] + 1j * data[:, 1:2 * k1:2]
        return cls(pts, data[:, -1])


# ---------------------------------------------------------------------------
# Green function


class GreenEval:
    """Telescoped Green function of a map on lifts, with a stored tail constant.

    C is the sampled sup of |log|F|| on the unit sphere; the truncation error
    after n steps is at most C d^-n.
    """

    def __init__(self, f, n_max=60, tail_tol=1e-12, samples=2000, rng=None):
        self.f = f
        self.d = f.d
        rng = np.random.default_rng(7) if rng is None else rng
        pts = pg.random_points(rng, samples, f.k)
        logs = np.log(np.linalg.norm(f.lift(pts), axis=-1))
        # unit coordinate vectors often realize the extremes of |F|
        basis = np.eye(f.k + 1, dtype=complex)
        logs = np.concatenate([logs, np.log(np.linalg.norm(f.lift(basis), axis=-1))])
        self.C = float(np.max(np.abs(logs))) * 1.05 + 1e-12
        self.n_max = n_max
        self.tail_tol = tail_tol
        need = math.log(max(self.C, 1e-300) / tail_tol) / math.log(self.d)
        self.n_default = int(min(n_max, max(1, math.ceil(need))))

    def tail_bound(self, n):
        return self.C * float(self.d) ** (-n)

    def value(self, z, n=None):
        """G on lifts z (..., k+1); scale covariant G(cz) = G(z) + log|c|."""
        n = self.n_default if n is None else n
        z = np.asarray(z, dtype=complex)
        nz = np.linalg.norm(z, axis=-1)
        g = np.log(nz)
        x = z / nz[..., None]
        w = 1.0
        for _ in range(n):
            fx = self.f.lift(x)
            nf = np.linalg.norm(fx, axis=-1)
            w /= self.d
            g = g + w * np.log(nf)
            x = fx / nf[..., None]
        return g


def green_value(f, z, n=40):
    """Return (G(z), tail bound) for lifts z."""
    ge = GreenEval(f)
    return ge.value(z, n), ge.tail_bound(n)


# ---------------------------------------------------------------------------
# slice measures


def line_frame(line):
    """(p, q) lifts so that zeta -> p + zeta q parametrizes the line."""
    if isinstance(line, pg.ProjLine):
        return line.basepoint, line.direction
    p, q = line
    return np.asarray(p, dtype=complex), np.asarray(q, dtype=complex)


def fv_masses(pot, t, dtheta):
    """Finite-volume Laplacian masses (1/2pi) (d_tt + d_thth) U on a log-polar grid.

    ``pot`` has shape (nt, ntheta) on nodes t (nonuniform) times a uniform
    periodic angle grid.  Boundary rows carry no mass, so the total equals
    the difference of the mean radial fluxes through the outermost faces.
    """
    nt = len(t)
    dt = np.diff(t)
    flux = np.diff(pot, axis=0) / dt[:, None]
    width = np.zeros(nt)
    width[1:-1] = 0.5 * (t[2:] - t[:-2])
    m = np.zeros_like(pot)
    m[1:-1] = (flux[1:] - flux[:-1]) * dtheta
    ang = np.roll(pot, -1, axis=1) - 2 * pot + np.roll(pot, 1, axis=1)
    m[1:-1] += ang[1:-1] / dtheta * width[1:-1, None]
    return m / (2 * np.pi)


@dataclass
class SliceMeasure:
    line: object
    grid: dict
    atoms: AtomicMeasure
    zeta: np.ndarray
    clipped_mass: float
    raw_mass: float

    @property
    def mass(self):
        return self.atoms.mass


def polar_nodes(tmax=8.0, nt=161, ntheta=64):
    t = np.linspace(-tmax, tmax, nt)
    theta = 2 * np.pi * np.arange(ntheta) / ntheta
    return t, theta


def _slice_raw(ge, line, grid, n):
    p, q = line_frame(line)
    kind = grid.get("kind", "square")
    if kind == "square":
        h = float(grid.get("h", 0.02))
        radius = float(grid.get("radius", 2.0))
        m = int(round(radius / h))
        xs = h * np.arange(-m, m + 1)
        zeta = xs[None, :] + 1j * xs[:, None]
        pot = ge.value(p + zeta[..., None] * q, n)
        lap = np.zeros_like(pot)
        lap[1:-1, 1:-1] = (pot[2:, 1:-1] + pot[:-2, 1:-1] + pot[1:-1, 2:] + pot[1:-1, :-2]
                           - 4 * pot[1:-1, 1:-1])
        return zeta.ravel(), (lap / (2 * np.pi)).ravel()
    if kind == "polar":
        if "t" in grid:
            t = np.asarray(grid["t"], dtype=float)
            ntheta = int(grid.get("ntheta", 64))
        else:
            t, _ = polar_nodes(grid.get("tmax", 8.0), grid.get("nt", 161), grid.get("ntheta", 64))
            ntheta = int(grid.get("ntheta", 64))
        theta = 2 * np.pi * np.arange(ntheta) / ntheta + float(grid.get("theta0", 0.0))
        zeta = np.exp(t[:, None] + 1j * theta[None, :])
        pot = ge.value(p + zeta[..., None] * q, n)
        m = fv_masses(pot, t, 2 * np.pi / ntheta)
        return zeta.ravel(), m.ravel()
    raise ParameterError(f"unknown slice grid kind {kind!r}")


def _refined(grid):
    g = dict(grid)
    if g.get("kind", "square") == "square":
        g["h"] = float(g.get("h", 0.02)) / 2
    else:
        t = np.asarray(g["t"]) if "t" in g else polar_nodes(g.get("tmax", 8.0), g.get("nt", 161))[0]
        mid = 0.5 * (t[1:] + t[:-1])
        g["t"] = np.sort(np.concatenate([t, mid]))
        g["ntheta"] = 2 * int(g.get("ntheta", 64))
    return g


def _coarse_moments(zeta, w):
    """Smooth coarse observables (log-modulus bumps times low angular modes)."""
    t = np.log(np.maximum(np.abs(zeta), 1e-300))
    th = np.angle(zeta)
    out = []
    for a in np.linspace(-3.0, 3.0, 7):
        bump = np.exp(-0.5 * ((t - a) / 0.5) ** 2)
        for m in range(3):
            out.append(np.sum(w * bump * np.cos(m * th)))
            if m:
                out.append(np.sum(w * bump * np.sin(m * th)))
    return np.array(out)


def slice_measure(f, line, grid=None, n=None, check=True, tol=0.10, ge=None):
    """Slice of the Green current on a line, as Laplacian atoms of G restricted to it.

    ``grid`` is {"kind": "square", "h", "radius"} (5-point stencil on a
    lattice) or {"kind": "polar", "tmax", "nt", "ntheta"} (finite volumes
    in log-polar coordinates).  With ``check`` the computation is repeated
    at half spacing and coarse masses compared.
    """
    grid = {"kind": "square", "h": 0.02, "radius": 2.0} if grid is None else dict(grid)
    ge = GreenEval(f) if ge is None else ge
    zeta, w = _slice_raw(ge, line, grid, n)
    raw = float(w.sum())
    neg = w < 0
    clipped = float(-w[neg].sum())
    w = np.where(neg, 0.0, w)
    if check:
        z2, w2 = _slice_raw(ge, line, _refined(grid), n)
        w2 = np.where(w2 < 0, 0.0, w2)
        a, b = _coarse_moments(zeta, w), _coarse_moments(z2, w2)
        scale = max(w.sum(), w2.sum(), 1e-300)
        diff = np.max(np.abs(a - b)) / scale
        if diff > tol and scale > 1e-6:
            h = grid.get("h")
            raise ResolutionError(f"slice masses change by {diff:.3f} under refinement",
                                  suggested_h=None if h is None else h / 4)
    p, q = line_frame(line)
    keep = w > 0
    pts = pg.normalize_point(p + zeta[keep][:, None] * q)
    atoms = AtomicMeasure(pts, w[keep], {"clipped": clipped})
    return SliceMeasure(line, grid, atoms, zeta[keep], clipped, raw)


# ---------------------------------------------------------------------------
# preimages and mu


@dataclass
class PreimageSet:
    points: np.ndarray
    multiplicities: np.ndarray
    residuals: np.ndarray

    @property
    def count(self):
        return int(self.multiplicities.sum())

    def __len__(self):
        return len(self.multiplicities)


def preimages(f, x, n, region=None, cap=PREIMAGE_CAP, rng=None):
    """All y with f^n(y) = x, merged with multiplicities; optional region filter on y."""
    if f.k != 2:
        raise ParameterError("preimage solver is implemented on P^2")
    if n < 0:
        raise ParameterError("n must be nonnegative")
    if f.d ** (f.k * n) > cap:
        raise ParameterError(f"d^(kn) = {f.d ** (f.k * n)} exceeds the cap {cap}")
    rng = np.random.default_rng(11) if rng is None else rng
    x = pg.normalize_point(x)
    pts = x[None, :]
    mult = np.ones(1, dtype=int)
    for step in range(n):
        try:
            roots, mults, _ = polysolve.solve_fibres(f, pts, rng=rng)
        except SolverError as exc:
            raise SolverError(str(exc), step=step + 1) from exc
        pts = np.concatenate(roots)
        mult = np.concatenate([m * pm for m, pm in zip(mults, mult)])
    y = pts
    for _ in range(n):
        y = pg.normalize_point(f.lift(y))
    resid = pg.fs_distance(y, x)
    if region is not None:
        keep = region.contains(pts)
        pts, mult, resid = pts[keep], mult[keep], resid[keep]
    return PreimageSet(pts, mult, resid)


def mu_sample(f, count, burn_in=20, rng=None, start=None):
    """Endpoints of random backward orbits, one per chain, with equal weights.

    At every step each chain picks one of the d^k solutions (with
    multiplicity) uniformly at random.
    """
    if f.k != 2:
        raise ParameterError("mu sampling is implemented on P^2")
    rng = np.random.default_rng(5) if rng is None else rng
    x = pg.random_points(rng, count, f.k) if start is None else pg.normalize_point(start)
    for _ in range(burn_in):
        try:
            roots, _ = polysolve.solve_fibres(f, x, rng=rng, merge=False)
        except SolverError:
            roots = _solve_with_redraw(f, x, rng)
        pick = rng.integers(0, roots.shape[1], size=len(x))
        x = pg.normalize_point(roots[np.arange(len(x)), pick])
    return AtomicMeasure(x, np.full(len(x), 1.0 / len(x)), {"burn_in": burn_in})


def _solve_with_redraw(f, x, rng):
    out = np.empty((len(x), f.d ** 2, 3), dtype=complex)
    for i in range(len(x)):
        for _ in range(20):
            try:
                out[i] = polysolve.solve_fibres(f, x[i:i + 1], rng=rng, merge=False)[0][0]
                break
            except SolverError:
                x[i] = pg.random_points(rng, 1, f.k)[0]
        else:
            raise SolverError("could not find a regular start point", step=None)
    return out
