"""Positive closed currents as curve clouds, the operator Lambda and fingerprints.

A curve cloud represents chi * (pushforward of a line) by a tensor grid on
the line's chart in log-polar coordinates zeta = exp(t + i theta).  Every
node carries the image point of zeta under the maps applied so far, its jet,
and the potential

    U = (normalization) * log |lift of the composed map at (p + zeta q)|.

The mass of a cell is the finite-volume Laplacian of U, so the pairing with
rho * omega is sum chi_i m_i rho(point_i).  Masses telescope to boundary
fluxes, which keeps the total of a closed full-line cloud fixed under pushes.
Dimension-zero attracting sets use ``AtomCloud`` (weighted points) instead.
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import endo
from . import green
from . import io
from . import projgeom as pg
from .errors import EmptyCloud, ParameterError

FP_VERSION = "fp16-v1"
_S2 = 1 / math.sqrt(2)
_S3 = 1 / math.sqrt(3)
FP_CENTERS = (
    [([1, 0, 0], 1.0), ([0, 1, 0], 1.0), ([0, 0, 1], 1.0),
     ([_S2, _S2, 0], 1.0), ([_S2, 0, _S2], 1.0), ([0, _S2, _S2], 1.0),
     ([_S3, _S3, _S3], 1.0), ([_S2, -_S2, 0], 1.0)]
    + [([1, 0, 0], 0.5), ([0, 1, 0], 0.5), ([0, 0, 1], 0.5),
       ([_S2, _S2, 0], 0.5), ([_S2, 1j * _S2, 0], 0.5), ([_S2, -_S2, 0], 0.5),
       ([_S2, 0, -_S2], 0.5)]
)
FP_NAMES = ["mass"] + [f"bump{j:02d}" for j in range(1, 16)]


def smooth_step(s):
    """C^2 step: 1 for s <= 0, 0 for s >= 1."""
    s = np.clip(s, 0.0, 1.0)
    return 1.0 - s ** 3 * (10 - 15 * s + 6 * s * s)


@dataclass(frozen=True)
class Bump:
    """C^2 bump (1 - (d/r)^2)^3 of the Fubini-Study distance to a center."""

    center: tuple
    radius: float

    def __call__(self, points):
        c = pg.normalize_point(np.asarray(self.center, dtype=complex))
        x = pg.fs_distance(points, c) / self.radius
        return np.where(x < 1, (1 - x * x) ** 3, 0.0)


FP_BUMPS = [Bump(tuple(c), r) for c, r in FP_CENTERS]


_FP_C = np.array([pg.normalize_point(np.asarray(c, dtype=complex)) for c, _ in FP_CENTERS])
_FP_R = np.array([r for _, r in FP_CENTERS])


def fingerprint_atoms(points, weights):
    """16-vector: total weight, then the 15 published bumps integrated."""
    points = np.atleast_2d(np.asarray(points, dtype=complex))
    out = np.zeros(16)
    out[0] = np.sum(weights)
    if len(points) == 0:
        return out
    x = points / np.linalg.norm(points, axis=-1, keepdims=True)
    c = np.minimum(np.abs(np.conj(_FP_C) @ x.T), 1.0)
    # the bumps are flat at their centers so the cosine form is accurate enough
    d = np.arctan2(np.sqrt(1.0 - c * c), c) / _FP_R[:, None]
    vals = np.where(d < 1, (1 - d * d) ** 3, 0.0)
    out[1:] = vals @ np.asarray(weights, dtype=float)
    return out


def fingerprint_distance(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


@dataclass(frozen=True)
class Cutoff:
    """Radial cutoff in the line chart: 1 for |zeta - center| <= r_in, 0 beyond r_out.

    r_in == r_out gives the indicator of the closed disk; r_in = inf means chi = 1.
    """

    r_in: float = math.inf
    r_out: float = math.inf
    center: complex = 0j

    def __call__(self, zeta):
        if math.isinf(self.r_in):
            return np.ones(np.shape(zeta))
        rad = np.abs(np.asarray(zeta) - self.center)
        if self.r_out <= self.r_in:
            return (rad <= self.r_in).astype(float)
        return smooth_step((rad - self.r_in) / (self.r_out - self.r_in))

    @property
    def full(self):
        return math.isinf(self.r_in)

    def describe(self):
        return {"r_in": self.r_in, "r_out": self.r_out,
                "center": [complex(self.center).real, complex(self.center).imag]}


class LinearOp:
    """Automorphism with the evaluation interface of a map (degree one)."""

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=complex)
        self.d = 1
        self.k = self.matrix.shape[0] - 1

    def lift(self, z):
        return np.asarray(z) @ self.matrix.T

    def jacobian(self, z):
        return np.broadcast_to(self.matrix, np.shape(z)[:-1] + self.matrix.shape)


def _as_op(op):
    if isinstance(op, pg.AutoPerturbation):
        return LinearOp(op.matrix)
    return op


# ---------------------------------------------------------------------------
# grids


def graded_nodes(tmax=36.0, focus=0.0, h_min=1e-12, ratio=1.25, h_max=0.5, breaks=()):
    """Nodes on [-tmax, tmax], geometric away from ``focus`` and capped at h_max.

    Every value in ``breaks`` becomes a cell face (midpoint of two nodes).
    """
    offs = [0.0]
    h = h_min
    while offs[-1] < 2 * tmax:
        offs.append(offs[-1] + h)
        h = min(h * ratio, h_max)
    offs = np.array(offs)
    t = np.concatenate([focus - offs[::-1], focus + offs[1:]])
    t = t[(t > -tmax) & (t < tmax)]
    t = np.concatenate([[-tmax], t, [tmax]])
    for b in breaks:
        if not -tmax < b < tmax:
            continue
        t = t[np.abs(t - b) > 1e-15]
        i = np.searchsorted(t, b)
        gap = min(b - t[i - 1], t[i] - b) / 2
        t = np.sort(np.concatenate([t, [b - gap, b + gap]]))
    return t


@dataclass
class Patch:
    """One tensor grid on a line frame, pushed through ``ops``."""

    p: np.ndarray
    q: np.ndarray
    t: np.ndarray
    ntheta: int
    chi: np.ndarray
    points: np.ndarray
    pot: np.ndarray
    tangent: np.ndarray
    logscale: np.ndarray
    scale: float = 1.0
    weight: float = 1.0
    ops: tuple = ()
    cutoff: Cutoff = field(default_factory=Cutoff)

    @property
    def theta(self):
        return 2 * np.pi * np.arange(self.ntheta) / self.ntheta

    @property
    def zeta(self):
        return np.exp(self.t[:, None] + 1j * self.theta[None, :])

    @property
    def size(self):
        return self.pot.size

    def cell_masses(self):
        m = green.fv_masses(self.pot, self.t, 2 * np.pi / self.ntheta)
        return m * self.chi * self.weight


def _initial_state(p, q, zeta):
    lift = p + zeta[..., None] * q
    nl = np.linalg.norm(lift, axis=-1)
    pts = pg.normalize_point(lift)
    jet = endo.make_jet(pts, np.broadcast_to(q, lift.shape), np.zeros(zeta.shape))
    # FS speed of zeta -> [p + zeta q] is |q projected| / |lift|
    ls = jet.logscale - np.log(nl)
    return pts, np.log(nl), jet.tangent, ls


def _apply_op(op, points, pot, tangent, logscale, scale):
    """One pushforward step for arrays of nodes; returns the updated state."""
    op = _as_op(op)
    fx = op.lift(points)
    nf = np.linalg.norm(fx, axis=-1)
    new_scale = scale / op.d
    pot = pot + new_scale * np.log(nf)
    jet = endo.propagate_jet(op, endo.JetState(points, tangent, logscale))
    return jet.point, pot, jet.tangent, jet.logscale, new_scale


def _recompute(patch, t_rows):
    zeta = np.exp(np.asarray(t_rows)[:, None] + 1j * patch.theta[None, :])
    pts, pot, tan, ls = _initial_state(patch.p, patch.q, zeta)
    scale = 1.0
    for op in patch.ops:
        pts, pot, tan, ls, scale = _apply_op(op, pts, pot, tan, ls, scale)
    return pts, pot, tan, ls


@dataclass
class CurveCloud:
    """Weighted union of patches representing a positive (1,1)-current on P^2."""

    patches: list
    generation: int = 0
    provenance: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    @property
    def size(self):
        return sum(p.size for p in self.patches)

    def masses(self):
        return [p.cell_masses() for p in self.patches]

    @property
    def mass(self):
        return float(sum(m.sum() for m in self.masses()))

    def atoms(self):
        """All cells as (points, masses) arrays."""
        pts = np.concatenate([p.points.reshape(-1, 3) for p in self.patches])
        w = np.concatenate([m.ravel() for m in self.masses()])
        return pts, w

    def scaled(self, c):
        return CurveCloud([replace(p, weight=p.weight * c) for p in self.patches],
                          self.generation, dict(self.provenance), dict(self.flags))

    def __add__(self, other):
        return CurveCloud(self.patches + other.patches, max(self.generation, other.generation),
                          dict(self.provenance), {**self.flags, **other.flags})

    def to_csv(self, path, meta=None):
        header = ["zeta_re", "zeta_im", "weight"]
        header += [f"{p}(z{i})" for i in range(3) for p in ("re", "im")]
        header += [f"{p}(v{i})" for i in range(3) for p in ("re", "im")]
        header += ["logscale"]
        rows = []
        for patch, m in zip(self.patches, self.masses()):
            z = patch.zeta.ravel()
            pts = patch.points.reshape(-1, 3)
            tan = patch.tangent.reshape(-1, 3)
            ls = patch.logscale.ravel()
            for i in range(len(z)):
                rows.append([z[i].real, z[i].imag, m.ravel()[i]]
                            + [v for c in pts[i] for v in (c.real, c.imag)]
                            + [v for c in tan[i] for v in (c.real, c.imag)] + [ls[i]])
        io.write_csv(path, header, rows, meta)


DEFAULT_QUAD = {"tmax": 36.0, "h_min": 1e-12, "ratio": 1.25, "h_max": 0.5, "ntheta": 29,
                "focus": None}


def _detect_focus(p, q, f):
    """Row of largest coarse slice mass, or 0 when no map is given."""
    if f is None:
        return 0.0
    t = np.linspace(-6, 6, 121)
    grid = {"kind": "polar", "t": t, "ntheta": 16}
    zeta, w = green._slice_raw(green.GreenEval(f), (p, q), grid, None)
    rows = w.reshape(len(t), -1).sum(axis=1)
    return float(t[np.argmax(rows)])


def seed_cloud(line, chi=None, quad=None, f=None):
    """chi * [line] as a generation-zero cloud.

    ``line`` is a ProjLine or a (p, q) pair of lifts.  The log-polar nodes are
    graded around a focus row (from ``quad`` or the slice of ``f``'s Green
    function) and faces are placed on the cutoff radii when chi is centered
    at the chart origin.
    """
    chi = Cutoff() if chi is None else chi
    quad = {**DEFAULT_QUAD, **(quad or {})}
    p, q = green.line_frame(line)
    focus = quad["focus"]
    if focus is None:
        focus = _detect_focus(p, q, f)
    breaks = []
    if not chi.full and chi.center == 0:
        breaks = sorted({math.log(chi.r_in), math.log(chi.r_out)}) if chi.r_in > 0 else []
    t = graded_nodes(quad["tmax"], focus, quad["h_min"], quad["ratio"], quad["h_max"], breaks)
    ntheta = int(quad["ntheta"])
    zeta = np.exp(t[:, None] + 2j * np.pi * np.arange(ntheta)[None, :] / ntheta)
    chiv = chi(zeta)
    if not np.any(chiv > 0):
        raise EmptyCloud("the cutoff vanishes on every node of the line chart")
    pts, pot, tan, ls = _initial_state(p, q, zeta)
    patch = Patch(p, q, t, ntheta, chiv, pts, pot, tan, ls, cutoff=chi)
    return CurveCloud([patch], 0, {"frame": [p, q], "cutoff": chi.describe()})


def lambda_push(f, cloud, refine=True, threshold=0.05, max_cells=50000, passes=3):
    """Lambda S = d^-1 f_* S, followed by row bisection where images separate."""
    out = []
    capped = cloud.flags.get("capped", False)
    total = cloud.size
    for patch in cloud.patches:
        pts, pot, tan, ls, scale = _apply_op(f, patch.points, patch.pot, patch.tangent,
                                             patch.logscale, patch.scale)
        new = replace(patch, points=pts, pot=pot, tangent=tan, logscale=ls, scale=scale,
                      ops=patch.ops + (f,))
        if refine:
            for _ in range(passes):
                new, added, hit = _refine_rows(new, threshold, max_cells - total)
                total += added
                capped = capped or hit
                if not added:
                    break
        out.append(new)
    flags = dict(cloud.flags)
    flags["capped"] = capped
    crit = sum(int(np.sum(~np.isfinite(p.logscale))) for p in out)
    flags["critical_jets"] = crit
    return CurveCloud(out, cloud.generation + 1, dict(cloud.provenance), flags)


def _refine_rows(patch, threshold, budget, mass_floor=1e-7):
    sep = np.max(pg.fs_distance(patch.points[1:], patch.points[:-1]), axis=1)
    bad = np.nonzero(sep > threshold)[0]
    # only rows that carry mass are worth splitting
    rows = np.abs(patch.cell_masses()).sum(axis=1)
    live = (rows[1:] + rows[:-1]) > mass_floor * max(rows.sum(), 1e-300)
    bad = bad[live[bad]]
    bad = bad[(patch.t[bad + 1] - patch.t[bad]) > 1e-13]
    if len(bad) == 0:
        return patch, 0, False
    hit = False
    if len(bad) * patch.ntheta > budget:
        bad = bad[: max(0, budget // patch.ntheta)]
        hit = True
        if len(bad) == 0:
            return patch, 0, True
    tm = 0.5 * (patch.t[bad] + patch.t[bad + 1])
    pts, pot, tan, ls = _recompute(patch, tm)
    zeta = np.exp(tm[:, None] + 1j * patch.theta[None, :])
    chiv = patch.cutoff(zeta)
    t = np.concatenate([patch.t, tm])
    order = np.argsort(t, kind="stable")

    def merge(a, b):
        return np.concatenate([a, b])[order]

    new = replace(patch, t=t[order], chi=merge(patch.chi, chiv), points=merge(patch.points, pts),
                  pot=merge(patch.pot, pot), tangent=merge(patch.tangent, tan),
                  logscale=merge(patch.logscale, ls))
    return new, len(bad) * patch.ntheta, hit


def push_automorphism(cloud, sigma):
    out = []
    for patch in cloud.patches:
        pts, pot, tan, ls, scale = _apply_op(sigma, patch.points, patch.pot, patch.tangent,
                                             patch.logscale, patch.scale)
        out.append(replace(patch, points=pts, pot=pot, tangent=tan, logscale=ls, scale=scale,
                           ops=patch.ops + (_as_op(sigma),)))
    return CurveCloud(out, cloud.generation, dict(cloud.provenance), dict(cloud.flags))


def pair(cloud, form="omega"):
    """<S, rho * omega> for rho a Bump, a callable on points, or 'omega' (rho = 1)."""
    pts, w = cloud.atoms()
    if isinstance(form, str):
        if form != "omega":
            raise ParameterError(f"unknown form {form!r}")
        return float(w.sum())
    return float(np.sum(w * form(pts)))


def fingerprint(cloud):
    pts, w = cloud.atoms()
    return fingerprint_atoms(pts, w)


def pullback_omega_pairing(f, cloud):
    """<S, d^-1 f^* omega> through jets of the generation the cloud is at.

    Each cell's mass is multiplied by the squared FS stretch of f along the
    jet tangent and divided by d.
    """
    total = 0.0
    for patch, m in zip(cloud.patches, cloud.masses()):
        jet = endo.propagate_jet(f, endo.JetState(patch.points, patch.tangent,
                                                  np.zeros(patch.points.shape[:-1])))
        stretch = np.exp(2 * jet.logscale)
        total += float(np.sum(m * np.where(np.isfinite(stretch), stretch, 0.0))) / f.d
    return total


@dataclass
class CesaroResult:
    running: np.ndarray
    iterates: np.ndarray
    cloud: object
    reached: int
    capped: bool
    last: object = None


def cesaro(f, cloud, N, materialize=False, pusher=None, **push_kw):
    """Fingerprints of Delta_n S = (1/n) sum_{i<=n} Lambda^i S for n = 1..N."""
    if N < 1:
        raise ParameterError("N must be at least 1")
    pusher = push if pusher is None else pusher
    iters, running = [], []
    acc = np.zeros(16)
    union = None
    cur = cloud
    capped = False
    for n in range(1, N + 1):
        cur = pusher(f, cur, **push_kw)
        fp = fingerprint(cur)
        iters.append(fp)
        acc = acc + fp
        running.append(acc / n)
        if materialize:
            union = cur if union is None else union + cur
        if cur.flags.get("capped"):
            capped = True
    if materialize and union is not None:
        union = union.scaled(1.0 / N)
    return CesaroResult(np.array(running), np.array(iters), union, N, capped, cur)


def smooth_cloud(cloud, r, draws, rng):
    """Average of ``draws`` pushforwards by random automorphisms of radius r."""
    if not 0 < r <= 1:
        raise ParameterError("smoothing radius must lie in (0, 1]")
    parts = None
    for _ in range(draws):
        sigma = pg.random_perturbation(r, rng, 2)
        pushed = push_automorphism(cloud, sigma).scaled(1.0 / draws)
        parts = pushed if parts is None else parts + pushed
    return parts


# ---------------------------------------------------------------------------
# measure case


@dataclass
class AtomCloud:
    """Weighted atoms standing for a (k,k)-current; Lambda is the plain pushforward."""

    points: np.ndarray
    weights: np.ndarray
    generation: int = 0
    provenance: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    @property
    def size(self):
        return len(self.weights)

    @property
    def mass(self):
        return float(self.weights.sum())

    def atoms(self):
        return self.points, self.weights

    def scaled(self, c):
        return AtomCloud(self.points, self.weights * c, self.generation, dict(self.provenance),
                         dict(self.flags))

    def __add__(self, other):
        return AtomCloud(np.concatenate([self.points, other.points]),
                         np.concatenate([self.weights, other.weights]),
                         max(self.generation, other.generation), dict(self.provenance),
                         {**self.flags, **other.flags})

    def to_measure(self):
        return green.AtomicMeasure(self.points, self.weights)


def seed_atoms(center, radius, count, rng, chi_outer=None):
    """Atoms spread in the FS ball B(center, radius) with smooth radial weights."""
    c = pg.normalize_point(np.asarray(center, dtype=complex))
    k = len(c) - 1
    frame = pg.tangent_frame(c)
    u = rng.standard_normal((count, k)) + 1j * rng.standard_normal((count, k))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    # radius drawn so the points are roughly uniform in the tangent ball
    rad = radius * rng.uniform(0, 1, count) ** (1.0 / (2 * k))
    dirs = u @ frame
    pts = pg.normalize_point(np.cos(rad)[:, None] * c + np.sin(rad)[:, None] * dirs)
    outer = radius if chi_outer is None else chi_outer
    w = smooth_step((rad - 0.5 * outer) / (0.5 * outer)) if outer > 0 else np.ones(count)
    w = w / count
    return AtomCloud(pts, w, 0, {"center": c, "radius": radius})


def push_atoms(f, cloud, **_):
    pts, _ = endo.apply(f, cloud.points)
    return AtomCloud(pts, cloud.weights, cloud.generation + 1, dict(cloud.provenance),
                     dict(cloud.flags))


def push(f, cloud, **kw):
    """Lambda for either representation."""
    if isinstance(cloud, AtomCloud):
        return push_atoms(f, cloud)
    return lambda_push(f, cloud, **kw)
