"""Attracting currents from Cesaro averages, the census, n0 and equilibrium measures."""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import currents as cu
from . import endo
from . import green
from . import projgeom as pg
from .errors import NullSeed, ParameterError
from .trapping import BallUnion, Gauge

NULL_SEED = 1e-6
ATOM_FLOOR = 1e-12


@dataclass
class Seed:
    """A seed current: chi * [line] (``frame`` = (p, q)) or an atom ball (``ball``)."""

    frame: tuple = None
    cutoff: cu.Cutoff = field(default_factory=cu.Cutoff)
    ball: tuple = None
    atoms: int = 200

    def describe(self):
        if self.ball is not None:
            c, r = self.ball
            return {"ball": {"center": [[z.real, z.imag] for z in np.asarray(c, dtype=complex)],
                             "radius": float(r)}}
        p, q = self.frame
        return {"line": {"p": [[z.real, z.imag] for z in np.asarray(p, dtype=complex)],
                         "q": [[z.real, z.imag] for z in np.asarray(q, dtype=complex)]},
                "cutoff": self.cutoff.describe()}


def make_cloud(f, seed, rng=None, quad=None):
    if seed.ball is not None:
        rng = np.random.default_rng(0) if rng is None else rng
        c, r = seed.ball
        return cu.seed_atoms(c, r, seed.atoms, rng)
    return cu.seed_cloud(seed.frame, seed.cutoff, quad=quad, f=f)


def normalization(f, cloud, ge=None):
    """c = <[H] wedge T, chi> on the cloud's own grid (total weight for atom seeds)."""
    if isinstance(cloud, cu.AtomCloud):
        return cloud.mass
    ge = green.GreenEval(f) if ge is None else ge
    c = 0.0
    for patch in cloud.patches:
        pot = ge.value(patch.p + patch.zeta[..., None] * patch.q)
        c += float(np.sum(green.fv_masses(pot, patch.t, 2 * np.pi / patch.ntheta) * patch.chi))
    return c


def in_basin(f, region, cloud, steps=10):
    """True when every point of the seed's support enters the region within ``steps``."""
    pts, w = cloud.atoms()
    if isinstance(cloud, cu.CurveCloud):
        chi = np.concatenate([p.chi.ravel() for p in cloud.patches])
        pts = pts[chi > 0]
    else:
        pts = pts[w > 0]
    inside = region.contains(pts)
    for _ in range(steps):
        if np.all(inside):
            return True
        pts, _ = endo.apply(f, pts)
        inside |= region.contains(pts)
    return bool(np.all(inside))


@dataclass
class AttractingCurrentEstimate:
    fingerprint: np.ndarray
    c: float
    running: np.ndarray
    iterates: np.ndarray
    trace: np.ndarray
    seed: dict
    capped: bool = False
    cloud: object = None

    @property
    def cauchy_gap(self):
        return float(self.trace[-1]) if len(self.trace) else math.inf

    @property
    def eventually_decreasing(self):
        t = self.trace[len(self.trace) // 2:]
        return bool(len(t) < 2 or t[-1] <= t[0])


def cauchy_trace(running):
    """|Delta_n - Delta_{n//2}| for n = 2..N in fingerprint max-norm."""
    n = len(running)
    return np.array([cu.fingerprint_distance(running[m - 1], running[m // 2 - 1])
                     for m in range(2, n + 1)])


def estimate_attracting_current(f, region, seeds, N=30, rng=None, quad=None,
                                materialize=False, basin_steps=10, **push_kw):
    """Normalized Cesaro fingerprints for each seed plus pairwise seed distances."""
    rng = np.random.default_rng(1) if rng is None else rng
    ge = green.GreenEval(f)
    out = []
    for seed in seeds:
        cloud = make_cloud(f, seed, rng, quad)
        if not in_basin(f, region, cloud, basin_steps):
            raise NullSeed("cutoff support is not attracted into the region")
        c = normalization(f, cloud, ge)
        if c < NULL_SEED:
            raise NullSeed(f"normalization c = {c:.3g} vanishes; the seed misses the Julia set")
        res = cu.cesaro(f, cloud, N, materialize=materialize, **push_kw)
        running = res.running / c
        est = AttractingCurrentEstimate(running[-1], c, running, res.iterates / c,
                                        cauchy_trace(running), seed.describe(), res.capped,
                                        res.cloud.scaled(1.0 / c) if materialize else None)
        out.append(est)
    dist = np.array([[cu.fingerprint_distance(a.fingerprint, b.fingerprint) for b in out]
                     for a in out])
    return out, dist


# ---------------------------------------------------------------------------
# census


def random_seeds(region, count, rng, kind=None):
    """Randomized seeds scattered in the region (lines for gauges, atom balls otherwise)."""
    kind = kind or ("curve" if isinstance(region, Gauge) else "measure")
    seeds = []
    for i in range(count):
        if kind == "curve":
            rho = min(region.rho, 1.0)
            a, b = (rng.uniform(-1, 1, 2) + 1j * rng.uniform(-1, 1, 2)) * rho / (4 * math.sqrt(2))
            r_in = rng.uniform(1.5, 3.0)
            cut = cu.Cutoff(r_in, r_in * rng.uniform(1.3, 2.0))
            seeds.append(Seed(frame=(np.array([1, 0, a]), np.array([0, 1, b])), cutoff=cut))
        else:
            j = i % len(region.radii)
            c = region.centers[j]
            r = region.radii[j]
            # centre of the small seed ball: a random point well inside ball j
            frame = pg.tangent_frame(c)
            u = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            u /= np.linalg.norm(u)
            ang = 0.5 * r * rng.uniform()
            center = pg.normalize_point(math.cos(ang) * c + math.sin(ang) * (u @ frame))
            seeds.append(Seed(ball=(center, 0.3 * r)))
    return seeds


def cluster(fps, tol):
    """Single-linkage clusters of fingerprints at max-norm distance tol."""
    n = len(fps)
    label = -np.ones(n, dtype=int)
    cur = 0
    for i in range(n):
        if label[i] >= 0:
            continue
        stack = [i]
        label[i] = cur
        while stack:
            j = stack.pop()
            for m in range(n):
                if label[m] < 0 and cu.fingerprint_distance(fps[j], fps[m]) <= tol:
                    label[m] = cur
                    stack.append(m)
        cur += 1
    return label


@dataclass
class CensusReport:
    count: int
    representatives: np.ndarray
    multiplicities: list
    fingerprints: np.ndarray
    labels: np.ndarray
    count_2tol: int
    traces: list
    seeds: list
    basis: str = cu.FP_VERSION

    @property
    def stable(self):
        return self.count == self.count_2tol

    def to_json(self):
        return {"count": self.count, "count_2tol": self.count_2tol, "stable": self.stable,
                "basis": self.basis, "multiplicities": list(map(int, self.multiplicities)),
                "representatives": self.representatives, "fingerprints": self.fingerprints,
                "labels": self.labels, "cauchy_traces": self.traces, "seeds": self.seeds}


@dataclass
class UnstableCensus(CensusReport):
    pass


def census(f, region, seed_count=8, N=40, tol=0.05, rng=None, kind=None, quad=None, **push_kw):
    if seed_count < 1:
        raise ParameterError("need at least one seed")
    rng = np.random.default_rng(12) if rng is None else rng
    seeds = random_seeds(region, seed_count, rng, kind)
    ests, _ = estimate_attracting_current(f, region, seeds, N, rng, quad, **push_kw)
    fps = np.array([e.fingerprint for e in ests])
    labels = cluster(fps, tol)
    count = int(labels.max()) + 1
    count2 = int(cluster(fps, 2 * tol).max()) + 1
    reps = np.array([fps[labels == j].mean(axis=0) for j in range(count)])
    mult = [int(np.sum(labels == j)) for j in range(count)]
    cls = CensusReport if count == count2 else UnstableCensus
    return cls(count, reps, mult, fps, labels, count2, [e.trace for e in ests],
               [e.seed for e in ests])


# ---------------------------------------------------------------------------
# n0


@dataclass
class PeriodReport:
    n0: int
    residues: np.ndarray
    gaps: np.ndarray
    iterates: np.ndarray


@dataclass
class Undetermined:
    iterates: np.ndarray
    gaps: dict


def _residue_gap(fps, q, tail):
    """Largest step between consecutive members of each residue class in the tail."""
    n = len(fps)
    start = n - tail
    gaps = []
    for r in range(q):
        idx = [i for i in range(start, n) if i % q == r]
        if len(idx) < 2:
            return math.inf, None
        seq = fps[idx]
        gaps.append(max(cu.fingerprint_distance(seq[j], seq[j + 1]) for j in range(len(seq) - 1)))
    return max(gaps), gaps


def detect_n0(f, region, seed, N=48, max_period=12, tol=1e-3, rng=None, quad=None, **push_kw):
    """Smallest q such that every residue subsequence of Lambda^n(seed) is Cauchy."""
    rng = np.random.default_rng(2) if rng is None else rng
    cloud = make_cloud(f, seed, rng, quad)
    c = normalization(f, cloud)
    if c < NULL_SEED:
        raise NullSeed("seed normalization vanishes")
    fps = []
    cur = cloud
    for _ in range(N):
        cur = cu.push(f, cur, **push_kw)
        fps.append(cu.fingerprint(cur) / c)
    fps = np.array(fps)
    tail = N // 2
    all_gaps = {}
    for q in range(1, max_period + 1):
        gap, per = _residue_gap(fps, q, tail)
        all_gaps[q] = gap
        if gap < tol:
            # residue classes ordered by n mod q, n counted from 1
            res = np.array([fps[[i for i in range(N) if (i + 1) % q == r][-1]] for r in range(q)])
            return PeriodReport(q, res, np.array(per), fps)
    return Undetermined(fps, all_gaps)


# ---------------------------------------------------------------------------
# equilibrium measures


@dataclass
class EquilibriumMeasureEstimate:
    atoms: green.AtomicMeasure
    c: float
    trace: np.ndarray


def estimate_equilibrium_measure(f, region, seed, N=30, grid=None, ge=None):
    """chi * ([H] wedge T) pushed by f^n and averaged over n = 1..N, divided by c.

    The default slice grid is log-polar with an odd angle count, so angle
    doubling permutes the atoms of a circle.
    """
    if seed.frame is None:
        raise ParameterError("equilibrium measures need a line seed")
    grid = grid or {"kind": "polar", "tmax": 6.0, "nt": 99, "ntheta": 101}
    ge = green.GreenEval(f) if ge is None else ge
    sm = green.slice_measure(f, seed.frame, grid, check=False, ge=ge)
    chi = seed.cutoff(sm.zeta)
    w = sm.atoms.weights * chi
    # rows far from the support carry rounding-level mass; they are dropped
    keep = w > ATOM_FLOOR * np.sum(np.abs(w))
    pts = sm.atoms.points[keep]
    w = w[keep]
    c = float(w.sum())
    if c < NULL_SEED:
        raise NullSeed(f"slice mass {c:.3g} under the cutoff vanishes")
    pieces, trace = [], []
    moments = np.zeros(16)
    for n in range(1, N + 1):
        pts, _ = endo.apply(f, pts)
        pieces.append(pts)
        fp = cu.fingerprint_atoms(pts, w / c)
        moments = moments + fp
        trace.append(moments / n)
    allpts = np.concatenate(pieces)
    weights = np.tile(w / (c * N), N)
    meas = green.AtomicMeasure(allpts, weights, {"N": N, "c": c})
    trace = np.array(trace)
    return EquilibriumMeasureEstimate(meas, c, cauchy_trace(trace))


# ---------------------------------------------------------------------------
# support diagnostic


@dataclass
class SupportGap:
    tau_to_A: float
    A_to_tau: float
    n: int
    cover_points: int

    @property
    def gap(self):
        return max(self.tau_to_A, self.A_to_tau)


def support_compare(f, region, tau_points, n=3, samples=4000, rng=None, mass=None,
                    mass_floor=1e-9):
    """Directed Hausdorff distances between tau's cloud and f^n(sampled U).

    Keep n small: forward images of uniform samples pile up at attracting
    points inside A, so deep iterates leave most of A unsampled.
    """
    rng = np.random.default_rng(13) if rng is None else rng
    tau = np.atleast_2d(tau_points)
    if mass is not None:
        tau = tau[np.asarray(mass) > mass_floor * np.sum(np.abs(mass))]
    x = region.sample_interior(rng, samples)
    for _ in range(n):
        x, _ = endo.apply(f, x)
    ta = cKDTree(pg.chordal_embedding(x))
    tt = cKDTree(pg.chordal_embedding(tau))
    d1, _ = ta.query(pg.chordal_embedding(tau))
    d2, _ = tt.query(pg.chordal_embedding(x))
    to_fs = lambda c: float(np.arcsin(np.minimum(np.max(c) / math.sqrt(2), 1.0)))
    return SupportGap(to_fs(d1), to_fs(d2), n, len(x))


def sinks_regions():
    """Trapping ball unions for the default SINKS map: sink, 2-cycle and both."""
    sink = ([[1, 0, 0]], [0.3])
    cycle = ([[0, 0, 1], [-1, 0, 1]], [0.15, 0.03])
    mixed = (sink[0] + cycle[0], sink[1] + cycle[1])
    return {"sink": BallUnion(*sink), "cycle": BallUnion(*cycle), "mixed": BallUnion(*mixed)}
