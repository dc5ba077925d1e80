"""Parameter sweeps: Lyapunov sums, census counts and fingerprints over a grid of
one complex parameter, with sub-mean-value and continuity diagnostics."""
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import attractor as at
from . import currents as cu
from . import endo
from . import ergodic as eg
from . import io
from .errors import AttractLabError, ParameterError
from .trapping import NotTrapping, verify_trap

SWEEP_QUAD = {"tmax": 4.0, "h_min": 1e-3, "ratio": 1.6, "h_max": 0.5, "ntheta": 11}


@dataclass
class ParamGrid:
    """Rectangle |Re| <= re_max, |Im| <= im_max around ``center`` with n x n nodes."""

    family: endo.FamilySpec
    center: complex = 0j
    re_max: float = 0.03
    im_max: float = 0.03
    n_re: int = 21
    n_im: int = 21

    def __post_init__(self):
        if self.n_re < 2 or self.n_im < 2:
            raise ParameterError("grid needs at least two nodes per axis")

    @property
    def re(self):
        return self.center.real + np.linspace(-self.re_max, self.re_max, self.n_re)

    @property
    def im(self):
        return self.center.imag + np.linspace(-self.im_max, self.im_max, self.n_im)

    @property
    def spacing(self):
        return (2 * self.re_max / (self.n_re - 1), 2 * self.im_max / (self.n_im - 1))

    def nodes(self):
        """Parameter values in row-major order (imaginary part is the row)."""
        return [complex(a, b) for b in self.im for a in self.re]

    def corners(self):
        return [complex(a, b) for b in (self.im[0], self.im[-1]) for a in (self.re[0], self.re[-1])]

    @property
    def bounds(self):
        return (self.re[0], self.re[-1], self.im[0], self.im[-1])


@dataclass
class PipelineConfig:
    """Per-node settings of the sweep."""

    nu_N: int = 10
    lyap_n: int = 30
    lyap_samples: int = 200
    census_seeds: int = 4
    census_N: int = 10
    census_tol: float = 0.05
    trap_samples: int = 1000
    quad: dict = field(default_factory=lambda: dict(SWEEP_QUAD))
    seed_line: tuple = ((1, 0, 0.03), (0, 1, -0.02j))
    seed_cutoff: tuple = (2.0, 3.0)


@dataclass
class NodeResult:
    lam: complex
    L: np.ndarray
    L_se: np.ndarray
    exponents: np.ndarray
    census: int
    fingerprint: np.ndarray
    excluded: bool = False
    error: str = ""
    log_d: float = math.log(2)


def node_rng(master, index):
    return np.random.default_rng(np.random.SeedSequence(master, spawn_key=(index,)))


def run_node(spec, region, lam, cfg, master, index):
    """Instantiate f_lambda, check the trap, estimate nu, L_l and a reduced census."""
    k = spec.k
    nan_l = np.full(k + 1, np.nan)
    blank = NodeResult(lam, nan_l, nan_l.copy(), np.full(k, np.nan), -1, np.full(16, np.nan),
                       log_d=math.log(spec.d))
    rng = node_rng(master, index)
    try:
        f = endo.instantiate_family(spec, lam)
        trap = verify_trap(f, region, cfg.trap_samples, rng)
        if isinstance(trap, NotTrapping):
            blank.excluded = True
            blank.error = "NotTrapping"
            return blank
        seed = at.Seed(frame=(np.array(cfg.seed_line[0], dtype=complex),
                              np.array(cfg.seed_line[1], dtype=complex)),
                       cutoff=cu.Cutoff(*cfg.seed_cutoff))
        nu = at.estimate_equilibrium_measure(f, region, seed, cfg.nu_N).atoms
        ly = eg.lyapunov(f, nu, cfg.lyap_n, cfg.lyap_samples, rng, region)
        cen = at.census(f, region, cfg.census_seeds, cfg.census_N, cfg.census_tol, rng,
                        quad=cfg.quad, refine=False)
        fp = cen.representatives[0] if cen.count == 1 else np.full(16, np.nan)
        return NodeResult(lam, ly.sums, ly.sums_stderr, ly.exponents, cen.count, fp,
                          log_d=math.log(f.d))
    except AttractLabError as exc:
        blank.error = f"{type(exc).__name__}: {exc}"
        return blank


def _job(args):
    return run_node(*args)


@dataclass
class ScanResult:
    grid: ParamGrid
    nodes: list
    master_seed: int
    config: PipelineConfig

    def array(self, name):
        """Node values on the (n_im, n_re) grid.

        ``name`` is L1..L{k+1}, L{k+2} (the open-question column), census or fp<j>.
        """
        g = self.grid
        vals = []
        for r in self.nodes:
            if name == "census":
                vals.append(r.census)
            elif name.startswith("fp"):
                vals.append(r.fingerprint[int(name[2:])])
            elif name == f"L{len(r.L) + 1}":
                vals.append(open_question_value(r))
            else:
                vals.append(r.L[int(name[1:]) - 1])
        return np.array(vals, dtype=float).reshape(g.n_im, g.n_re)

    def stderr(self, l):
        return np.array([r.L_se[l - 1] for r in self.nodes], dtype=float).reshape(
            self.grid.n_im, self.grid.n_re)

    def fingerprints(self):
        return np.array([r.fingerprint for r in self.nodes]).reshape(
            self.grid.n_im, self.grid.n_re, -1)

    @property
    def excluded(self):
        return np.array([r.excluded for r in self.nodes]).reshape(self.grid.n_im, self.grid.n_re)

    def boundary(self):
        """Non-excluded nodes with an excluded 4-neighbour."""
        ex = self.excluded
        out = []
        for i in range(ex.shape[0]):
            for j in range(ex.shape[1]):
                if ex[i, j]:
                    continue
                nb = [(i + a, j + b) for a, b in ((1, 0), (-1, 0), (0, 1), (0, -1))]
                if any(0 <= p < ex.shape[0] and 0 <= q < ex.shape[1] and ex[p, q] for p, q in nb):
                    out.append((float(self.grid.re[j]), float(self.grid.im[i])))
        return out

    def rows(self):
        out = []
        for r in self.nodes:
            out.append([r.lam.real, r.lam.imag, *r.L, open_question_value(r), r.census,
                        int(r.excluded), int(bool(r.error))])
        return out

    def header(self):
        k1 = len(self.nodes[0].L)
        return (["lam_re", "lam_im"] + [f"L{l}" for l in range(1, k1 + 1)]
                + [f"L{k1 + 1}", "census", "excluded", "error"])

    def to_csv(self, path, meta=None):
        io.write_csv(path, self.header(), self.rows(), meta)


def open_question_value(r):
    """log d + sum of the top s exponents + max(next exponent, 0), emitted as data (s = 1)."""
    if not np.all(np.isfinite(r.exponents[:1])):
        return float("nan")
    nxt = r.exponents[1] if len(r.exponents) > 1 else -math.inf
    return float(r.log_d + r.exponents[0] + max(nxt, 0.0))


def sweep(grid, region, cfg=None, master_seed=0, workers=1, progress=None):
    """Run every node; corners are verified first.  Results merge in node order."""
    cfg = PipelineConfig() if cfg is None else cfg
    spec = grid.family
    for lam in grid.corners():
        f = endo.instantiate_family(spec, lam)
        rep = verify_trap(f, region, cfg.trap_samples, np.random.default_rng(master_seed))
        if isinstance(rep, NotTrapping):
            raise TrapCornerError(lam, rep)
    args = [(spec, region, lam, cfg, master_seed, i) for i, lam in enumerate(grid.nodes())]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            nodes = list(ex.map(_job, args, chunksize=max(1, len(args) // (4 * workers))))
    else:
        nodes = []
        for a in args:
            nodes.append(_job(a))
            if progress:
                progress(len(nodes), len(args))
    return ScanResult(grid, nodes, master_seed, cfg)


class TrapCornerError(AttractLabError):
    def __init__(self, lam, report):
        super().__init__(f"shared region fails to trap at corner {lam}: margin {report.margin:.3g}")
        self.lam = lam
        self.report = report


def default_workers():
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# sub-mean-value test


@dataclass
class PshReport:
    violations: int
    tested: int
    skipped: int
    sentinel: int
    worst_excess: float
    locations: list

    @property
    def rate(self):
        return self.violations / self.tested if self.tested else 0.0


def _bilinear(u, x, y):
    """u sampled at integer coordinates (row y, column x)."""
    x0 = np.clip(np.floor(x).astype(int), 0, u.shape[1] - 2)
    y0 = np.clip(np.floor(y).astype(int), 0, u.shape[0] - 2)
    fx, fy = x - x0, y - y0
    return ((1 - fx) * (1 - fy) * u[y0, x0] + fx * (1 - fy) * u[y0, x0 + 1]
            + (1 - fx) * fy * u[y0 + 1, x0] + fx * fy * u[y0 + 1, x0 + 1])


def psh_test(u, bounds, radius, tol, samples=64):
    """Compare u at each node with its average over the circle |lam - lam0| = radius.

    ``u`` has shape (n_im, n_re) over ``bounds`` = (re0, re1, im0, im1); ``tol``
    is a scalar or a per-node array.  Nodes whose circle leaves the grid or
    meets a non-finite value are skipped and counted.
    """
    u = np.asarray(u, dtype=float)
    ny, nx = u.shape
    re0, re1, im0, im1 = bounds
    hx = (re1 - re0) / (nx - 1)
    hy = (im1 - im0) / (ny - 1)
    tol = np.broadcast_to(np.asarray(tol, dtype=float), u.shape)
    ang = 2 * np.pi * np.arange(samples) / samples
    dx = radius * np.cos(ang) / hx
    dy = radius * np.sin(ang) / hy
    violations, tested, skipped, sentinel = 0, 0, 0, 0
    worst = -np.inf
    locs = []
    for i in range(ny):
        for j in range(nx):
            xs, ys = j + dx, i + dy
            if xs.min() < 0 or ys.min() < 0 or xs.max() > nx - 1 or ys.max() > ny - 1:
                skipped += 1
                continue
            y0 = int(math.floor(ys.min()))
            x0 = int(math.floor(xs.min()))
            # one extra node: interpolation touches x0 + 1 even at zero weight
            patch = u[y0:int(math.ceil(ys.max())) + 2, x0:int(math.ceil(xs.max())) + 2]
            if not np.isfinite(u[i, j]) or not np.all(np.isfinite(patch)) or not np.isfinite(tol[i, j]):
                sentinel += 1
                continue
            avg = float(np.mean(_bilinear(u, xs, ys)))
            excess = u[i, j] - avg
            tested += 1
            worst = max(worst, excess - tol[i, j])
            if excess > tol[i, j]:
                violations += 1
                locs.append((re0 + j * hx, im0 + i * hy, float(excess)))
    return PshReport(violations, tested, skipped, sentinel, float(worst), locs)


# ---------------------------------------------------------------------------
# continuity


@dataclass
class ContinuityTable:
    spacing: list
    jumps: np.ndarray
    axis_jumps: dict

    @property
    def max_jump(self):
        return float(np.nanmax(self.jumps[0]))

    @property
    def ratio(self):
        """Per-coordinate ratio of the fine to the coarse jump (about 1/2 when Lipschitz)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.jumps[0] / self.jumps[1]


def _jumps(fp, stride):
    sub = fp[::stride, ::stride]
    a = np.abs(np.diff(sub, axis=1))
    b = np.abs(np.diff(sub, axis=0))
    re_j = np.nanmax(a.reshape(-1, fp.shape[2]), axis=0) if a.size else np.zeros(fp.shape[2])
    im_j = np.nanmax(b.reshape(-1, fp.shape[2]), axis=0) if b.size else np.zeros(fp.shape[2])
    return np.fmax(re_j, im_j), re_j, im_j


def continuity_diagnostic(scan):
    """Max fingerprint jump across adjacent nodes at the grid spacing and at twice it."""
    counts = np.array([r.census for r in scan.nodes if not r.excluded])
    if len(counts) and np.any(counts != counts[0]):
        raise ParameterError("census count is not constant on the scanned region")
    fp = scan.fingerprints()
    fine, fre, fim = _jumps(fp, 1)
    coarse, cre, cim = _jumps(fp, 2)
    h = scan.grid.spacing
    return ContinuityTable([list(h), [2 * h[0], 2 * h[1]]], np.array([fine, coarse]),
                           {"re": np.array([fre, cre]), "im": np.array([fim, cim])})
