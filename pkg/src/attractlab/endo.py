"""Holomorphic endomorphisms of P^k given by homogeneous polynomial lifts.

A map stores its k+1 components as one shared monomial table, so evaluation
and the Jacobian of the lift are vectorized over stacks of points.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import projgeom as pg
from .errors import IndeterminacyHit, ParameterError

ZERO_LIFT = 1e-300
FAMILY_TAGS = ("POW", "LIN", "SINKS", "CRIT", "CUSTOM")


class HomogeneousMap:
    """Degree-d endomorphism of P^k.

    Parameters
    ----------
    k : int
        Dimension of the projective space.
    polys : sequence of k+1 sequences of (exponent tuple, coefficient)
        Sparse homogeneous components; every exponent must sum to ``d``.
    """

    def __init__(self, k, polys, name="custom"):
        if len(polys) != k + 1:
            raise ParameterError(f"need {k + 1} components, got {len(polys)}")
        exps = sorted({tuple(int(e) for e in exp) for comp in polys for exp, _ in comp})
        if not exps:
            raise ParameterError("map has no monomials")
        degrees = {sum(e) for e in exps}
        if len(degrees) != 1 or any(len(e) != k + 1 for e in exps):
            raise ParameterError("components are not homogeneous of a common degree")
        self.k = k
        self.d = degrees.pop()
        if self.d < 2:
            raise ParameterError("algebraic degree must be at least 2")
        self.name = name
        self.exponents = np.array(exps, dtype=int)
        index = {e: m for m, e in enumerate(exps)}
        self.coeffs = np.zeros((k + 1, len(exps)), dtype=complex)
        for i, comp in enumerate(polys):
            for exp, c in comp:
                self.coeffs[i, index[tuple(int(e) for e in exp)]] += complex(c)
        self._deriv = []
        for j in range(k + 1):
            e = self.exponents.copy()
            factor = e[:, j].astype(float)
            e[:, j] = np.maximum(e[:, j] - 1, 0)
            self._deriv.append((e, self.coeffs * factor[None, :]))

    @property
    def polys(self):
        out = []
        for i in range(self.k + 1):
            out.append([(tuple(e), c) for e, c in zip(self.exponents, self.coeffs[i]) if c != 0])
        return out

    def __repr__(self):
        return f"HomogeneousMap(name={self.name!r}, k={self.k}, d={self.d})"

    def _monomials(self, z, exps):
        z = np.asarray(z, dtype=complex)
        table = np.stack([z ** e for e in range(self.d + 1)], axis=-1)  # (..., k+1, d+1)
        cols = [table[..., j, exps[:, j]] for j in range(self.k + 1)]
        return np.prod(np.stack(cols, axis=-1), axis=-1)  # (..., M)

    def lift(self, z):
        """Evaluate the polynomial lift F on vectors z (..., k+1)."""
        return self._monomials(z, self.exponents) @ self.coeffs.T

    def jacobian(self, z):
        """DF(z) with shape (..., k+1, k+1); entry [i, j] = dF_i/dz_j."""
        cols = [self._monomials(z, e) @ c.T for e, c in self._deriv]
        return np.stack(cols, axis=-1)

    def compose_power(self, m):
        """Lift of f^m as a callable (used for small m in tests and iterates)."""
        def lifted(z):
            for _ in range(m):
                z = self.lift(z)
            return z
        return lifted

    def screen_indeterminacy(self, samples=1000, rng=None):
        """Minimum of |F| over random unit vectors (a necessary-condition screen)."""
        rng = np.random.default_rng(12345) if rng is None else rng
        pts = pg.random_points(rng, samples, self.k)
        return float(np.min(np.linalg.norm(self.lift(pts), axis=-1)))


class IterateMap:
    """f^m presented with the HomogeneousMap evaluation interface."""

    def __init__(self, base, m):
        if m < 1:
            raise ParameterError("iterate order must be positive")
        self.base = base
        self.m = m
        self.k = base.k
        self.d = base.d ** m
        self.name = f"{base.name}^{m}"

    def __repr__(self):
        return f"IterateMap({self.base!r}, m={self.m})"

    def lift(self, z):
        for _ in range(self.m):
            z = self.base.lift(z)
        return z

    def jacobian(self, z):
        z = np.asarray(z, dtype=complex)
        jac = None
        for _ in range(self.m):
            j = self.base.jacobian(z)
            jac = j if jac is None else j @ jac
            z = self.base.lift(z)
        return jac

    def screen_indeterminacy(self, samples=1000, rng=None):
        return self.base.screen_indeterminacy(samples, rng)


def iterate_map(f, m):
    return f if m == 1 else IterateMap(f, m)


def apply(f, x):
    """Return (normalize(F(x)), log|F(x)|) for unit x (single point or stack)."""
    x = np.asarray(x, dtype=complex)
    fx = f.lift(x)
    nrm = np.linalg.norm(fx, axis=-1)
    if np.any(nrm < ZERO_LIFT):
        raise IndeterminacyHit("F vanishes at the evaluated point")
    return pg.normalize_point(fx), np.log(nrm)


def iterate(f, x, n):
    """n-fold apply; returns (point, per-step log factors with shape (n, ...))."""
    if n < 0:
        raise ParameterError("iteration count must be nonnegative")
    x = pg.normalize_point(x)
    logs = []
    for _ in range(n):
        x, lg = apply(f, x)
        logs.append(lg)
    shape = (0,) + np.shape(x)[:-1]
    return x, (np.array(logs) if logs else np.zeros(shape))


@dataclass
class JetState:
    """First-order jets: unit point, unit tangent orthogonal to it, and a log
    accumulator so the true derivative size is |tangent| * exp(logscale)."""

    point: np.ndarray
    tangent: np.ndarray
    logscale: np.ndarray
    critical: np.ndarray = field(default=None)

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=complex)
        self.tangent = np.asarray(self.tangent, dtype=complex)
        self.logscale = np.asarray(self.logscale, dtype=float)
        if self.critical is None:
            self.critical = ~np.isfinite(self.logscale)


def make_jet(point, direction, logscale=0.0):
    """Jet at ``point`` along ``direction`` (projected to the point's complement)."""
    p = pg.normalize_point(point)
    v = np.asarray(direction, dtype=complex)
    v = v - pg.hermitian(p, v)[..., None] * p
    nv = np.linalg.norm(v, axis=-1)
    with np.errstate(divide="ignore"):
        ls = np.asarray(logscale, dtype=float) + np.log(nv)
    tangent = v / np.where(nv > 0, nv, 1.0)[..., None]
    return JetState(p, tangent, ls)


def propagate_jet(f, jet):
    """Push a jet one step: point -> f(point), tangent -> projected DF * tangent.

    The Fubini-Study length ratio |P_{F(p)^perp} DF v| / |F(p)| is absorbed into
    logscale. Jets with vanishing image derivative get logscale = -inf.
    """
    p, v = jet.point, jet.tangent
    fp = f.lift(p)
    nf = np.linalg.norm(fp, axis=-1)
    if np.any(nf < ZERO_LIFT):
        raise IndeterminacyHit("F vanishes along the jet orbit")
    fhat = fp / nf[..., None]
    w = np.einsum("...ij,...j->...i", f.jacobian(p), v)
    w = w - pg.hermitian(fhat, w)[..., None] * fhat
    nw = np.linalg.norm(w, axis=-1)
    newp = pg.normalize_point(fp)
    # rotate the tangent by the same phase the point normalization applied
    phase = np.sum(newp * np.conj(fhat), axis=-1)
    crit = nw == 0
    tangent = np.where(crit[..., None], jet.tangent, w / np.where(crit, 1.0, nw)[..., None])
    tangent = tangent * phase[..., None]
    with np.errstate(divide="ignore"):
        ls = jet.logscale + np.log(nw) - np.log(nf)
    ls = np.where(crit | jet.critical, -np.inf, ls)
    return JetState(newp, tangent, ls, crit | jet.critical)


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class FamilySpec:
    """A parametrized family; ``data`` holds the structural data for the tag.

    POW: {} ; LIN: {"g": 2 binary forms, "R": p forms, "epsilon": p complex} ;
    SINKS: {"p": coefficients, highest degree first} ; CRIT: {"epsilon"} ;
    CUSTOM: {"polys"}.
    """

    family: str
    k: int = 2
    d: int = 2
    data: dict = field(default_factory=dict)
    eps_bound: float = 1.0
    rho: float = 0.2

    def __post_init__(self):
        if self.family not in FAMILY_TAGS:
            raise ParameterError(f"unknown family tag {self.family!r}")

    def with_epsilon(self, eps):
        data = dict(self.data)
        data["epsilon"] = eps
        return FamilySpec(self.family, self.k, self.d, data, self.eps_bound, self.rho)


def _monomial(k, powers):
    e = [0] * (k + 1)
    for idx, pw in powers.items():
        e[idx] += pw
    return tuple(e)


def _pad_form(form, k):
    """Lift a form in the first len(exp) variables to k+1 variables."""
    return [(tuple(exp) + (0,) * (k + 1 - len(exp)), c) for exp, c in form]


def default_lin(d=2, k=2):
    """Default LIN data: g = power map on the base, R = z0^{d-1} z1 on the fibre."""
    s = k - 1
    g = [[(_monomial(s, {i: d}), 1.0)] for i in range(s + 1)]
    r = [[(_monomial(k, {0: d - 1, 1: 1}), 1.0)] for _ in range(k - s)]
    return {"g": g, "R": r, "epsilon": [0.0] * (k - s)}


def pow_map(d=2, k=2):
    return HomogeneousMap(k, [[(_monomial(k, {i: d}), 1.0)] for i in range(k + 1)], name=f"POW({d})")


def _as_eps_vector(eps, p):
    arr = np.atleast_1d(np.asarray(eps, dtype=complex))
    if arr.size == 1 and p > 1:
        arr = np.full(p, arr[0])
    if arr.size != p:
        raise ParameterError(f"epsilon must have {p} entries")
    return arr


def instantiate_family(spec, lam=None):
    """Instantiate f_lambda; ``lam`` overrides the family's epsilon when given."""
    k, d, tag = spec.k, spec.d, spec.family
    if tag == "POW":
        return pow_map(d, k)
    if tag in ("LIN", "CRIT"):
        data = spec.data if tag == "LIN" else {}
        base = default_lin(d, k)
        g = data.get("g", base["g"])
        rr = data.get("R", base["R"])
        s = len(g) - 1
        p = k - s
        if len(rr) != p:
            raise ParameterError("LIN needs one fibre perturbation per fibre coordinate")
        eps = _as_eps_vector(spec.data.get("epsilon", 0.0) if lam is None else lam, p)
        if np.max(np.abs(eps)) > spec.eps_bound:
            raise ParameterError(f"|epsilon| = {np.max(np.abs(eps)):.3g} exceeds {spec.eps_bound}")
        comps = [_pad_form(form, k) for form in g]
        for j in range(p):
            comp = [(_monomial(k, {s + 1 + j: d}), 1.0)]
            if eps[j] != 0:
                comp += [(tuple(exp), eps[j] * c) for exp, c in rr[j]]
            comps.append(comp)
        name = "LIN" if tag == "LIN" else "CRIT"
        return HomogeneousMap(k, comps, name=f"{name}(eps={eps.tolist()})")
    if tag == "SINKS":
        if k != 2:
            raise ParameterError("SINKS is defined on P^2")
        coeffs = [complex(c) for c in spec.data.get("p", [1.0, 0.0, -1.0])]
        if len(coeffs) - 1 != d:
            raise ParameterError("SINKS polynomial degree must equal d")
        # z2^d p(z0/z2), z1^d, z2^d
        first = [(( d - m, 0, m), c) for m, c in enumerate(coeffs) if c != 0]
        return HomogeneousMap(2, [first, [((0, d, 0), 1.0)], [((0, 0, d), 1.0)]], name="SINKS")
    polys = spec.data.get("polys")
    if polys is None:
        raise ParameterError("CUSTOM family needs raw polys")
    return HomogeneousMap(k, polys, name="CUSTOM")


def _encode_c(c):
    c = complex(c)
    return [c.real, c.imag]


def _decode_c(v):
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def _encode_form(form):
    return [[list(map(int, exp)), _encode_c(c)] for exp, c in form]


def _decode_form(raw):
    return [(tuple(int(e) for e in exp), _decode_c(c)) for exp, c in raw]


def family_to_json(spec):
    coeffs = {}
    if spec.family == "LIN":
        base = default_lin(spec.d, spec.k)
        coeffs = {"g": [_encode_form(f) for f in spec.data.get("g", base["g"])],
                  "R": [_encode_form(f) for f in spec.data.get("R", base["R"])]}
    elif spec.family == "SINKS":
        coeffs = {"p": [_encode_c(c) for c in spec.data.get("p", [1.0, 0.0, -1.0])]}
    elif spec.family == "CUSTOM":
        coeffs = {"polys": [_encode_form(f) for f in spec.data["polys"]]}
    eps = spec.data.get("epsilon", 0.0)
    eps = [_encode_c(e) for e in np.atleast_1d(np.asarray(eps, dtype=complex))]
    return {"family": spec.family, "k": spec.k, "d": spec.d,
            "coefficients": coeffs, "epsilon": eps, "rho": spec.rho}


def family_from_json(doc):
    allowed = {"family", "k", "d", "coefficients", "epsilon", "rho", "eps_bound"}
    unknown = set(doc) - allowed
    if unknown:
        raise ParameterError(f"unknown family keys: {sorted(unknown)}")
    coeffs = doc.get("coefficients") or {}
    data = {}
    if "g" in coeffs:
        data["g"] = [_decode_form(f) for f in coeffs["g"]]
    if "R" in coeffs:
        data["R"] = [_decode_form(f) for f in coeffs["R"]]
    if "p" in coeffs:
        data["p"] = [_decode_c(c) for c in coeffs["p"]]
    if "polys" in coeffs:
        data["polys"] = [_decode_form(f) for f in coeffs["polys"]]
    eps = doc.get("epsilon", 0.0)
    if isinstance(eps, list) and eps and isinstance(eps[0], (list, tuple)):
        data["epsilon"] = [_decode_c(e) for e in eps]
    elif isinstance(eps, list) and len(eps) == 2 and doc.get("family") != "LIN":
        data["epsilon"] = [_decode_c(eps)]
    else:
        data["epsilon"] = eps
    return FamilySpec(doc["family"], int(doc.get("k", 2)), int(doc.get("d", 2)), data,
                      float(doc.get("eps_bound", 1.0)), float(doc.get("rho", 0.2)))


def chart_coords(x, index):
    """Affine chart coordinates of x in the chart {z_index = 1} (other coordinates)."""
    x = np.asarray(x, dtype=complex)
    rest = [i for i in range(x.shape[-1]) if i != index]
    return x[..., rest] / x[..., index:index + 1]


def from_chart(coords, index):
    coords = np.asarray(coords, dtype=complex)
    out = np.insert(coords, index, 1.0, axis=-1)
    return pg.normalize_point(out)


def log_d(f):
    return math.log(f.d)
