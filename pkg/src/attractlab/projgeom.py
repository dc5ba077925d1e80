"""Geometry of complex projective space.

Points are stored as unit vectors of C^{k+1} with a fixed phase: the
coordinate of largest modulus (lowest index on ties, up to a relative 1e-12)
is real and positive.
All functions accept a single vector of shape (k+1,) or a stack (..., k+1).
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import InvalidPoint, RangeError

ORTHO_TOL = 1e-12
# moduli this close to the largest count as ties, so rounding cannot move the phase coordinate
TIE_TOL = 1e-12


def normalize_point(raw):
    """Return the canonical representative of the projective point(s) ``raw``."""
    v = np.asarray(raw, dtype=complex)
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norms == 0) or not np.all(np.isfinite(norms)):
        raise InvalidPoint("all-zero or non-finite homogeneous coordinates")
    v = v / norms
    mod = np.abs(v)
    idx = np.argmax(mod >= mod.max(axis=-1, keepdims=True) * (1 - TIE_TOL), axis=-1)
    lead = np.take_along_axis(v, idx[..., None], axis=-1)
    return v * (np.conj(lead) / np.abs(lead))


def hermitian(x, y):
    """<x, y> = sum conj(x_i) y_i over the last axis."""
    return np.sum(np.conj(x) * y, axis=-1)


def fs_distance(x, y):
    """Fubini-Study distance in radians, in [0, pi/2].

    Evaluated as atan2(|x - <y,x> y|, |<x,y>|) which stays accurate for
    nearby points where arccos loses half the digits.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    x = x / np.linalg.norm(x, axis=-1, keepdims=True)
    y = y / np.linalg.norm(y, axis=-1, keepdims=True)
    c = hermitian(y, x)
    s = np.linalg.norm(x - c[..., None] * y, axis=-1)
    return np.arctan2(s, np.abs(c))


def chordal_embedding(x):
    """Real embedding x -> x x^* (flattened), with |E(x)-E(y)| = sqrt(2) sin d_FS."""
    x = np.asarray(x, dtype=complex)
    x = x / np.linalg.norm(x, axis=-1, keepdims=True)
    m = x[..., :, None] * np.conj(x[..., None, :])
    m = m.reshape(*x.shape[:-1], -1)
    return np.concatenate([m.real, m.imag], axis=-1)


def chordal_radius(fs_radius):
    return np.sqrt(2.0) * np.sin(np.minimum(fs_radius, np.pi / 2))


def random_points(rng, count, k=2):
    """Points distributed by the Fubini-Study volume (normalized Gaussians)."""
    z = rng.standard_normal((count, k + 1)) + 1j * rng.standard_normal((count, k + 1))
    return normalize_point(z)


def tangent_frame(x):
    """Orthonormal basis (k, k+1) of the Hermitian complement of unit x."""
    x = np.asarray(x, dtype=complex)
    n = x.shape[-1]
    # coordinate axes ordered so the one least aligned with x comes first
    order = np.argsort(np.abs(x))
    a = np.column_stack([x, np.eye(n, dtype=complex)[:, order]])
    q, _ = np.linalg.qr(a)
    return q[:, 1:n].T


def tangent_frames(x):
    """Batched tangent_frame: (m, k+1, k) with orthonormal columns spanning x-perp."""
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    m, n = x.shape
    order = np.argsort(np.abs(x), axis=1)
    eye = np.eye(n, dtype=complex)[order]  # (m, n, n): rows are axes in order
    a = np.concatenate([x[:, :, None], np.transpose(eye, (0, 2, 1))], axis=2)
    q, _ = np.linalg.qr(a)
    return q[:, :, 1:n]


@dataclass(frozen=True)
class ProjLine:
    """A projective line with chart zeta -> normalize(basepoint + zeta*direction)."""

    basepoint: np.ndarray
    direction: np.ndarray
    radius: float = np.inf

    def __post_init__(self):
        b = np.asarray(self.basepoint, dtype=complex)
        v = np.asarray(self.direction, dtype=complex)
        b = b / np.linalg.norm(b)
        v = v / np.linalg.norm(v)
        if abs(hermitian(b, v)) > ORTHO_TOL:
            raise InvalidPoint("line direction is not orthogonal to its basepoint")
        object.__setattr__(self, "basepoint", b)
        object.__setattr__(self, "direction", v)

    @classmethod
    def through(cls, p, q, radius=np.inf):
        """Line through two distinct points; basepoint p, direction the q-part orthogonal to p."""
        p = np.asarray(p, dtype=complex)
        p = p / np.linalg.norm(p)
        q = np.asarray(q, dtype=complex)
        v = q - hermitian(p, q) * p
        if np.linalg.norm(v) < 1e-14:
            raise InvalidPoint("points coincide; no unique line")
        v = v / np.linalg.norm(v)
        # exact orthogonality after rounding
        v = v - hermitian(p, v) * p
        return cls(p, v / np.linalg.norm(v), radius)

    @property
    def k(self):
        return self.basepoint.shape[0] - 1

    def lift(self, zeta):
        zeta = np.asarray(zeta, dtype=complex)
        return self.basepoint + zeta[..., None] * self.direction

    def point(self, zeta):
        return normalize_point(self.lift(zeta))


@dataclass(frozen=True)
class AutoPerturbation:
    """Automorphism of P^k given by the projectivization of exp(r * generator)."""

    r: float
    generator: np.ndarray

    @property
    def matrix(self):
        return expm(self.r * self.generator)

    def apply_lift(self, z):
        return np.asarray(z, dtype=complex) @ self.matrix.T

    def __call__(self, x):
        if self.r == 0:
            return normalize_point(x)
        return normalize_point(self.apply_lift(x))

    def inverse(self):
        return AutoPerturbation(self.r, -self.generator)


def identity_perturbation(k=2):
    return AutoPerturbation(0.0, np.zeros((k + 1, k + 1), dtype=complex))


def random_perturbation(r, rng, k=2, norm=None):
    """Draw sigma in B_W(r): Gaussian generator rescaled to operator norm U[0,1].

    ``norm`` pins the operator norm instead (``norm=1`` samples the boundary
    sphere of B_W(r)).
    """
    if not 0 <= r <= 1:
        raise RangeError(f"perturbation radius {r} outside [0, 1]")
    n = k + 1
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    target = rng.uniform(0.0, 1.0) if norm is None else float(norm)
    g = g * (target / np.linalg.norm(g, 2))
    return AutoPerturbation(float(r), g)


def perturb_points(x, r, rng, norm=None):
    """Apply an independent random perturbation of radius r to every row of x."""
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    if r == 0:
        return normalize_point(x)
    k = x.shape[-1] - 1
    mats = np.stack([random_perturbation(r, rng, k, norm).matrix for _ in range(len(x))])
    return normalize_point(np.einsum("nij,nj->ni", mats, x))


def match_perturbation(x, y, r):
    """Return sigma in B_W(r) with sigma(x) = y, if the rank-one generator suffices.

    With y' = y/<x,y> and v = y' - x (orthogonal to x), the generator
    v x^*/r is nilpotent, so exp(r M) x = x + v = y' exactly.
    """
    x = np.asarray(x, dtype=complex)
    x = x / np.linalg.norm(x)
    y = np.asarray(y, dtype=complex)
    y = y / np.linalg.norm(y)
    c = hermitian(x, y)
    if abs(c) < 1e-15:
        raise RangeError("points are orthogonal; no perturbation near the identity matches them")
    v = y / c - x
    if r <= 0:
        if np.linalg.norm(v) > 1e-15:
            raise RangeError("r = 0 only matches identical points")
        return identity_perturbation(x.shape[0] - 1)
    gen = np.outer(v, np.conj(x)) / r
    if np.linalg.norm(gen, 2) > 1 + 1e-12:
        raise RangeError("target farther than the reachable displacement at this radius")
    return AutoPerturbation(float(r), gen)


def matching_constant(r, samples=256, rng=None, k=2):
    """Empirical eta(r): infimum over sampled basepoints and directions of the
    distance reachable by a norm-one generator at radius r."""
    if r == 0:
        return 0.0
    if not 0 < r <= 1:
        raise RangeError(f"perturbation radius {r} outside (0, 1]")
    rng = np.random.default_rng(0) if rng is None else rng
    xs = random_points(rng, samples, k)
    reach = np.empty(samples)
    for i, x in enumerate(xs):
        u = rng.standard_normal(k + 1) + 1j * rng.standard_normal(k + 1)
        u = u - hermitian(x, u) * x
        u = u / np.linalg.norm(u)
        sigma = AutoPerturbation(r, np.outer(u, np.conj(x)))
        reach[i] = fs_distance(x, sigma(x))
    return float(reach.min())
