"""Euclidean geometry on R^d: vectors, inner products and convex domains.

Every domain is closed, bounded and convex and exposes an exact
closed-form metric projection. Membership is decided through the
projection with an absolute band of ``MEMBERSHIP_TOL``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .errors import ConstructionError, UnsupportedOperation, UsageError

MEMBERSHIP_TOL = 1e-12


def as_vector(x, dim: int | None = None) -> np.ndarray:
    """Convert ``x`` to a finite 1-d float array, optionally checking its length."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise UsageError(f"expected a 1-d vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise UsageError(f"dimension mismatch: expected {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise UsageError("vector has non-finite coordinates")
    return v


def _frozen(x, dim=None) -> np.ndarray:
    try:
        v = as_vector(x, dim).copy()
    except UsageError as exc:
        raise ConstructionError(str(exc)) from None
    v.setflags(write=False)
    return v


def inner(x, y) -> float:
    """Euclidean inner product; in a Hilbert space this is the pairing <x, J(y)>."""
    x = as_vector(x)
    y = as_vector(y, x.shape[0])
    return float(np.dot(x, y))


def norm(x) -> float:
    return float(np.linalg.norm(as_vector(x)))


def orthonormal_basis(vectors, dim: int, tol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis (d x k) for the span of the rows of ``vectors``."""
    vecs = np.asarray(vectors, dtype=float).reshape(-1, dim) if np.size(vectors) else np.zeros((0, dim))
    if vecs.shape[0] == 0:
        return np.zeros((dim, 0))
    u, s, _ = np.linalg.svd(vecs.T, full_matrices=False)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    return u[:, :rank].copy()


@dataclass(frozen=True, eq=False)
class AffineSubspace:
    """The set ``offset + span(basis)``; ``basis`` is stored orthonormal (d x k)."""

    basis: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        offset = _frozen(self.offset)
        basis = np.asarray(self.basis, dtype=float)
        if basis.ndim != 2 or basis.shape[0] != offset.shape[0]:
            raise ConstructionError("basis must be a d x k array matching the offset dimension")
        if not np.all(np.isfinite(basis)):
            raise ConstructionError("basis has non-finite entries")
        q = orthonormal_basis(basis.T, offset.shape[0])
        # canonical offset: the point of the subspace closest to the origin
        offset = offset - q @ (q.T @ offset)
        offset.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "basis", q)
        object.__setattr__(self, "offset", offset)

    @classmethod
    def spanned_by(cls, vectors, offset=None, dim=None):
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float)) if np.size(vectors) else None
        if dim is None:
            if vectors is None:
                raise ConstructionError("dimension needed for an empty spanning set")
            dim = vectors.shape[1]
        basis = np.zeros((dim, 0)) if vectors is None else vectors.T
        return cls(basis, np.zeros(dim) if offset is None else offset)

    @property
    def dim(self) -> int:
        return self.offset.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def project(self, x) -> np.ndarray:
        x = as_vector(x, self.dim)
        return self.offset + self.basis @ (self.basis.T @ (x - self.offset))

    def distance(self, x) -> float:
        x = as_vector(x, self.dim)
        return float(np.linalg.norm(x - self.project(x)))

    def is_axis_aligned(self, tol: float = 1e-12) -> bool:
        p = self.basis @ self.basis.T
        off_diag = p - np.diag(np.diag(p))
        diag = np.diag(p)
        return bool(np.all(np.abs(off_diag) <= tol) and np.all(np.minimum(np.abs(diag), np.abs(diag - 1)) <= tol))

    def intersect(self, other: AffineSubspace, tol: float = 1e-10) -> AffineSubspace:
        """Intersection of two affine subspaces; raises if it is empty."""
        d = self.dim
        c1 = np.eye(d) - self.basis @ self.basis.T
        c2 = np.eye(d) - other.basis @ other.basis.T
        lhs = np.vstack([c1, c2])
        rhs = np.concatenate([c1 @ self.offset, c2 @ other.offset])
        point, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
        if self.distance(point) > tol or other.distance(point) > tol:
            raise ConstructionError("affine subspaces do not intersect")
        _, s, vt = np.linalg.svd(lhs)
        null = vt[np.sum(s > 1e-10):].T if s.size else np.eye(d)
        return AffineSubspace(null, point)


class ConvexDomain:
    """Nonempty compact convex subset of R^d with an exact metric projection."""

    # subclasses provide ``dim`` and ``center`` (a member point used to seed iterations)
    dim: int
    center: np.ndarray

    def project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sup_norm(self) -> float:
        """An upper bound for sup over the domain of ||y||."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        """``k`` random member points, returned as a k x d array."""
        raise NotImplementedError

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        x = as_vector(x, self.dim)
        return bool(np.linalg.norm(x - self.project(x)) <= tol)

    def intersect_subspace(self, sub: AffineSubspace) -> "ConvexDomain":
        raise UnsupportedOperation(f"cannot intersect {type(self).__name__} with an affine subspace")


def _ball_projection(center, radius, x):
    diff = x - center
    dist = np.linalg.norm(diff)
    if dist <= radius:
        return x.copy()
    return center + diff * (radius / dist)


def _unit_ball_sample(rng, k, dim):
    g = rng.standard_normal((k, dim))
    g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
    r = rng.random(k) ** (1.0 / max(dim, 1))
    return g * r[:, None]


@dataclass(frozen=True, eq=False)
class Ball(ConvexDomain):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center))
        if not np.isfinite(self.radius) or self.radius <= 0:
            raise ConstructionError("radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def project(self, x):
        return _ball_projection(self.center, self.radius, x)

    def sup_norm(self):
        return float(np.linalg.norm(self.center) + self.radius)

    def sample(self, rng, k):
        return self.center + self.radius * _unit_ball_sample(rng, k, self.dim)

    def intersect_subspace(self, sub):
        return AffineSlab(sub, self)


@dataclass(frozen=True, eq=False)
class Box(ConvexDomain):
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _frozen(self.lower)
        hi = _frozen(self.upper)
        if hi.shape != lo.shape:
            raise ConstructionError("box bounds must have equal dimension")
        if np.any(lo > hi):
            raise ConstructionError("box requires lower <= upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.shape[0]

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    def project(self, x):
        return np.clip(x, self.lower, self.upper)

    def sup_norm(self):
        return float(np.linalg.norm(np.maximum(np.abs(self.lower), np.abs(self.upper))))

    def sample(self, rng, k):
        return self.lower + (self.upper - self.lower) * rng.random((k, self.dim))

    def intersect_subspace(self, sub):
        # closed form only when the subspace is spanned by coordinate axes
        if not sub.is_axis_aligned():
            raise UnsupportedOperation("box-subspace intersection needs an axis-aligned subspace")
        free = np.abs(np.diag(sub.basis @ sub.basis.T) - 1) <= 1e-12
        fixed_vals = sub.offset[~free]
        if np.any(fixed_vals < self.lower[~free] - MEMBERSHIP_TOL) or np.any(fixed_vals > self.upper[~free] + MEMBERSHIP_TOL):
            raise ConstructionError("subspace misses the box")
        lo = np.where(free, self.lower, sub.offset)
        hi = np.where(free, self.upper, sub.offset)
        return Box(lo, hi)


@dataclass(frozen=True, eq=False)
class AffineSlab(ConvexDomain):
    """Intersection of an affine subspace with a ball.

    The intersection is a lower dimensional ball living in the subspace,
    so projecting onto the subspace and then onto that ball is exact.
    """

    subspace: AffineSubspace
    ball: Ball
    _inner_center: np.ndarray = field(init=False, repr=False)
    _inner_radius: float = field(init=False, repr=False)

    def __post_init__(self):
        if self.subspace.dim != self.ball.dim:
            raise ConstructionError("subspace and ball dimensions differ")
        c = self.subspace.project(self.ball.center)
        gap = float(np.linalg.norm(c - self.ball.center))
        if gap > self.ball.radius:
            raise ConstructionError("affine subspace does not meet the ball")
        c.setflags(write=False)
        object.__setattr__(self, "_inner_center", c)
        object.__setattr__(self, "_inner_radius", float(np.sqrt(max(self.ball.radius**2 - gap**2, 0.0))))

    @property
    def dim(self):
        return self.ball.dim

    @property
    def center(self):
        return self._inner_center

    def project(self, x):
        return _ball_projection(self._inner_center, self._inner_radius, self.subspace.project(x))

    def sup_norm(self):
        return float(np.linalg.norm(self._inner_center) + self._inner_radius)

    def sample(self, rng, k):
        coords = _unit_ball_sample(rng, k, self.subspace.rank) * self._inner_radius
        return self._inner_center + coords @ self.subspace.basis.T

    def intersect_subspace(self, sub):
        return AffineSlab(self.subspace.intersect(sub), self.ball)


def project(domain: ConvexDomain, x) -> np.ndarray:
    """Metric projection of ``x`` onto ``domain``."""
    return domain.project(as_vector(x, domain.dim))


def distance_to_hull(points, p) -> float:
    """Upper bound on the distance from ``p`` to the convex hull of ``points`` (k x d).

    Solves the simplex-constrained least squares problem with NNLS, the
    sum-to-one constraint enforced by a heavily weighted extra row. The
    weights are renormalised afterwards, so the returned value is the
    distance to an actual hull point.
    """
    pts = np.asarray(points, dtype=float)
    p = as_vector(p, pts.shape[1])
    scale = max(1.0, float(np.max(np.abs(pts))), float(np.max(np.abs(p))))
    weight = 1e6 * scale
    a = np.vstack([pts.T, weight * np.ones(pts.shape[0])])
    b = np.concatenate([p, [weight]])
    w, _ = nnls(a, b, maxiter=50 * pts.shape[0])
    total = w.sum()
    if total <= 0:
        return float(np.min(np.linalg.norm(pts - p, axis=1)))
    w /= total
    return float(np.linalg.norm(pts.T @ w - p))
