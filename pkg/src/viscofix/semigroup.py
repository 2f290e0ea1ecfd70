"""Nonexpansive semigroup representations and contractions on convex domains.

Four closed kinds of representation {T_t : t in S} are supported:

* ``DiscretePower``: T_k = T^k over S = N, for a matrix with operator norm
  at most one, or any callable (black box, no fixed-set oracle).
* ``Rotation``: planar rotations by ``k * theta`` acting on consecutive
  coordinate pairs.
* ``ContinuousFlow``: T_t = exp(-t A) over S = R+, A symmetric PSD.
* ``ProjectionMap``: T_0 = I and T_k = P for k >= 1, P a metric projection.
"""
from __future__ import annotations

import numbers
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConstructionError, UnsupportedOperation, UsageError
from .space import MEMBERSHIP_TOL, AffineSubspace, ConvexDomain, as_vector

NORM_SLACK = 1e-12
NULL_TOL = 1e-10


def _member_tol(domain: ConvexDomain) -> float:
    # rounding in convex combinations scales with the size of the domain
    return MEMBERSHIP_TOL * max(1.0, domain.sup_norm())


def check_member(domain: ConvexDomain, x, what: str = "point") -> np.ndarray:
    x = as_vector(x, domain.dim)
    gap = float(np.linalg.norm(x - domain.project(x)))
    if gap > _member_tol(domain):
        raise UsageError(f"{what} lies outside the domain (distance {gap:.3e})")
    return x


def _null_space(m: np.ndarray, tol: float = NULL_TOL) -> np.ndarray:
    _, s, vt = np.linalg.svd(m)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))
    return vt[rank:].T.copy()


class SemigroupRep:
    """Common interface for representations of S as nonexpansive self-maps."""

    domain: ConvexDomain
    continuous = False  # S = R+ when True, S = N otherwise
    kind = "abstract"

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def linear(self) -> bool:
        return False

    def matrix(self, t) -> np.ndarray:
        raise UnsupportedOperation(f"{self.kind} has no matrix form")

    def step(self, t, x: np.ndarray) -> np.ndarray:
        """T_t x without argument validation."""
        raise NotImplementedError

    def unit(self, x: np.ndarray) -> np.ndarray:
        """T_1 x without argument validation."""
        return self.step(1, x)

    def orbit(self, ts, x: np.ndarray) -> np.ndarray:
        return np.array([self.step(t, x) for t in ts]).reshape(len(ts), self.dim)

    def fixed_subspace(self) -> AffineSubspace:
        raise UnsupportedOperation(f"{self.kind} has no fixed-set oracle (diagnostics-only)")

    def check_time(self, t):
        if self.continuous:
            if not isinstance(t, numbers.Real) or not np.isfinite(t) or t < 0:
                raise UsageError(f"{self.kind}: t must be a nonnegative real, got {t!r}")
            return float(t)
        if isinstance(t, numbers.Integral) and t >= 0:
            return int(t)
        if isinstance(t, numbers.Real) and float(t).is_integer() and t >= 0:
            return int(t)
        raise UsageError(f"{self.kind}: t must be a nonnegative integer, got {t!r}")


@dataclass(frozen=True, eq=False)
class DiscretePower(SemigroupRep):
    """Powers of a single nonexpansive map ``operator`` (matrix or callable)."""

    operator: np.ndarray | Callable[[np.ndarray], np.ndarray]
    domain: ConvexDomain
    kind = "discrete_power"

    def __post_init__(self):
        if callable(self.operator):
            return
        m = np.array(self.operator, dtype=float)
        if m.shape != (self.domain.dim, self.domain.dim) or not np.all(np.isfinite(m)):
            raise ConstructionError("operator must be a finite d x d matrix")
        if np.linalg.norm(m, 2) > 1 + NORM_SLACK:
            raise ConstructionError("operator norm exceeds 1, map is not nonexpansive")
        m.setflags(write=False)
        object.__setattr__(self, "operator", m)

    @property
    def linear(self):
        return not callable(self.operator)

    def matrix(self, t):
        if not self.linear:
            return super().matrix(t)
        return np.linalg.matrix_power(self.operator, int(t))

    def unit(self, x):
        if self.linear:
            return self.operator @ x
        return np.asarray(self.operator(x), dtype=float)

    def step(self, t, x):
        if self.linear:
            return self.matrix(t) @ x
        y = np.array(x, dtype=float)
        for _ in range(int(t)):
            y = self.unit(y)
        return y

    def fixed_subspace(self):
        if not self.linear:
            return super().fixed_subspace()
        return AffineSubspace(_null_space(self.operator - np.eye(self.dim)), np.zeros(self.dim))


def rotation_matrix(angle: float, dim: int) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    m = np.zeros((dim, dim))
    for i in range(0, dim, 2):
        m[i:i + 2, i:i + 2] = [[c, -s], [s, c]]
    return m


@dataclass(frozen=True, eq=False)
class Rotation(SemigroupRep):
    """T_k rotates every coordinate pair by ``k * theta``; needs even d."""

    theta: float
    domain: ConvexDomain
    _unit: np.ndarray = field(init=False, repr=False)
    kind = "rotation"

    def __post_init__(self):
        if not np.isfinite(self.theta):
            raise ConstructionError("theta must be finite")
        if self.domain.dim % 2:
            raise ConstructionError("rotation needs an even dimension")
        object.__setattr__(self, "theta", float(self.theta))
        m = rotation_matrix(self.theta, self.dim)
        m.setflags(write=False)
        object.__setattr__(self, "_unit", m)

    @property
    def linear(self):
        return True

    def matrix(self, t):
        return rotation_matrix(t * self.theta, self.dim)

    def unit(self, x):
        return self._unit @ x

    def step(self, t, x):
        return self.matrix(t) @ x

    def fixed_subspace(self):
        return AffineSubspace(_null_space(self._unit - np.eye(self.dim)), np.zeros(self.dim))


@dataclass(frozen=True, eq=False)
class ContinuousFlow(SemigroupRep):
    """T_t = exp(-t A) for a symmetric positive semidefinite generator A."""

    generator: np.ndarray
    domain: ConvexDomain
    eigenvalues: np.ndarray = field(init=False, repr=False)
    eigenvectors: np.ndarray = field(init=False, repr=False)
    continuous = True
    kind = "continuous_flow"

    def __post_init__(self):
        a = np.array(self.generator, dtype=float)
        if a.shape != (self.domain.dim, self.domain.dim) or not np.all(np.isfinite(a)):
            raise ConstructionError("generator must be a finite d x d matrix")
        if not np.allclose(a, a.T, rtol=0, atol=1e-12):
            raise ConstructionError("generator must be symmetric")
        lam, vec = np.linalg.eigh(a)
        if lam.size and lam[0] < -1e-12 * max(1.0, abs(lam[-1])):
            raise ConstructionError("generator must be positive semidefinite")
        lam = np.maximum(lam, 0.0)
        for arr in (a, lam, vec):
            arr.setflags(write=False)
        object.__setattr__(self, "generator", a)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", vec)

    @property
    def linear(self):
        return True

    def matrix(self, t):
        v = self.eigenvectors
        return (v * np.exp(-t * self.eigenvalues)) @ v.T

    def step(self, t, x):
        v = self.eigenvectors
        return v @ (np.exp(-t * self.eigenvalues) * (v.T @ x))

    def orbit(self, ts, x):
        v = self.eigenvectors
        coeff = v.T @ x
        ts = np.asarray(ts, dtype=float)
        return (np.exp(-np.outer(ts, self.eigenvalues)) * coeff) @ v.T

    def fixed_subspace(self):
        scale = max(1.0, float(self.eigenvalues[-1])) if self.eigenvalues.size else 1.0
        kernel = self.eigenvectors[:, self.eigenvalues <= NULL_TOL * scale]
        return AffineSubspace(kernel, np.zeros(self.dim))


@dataclass(frozen=True, eq=False)
class ProjectionMap(SemigroupRep):
    """T_0 = I and T_k = P_target for k >= 1 (P is idempotent, so the law holds)."""

    target: AffineSubspace | ConvexDomain
    domain: ConvexDomain
    kind = "projection_map"

    def __post_init__(self):
        if self.target.dim != self.domain.dim:
            raise ConstructionError("projection target dimension differs from the domain")

    @property
    def linear(self):
        return isinstance(self.target, AffineSubspace) and not np.any(self.target.offset)

    def matrix(self, t):
        if not self.linear:
            return super().matrix(t)
        if int(t) == 0:
            return np.eye(self.dim)
        return self.target.basis @ self.target.basis.T

    def step(self, t, x):
        if int(t) == 0:
            return np.array(x, dtype=float)
        return self.target.project(x)

    def fixed_subspace(self):
        if isinstance(self.target, AffineSubspace):
            return self.target
        return super().fixed_subspace()


def apply(rep: SemigroupRep, t, x) -> np.ndarray:
    """T_t x with validation of ``t`` against S and of ``x`` against the domain."""
    t = rep.check_time(t)
    x = check_member(rep.domain, x)
    return rep.step(t, x)


@dataclass(frozen=True, eq=False)
class FixedSetOracle:
    """Fix(S) described as ``subspace`` intersected with ``domain``."""

    subspace: AffineSubspace
    domain: ConvexDomain
    region: ConvexDomain = field(init=False, repr=False)

    def __post_init__(self):
        try:
            region = self.domain.intersect_subspace(self.subspace)
        except ConstructionError as exc:
            raise ConstructionError(f"fixed-point set is empty: {exc}") from None
        object.__setattr__(self, "region", region)

    @property
    def dim(self):
        return self.domain.dim

    def project(self, x) -> np.ndarray:
        return self.region.project(as_vector(x, self.dim))

    def contains(self, x, tol: float = 1e-10) -> bool:
        return self.region.contains(x, tol)

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        return self.region.sample(rng, k)


def fixed_set(rep: SemigroupRep) -> FixedSetOracle:
    """Exact common fixed-point set of ``rep``; black boxes raise ``UnsupportedOperation``."""
    return FixedSetOracle(rep.fixed_subspace(), rep.domain)


def check_invariance(rep: SemigroupRep, rng: np.random.Generator, samples: int = 64, ts=None) -> float:
    """Largest distance to the domain over sampled images T_t x.

    Interior samples are mixed with boundary points obtained by projecting
    far-away points, since linear maps are most likely to escape there.
    """
    d = rep.domain
    pts = list(d.sample(rng, samples))
    far = d.center + 1e3 * max(1.0, d.sup_norm()) * rng.standard_normal((samples, rep.dim))
    pts += [d.project(p) for p in far]
    if ts is None:
        ts = rng.uniform(0, 10, 8) if rep.continuous else range(1, 9)
    worst = 0.0
    for x in pts:
        for t in ts:
            y = rep.step(rep.check_time(t), x)
            worst = max(worst, float(np.linalg.norm(y - d.project(y))))
    return worst


@dataclass(frozen=True, eq=False)
class Contraction:
    """An alpha-contraction x -> P_C(M x + b) or the constant map x -> P_C(c)."""

    alpha: float
    domain: ConvexDomain
    matrix: np.ndarray | None = None
    offset: np.ndarray | None = None
    constant: np.ndarray | None = None

    def __post_init__(self):
        alpha = float(self.alpha)
        if not (0.0 <= alpha < 1.0):
            raise ConstructionError("alpha must be < 1 and >= 0")
        object.__setattr__(self, "alpha", alpha)
        d = self.domain.dim
        if self.constant is not None:
            if self.matrix is not None or self.offset is not None:
                raise ConstructionError("give either a constant or an affine map, not both")
            c = np.array(as_vector(self.constant, d))
            c.setflags(write=False)
            object.__setattr__(self, "constant", c)
            return
        if self.matrix is None:
            raise ConstructionError("contraction needs a constant or a matrix")
        m = np.array(self.matrix, dtype=float)
        if m.ndim == 0:
            m = m * np.eye(d)
        if m.shape != (d, d) or not np.all(np.isfinite(m)):
            raise ConstructionError("contraction matrix must be a finite d x d array")
        if np.linalg.norm(m, 2) > alpha + NORM_SLACK:
            raise ConstructionError(f"matrix norm {np.linalg.norm(m, 2):.6g} exceeds alpha={alpha}")
        b = np.zeros(d) if self.offset is None else np.array(as_vector(self.offset, d))
        m.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "offset", b)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def is_constant(self) -> bool:
        return self.constant is not None

    def affine_parts(self) -> tuple[np.ndarray, np.ndarray]:
        """(M, b) of the unprojected base map; a constant map has M = 0."""
        if self.is_constant:
            return np.zeros((self.dim, self.dim)), self.constant
        return self.matrix, self.offset

    def base(self, x: np.ndarray) -> np.ndarray:
        if self.is_constant:
            return self.constant.copy()
        return self.matrix @ x + self.offset

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.domain.project(self.base(x))


def apply_contraction(f: Contraction, x) -> np.ndarray:
    x = check_member(f.domain, x)
    return f(x)
