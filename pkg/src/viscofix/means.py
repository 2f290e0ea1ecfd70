"""Mean sequences and the averaged operators they induce.

``Cesaro`` averages the first n powers of a discrete representation,
``IntegralMean`` averages a continuous flow over [0, a_n]. The default
evaluation path only ever calls the representation pointwise, so black-box
operators go through the same code; ``averaged_matrix`` is the closed-form
path for linear representations and serves as a cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConstructionError, NumericalError, UsageError
from .semigroup import ContinuousFlow, SemigroupRep, check_member
from .space import as_vector, distance_to_hull

GROWTH_KINDS = ("linear", "quadratic", "exponential")


@dataclass(frozen=True)
class GrowthRule:
    """n -> a_n for integral means: ``n``, ``n**2`` or ``min(2**n, cap)``."""

    kind: str = "linear"
    cap: float = 1024.0

    def __post_init__(self):
        if self.kind not in GROWTH_KINDS:
            raise ConstructionError(f"unknown growth rule {self.kind!r}; allowed: {', '.join(GROWTH_KINDS)}")
        if not self.cap > 0:
            raise ConstructionError("cap must be positive")

    def __call__(self, n: int) -> float:
        if self.kind == "linear":
            return float(n)
        if self.kind == "quadratic":
            return float(n) ** 2
        return float(min(2.0 ** min(n, 1023), self.cap))

    def flags(self, n_max: int) -> list[str]:
        """Diagnostics for the run range 1..n_max: non-positive, non-monotone or saturating values."""
        values = [self(n) for n in range(1, n_max + 1)]
        out = []
        if any(v <= 0 for v in values):
            out.append("a_n must be positive")
        if any(b < a for a, b in zip(values, values[1:])):
            out.append("a_n is not monotone")
        if n_max > 1 and values[-1] == values[-2]:
            out.append(f"a_n saturates at {values[-1]:g}; a_n -> infinity fails on this range")
        return out


@dataclass(frozen=True)
class Cesaro:
    """mu_n(f) = (1/n) sum_{k=1..n} f(k) over S = N."""

    kind = "cesaro"

    def weights(self, n: int) -> np.ndarray:
        return np.full(n, 1.0 / n)


@dataclass(frozen=True)
class IntegralMean:
    """mu_n(f) = (1/a_n) int_0^{a_n} f(t) dt over S = R+."""

    a: GrowthRule = GrowthRule()
    quadrature_tol: float = 1e-10
    max_panels: int = 2**20
    kind = "integral"

    def __post_init__(self):
        if not self.quadrature_tol > 0:
            raise ConstructionError("quadrature_tol must be positive")

    def horizon(self, n: int) -> float:
        a = self.a(n)
        if not a > 0:
            raise UsageError(f"a_n must be positive, got {a}")
        return a


MeanSequence = Cesaro | IntegralMean


def check_compatible(mu: MeanSequence, rep: SemigroupRep) -> None:
    if isinstance(mu, IntegralMean) != rep.continuous:
        expected = "an integral mean" if rep.continuous else "a Cesaro mean"
        raise UsageError(f"{rep.kind} representation needs {expected}, got {mu.kind}")


def _check_index(n):
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise UsageError(f"mean index n must be a positive integer, got {n!r}")
    return int(n)


def cesaro_average(rep: SemigroupRep, n: int, x: np.ndarray) -> np.ndarray:
    """(1/n) sum_{k=1..n} T^k x by iterated application of T_1."""
    y = x
    total = np.zeros_like(x, dtype=float)
    for _ in range(n):
        y = rep.unit(y)
        total += y
    return total / n


def composite_simpson(func, a: float, b: float, tol: float, max_panels: int = 2**20, min_panels: int = 8):
    """Integrate a vector-valued ``func`` over [a, b] by composite Simpson with panel doubling.

    ``func`` receives an array of nodes and returns an array (len(nodes), d).
    Refinement stops once the Richardson estimate |S_2m - S_m| / 15 is at
    most ``tol`` in every coordinate. Returns ``(integral, error_estimate, panels)``.
    """
    width = b - a
    ends = func(np.array([a, b]))
    ends = ends[0] + ends[1]
    interior = func(np.array([a + 0.5 * width]))[0]  # all interior nodes so far
    odd = interior
    intervals = 2
    prev = width / 6.0 * (ends + 4.0 * odd)
    while True:
        h = width / (2 * intervals)
        nodes = a + h * (2 * np.arange(intervals) + 1)
        odd = func(nodes).sum(axis=0)
        current = h / 3.0 * (ends + 4.0 * odd + 2.0 * interior)
        interior = interior + odd
        intervals *= 2
        panels = intervals // 2
        err = float(np.max(np.abs(current - prev))) / 15.0
        if panels >= min_panels and err <= tol:
            return current, err, panels
        if panels >= max_panels:
            raise NumericalError(
                f"quadrature stopped at {panels} panels with error estimate {err:.3e} > {tol:.3e}",
                best=current,
                achieved=err,
            )
        prev = current


def integral_average(rep: SemigroupRep, a: float, x: np.ndarray, tol: float = 1e-10, max_panels: int = 2**20):
    """(1/a) int_0^a T_t x dt; ``tol`` bounds the error of the average. Returns (value, estimate, panels)."""
    value, err, panels = composite_simpson(lambda ts: rep.orbit(ts, x), 0.0, a, tol * a, max_panels)
    return value / a, err / a, panels


def _averaged(mu: MeanSequence, n: int, rep: SemigroupRep, x: np.ndarray) -> np.ndarray:
    if isinstance(mu, Cesaro):
        return cesaro_average(rep, n, x)
    try:
        value, _, _ = integral_average(rep, mu.horizon(n), x, mu.quadrature_tol, mu.max_panels)
    except NumericalError as exc:
        exc.best = exc.best / mu.horizon(n)
        raise
    return value


def averaged_apply(mu: MeanSequence, n: int, rep: SemigroupRep, x) -> np.ndarray:
    """T_{mu_n} x, the mean of the orbit of ``x`` under ``mu_n``."""
    n = _check_index(n)
    check_compatible(mu, rep)
    x = check_member(rep.domain, x)
    return _averaged(mu, n, rep, x)


def _cesaro_matrix(m: np.ndarray, n: int) -> np.ndarray:
    lam, vec = np.linalg.eig(m)
    if np.linalg.cond(vec) < 1e8:
        gains = np.empty_like(lam)
        for i, z in enumerate(lam):
            if abs(1 - z) < 1e-14:
                gains[i] = 1.0
            else:
                gains[i] = z * (1 - z**n) / (n * (1 - z))
        return np.real((vec * gains) @ np.linalg.inv(vec))
    # defective matrix: accumulate the powers directly
    power = np.eye(m.shape[0])
    total = np.zeros_like(m)
    for _ in range(n):
        power = power @ m
        total += power
    return total / n


def ergodic_gain(u):
    """(1 - exp(-u)) / u with the removable singularity at 0 filled in."""
    u = np.asarray(u, dtype=float)
    safe = np.where(u == 0, 1.0, u)
    return np.where(u == 0, 1.0, -np.expm1(-safe) / safe)


def averaged_matrix(mu: MeanSequence, n: int, rep: SemigroupRep) -> np.ndarray:
    """Matrix of T_{mu_n} for a linear representation (eigen-accelerated path)."""
    n = _check_index(n)
    check_compatible(mu, rep)
    if not rep.linear:
        raise UsageError(f"{rep.kind} is not linear; no matrix form for its averaged operator")
    if isinstance(mu, Cesaro):
        return _cesaro_matrix(rep.matrix(1), n)
    assert isinstance(rep, ContinuousFlow)
    v = rep.eigenvectors
    return (v * ergodic_gain(mu.horizon(n) * rep.eigenvalues)) @ v.T


def cesaro_left_regularity_defect(n: int, s: int, exact: bool = False):
    """||l_s^* mu_n - mu_n|| for the Cesaro mean, as an l1 norm of weight vectors.

    mu_n puts weight 1/n on 1..n and its translate on s+1..s+n.
    """
    if n < 1 or s < 1:
        raise UsageError("n and s must be positive integers")
    length = n + s
    base = [Fraction(0)] * length
    shifted = [Fraction(0)] * length
    for k in range(n):
        base[k] += Fraction(1, n)
        shifted[k + s] += Fraction(1, n)
    defect = sum(abs(p - q) for p, q in zip(base, shifted))
    return defect if exact else float(defect)


def integral_left_regularity_defect(a: float, s: float) -> float:
    """||l_s^* mu - mu|| for the uniform density on [0, a] against its shift to [s, s+a]."""
    if not a > 0 or s < 0:
        raise UsageError("need a > 0 and s >= 0")
    overlap = max(0.0, a - s)
    # each density is 1/a; they differ by 1/a outside the overlap on both sides
    return 2.0 * (a - overlap) / a


def orbit_hull_distance(mu: MeanSequence, n: int, rep: SemigroupRep, x, samples: int = 64) -> float:
    """Distance from T_{mu_n} x to the hull of ``samples`` orbit points (diagnostic)."""
    n = _check_index(n)
    x = check_member(rep.domain, x)
    check_compatible(mu, rep)
    if isinstance(mu, Cesaro):
        ks = np.unique(np.round(np.linspace(1, n, min(n, samples))).astype(int))
        pts = np.array([rep.step(int(k), x) for k in ks])
    else:
        pts = rep.orbit(np.linspace(0.0, mu.horizon(n), samples), x)
    return distance_to_hull(pts, _averaged(mu, n, rep, x))


def mean_residual(mu: MeanSequence, n: int, rep: SemigroupRep, t, ys) -> float:
    """max over y in ``ys`` of ||T_t(T_{mu_n} y) - T_{mu_n} y||."""
    t = rep.check_time(t)
    worst = 0.0
    for y in np.atleast_2d(ys):
        m = _averaged(mu, n, rep, as_vector(y, rep.dim))
        worst = max(worst, float(np.linalg.norm(rep.step(t, m) - m)))
    return worst


def left_regularity_defect(mu: MeanSequence, n: int, s) -> float:
    if isinstance(mu, Cesaro):
        return cesaro_left_regularity_defect(n, int(s))
    return integral_left_regularity_defect(mu.horizon(n), float(s))


__all__ = [
    "Cesaro",
    "GrowthRule",
    "IntegralMean",
    "MeanSequence",
    "averaged_apply",
    "averaged_matrix",
    "cesaro_average",
    "cesaro_left_regularity_defect",
    "composite_simpson",
    "ergodic_gain",
    "integral_average",
    "integral_left_regularity_defect",
    "left_regularity_defect",
    "mean_residual",
    "orbit_hull_distance",
]
