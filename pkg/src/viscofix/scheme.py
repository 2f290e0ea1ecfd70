"""Implicit viscosity iteration.

For every outer index n the iterate z_n is the unique fixed point of

    N_n(z) = eps_n * f(z) + (1 - eps_n) * T_{mu_n} z,

a contraction with factor beta_n = 1 + eps_n * (alpha - 1). It is found by
Picard iteration, warm-started from z_{n-1}, and stopped by the
a-posteriori Banach bound so that the true error is at most ``inner_tol``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConstructionError, NumericalError, UsageError
from .means import Cesaro, IntegralMean, MeanSequence, _averaged, averaged_matrix, check_compatible
from .semigroup import Contraction, SemigroupRep, check_member

log = logging.getLogger(__name__)

EPSILON_KINDS = ("harmonic", "power")
DEFAULT_MAX_ITER = 10**6


@dataclass(frozen=True)
class EpsilonRule:
    """n -> eps_n: ``1/(n+1)`` (harmonic) or ``(n+1)**-p`` (power, 0 < p <= 1)."""

    kind: str = "harmonic"
    p: float = 1.0

    def __post_init__(self):
        if self.kind not in EPSILON_KINDS:
            raise ConstructionError(f"unknown epsilon rule {self.kind!r}; allowed: {', '.join(EPSILON_KINDS)}")
        if self.kind == "power" and not (0 < self.p <= 1):
            raise ConstructionError("epsilon power p must lie in (0, 1]")

    def __call__(self, n: int) -> float:
        if self.kind == "harmonic":
            return 1.0 / (n + 1)
        return float(n + 1) ** (-self.p)


@dataclass(frozen=True)
class Schedule:
    epsilon: EpsilonRule = EpsilonRule()

    def eps(self, n: int) -> float:
        return self.epsilon(n)

    def check(self, n_max: int) -> None:
        values = [self.eps(n) for n in range(1, n_max + 1)]
        bad = [n for n, e in enumerate(values, 1) if not (0 < e < 1)]
        if bad:
            raise ConstructionError(f"eps_n leaves (0, 1) at n={bad[0]}")
        if n_max > 1 and not values[-1] < values[0]:
            raise ConstructionError("eps_n does not decrease over the run range")


@dataclass(frozen=True)
class InnerSolveReport:
    iterations: int
    beta: float
    final_step: float
    apriori_bound: float
    converged: bool
    steps: tuple = field(default=(), repr=False)
    iterates: tuple | None = field(default=None, repr=False)

    @property
    def aposteriori_bound(self) -> float:
        """beta / (1 - beta) * final_step, a bound on the distance to the fixed point."""
        return self.beta / (1 - self.beta) * self.final_step


@dataclass(frozen=True, eq=False)
class SchemeState:
    n: int
    eps: float
    z: np.ndarray
    residuals: dict
    inner_report: InnerSolveReport

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)


class SchemeError(NumericalError):
    """An inner solve failed; ``trajectory`` holds the states computed before it."""

    def __init__(self, message, trajectory, cause: NumericalError):
        super().__init__(message, best=cause.best, achieved=cause.achieved, report=cause.report)
        self.trajectory = trajectory


def contraction_factor(eps: float, alpha: float) -> float:
    return 1.0 + eps * (alpha - 1.0)


def averaged_operator(mu: MeanSequence, n: int, rep: SemigroupRep, cached: bool = False) -> Callable:
    """z -> T_{mu_n} z; ``cached`` builds the matrix once (linear reps only)."""
    if cached:
        a = averaged_matrix(mu, n, rep)
        return lambda z: a @ z
    return lambda z: _averaged(mu, n, rep, z)


def inner_solve(
    n: int,
    eps: float,
    f: Contraction,
    rep: SemigroupRep,
    mu: MeanSequence,
    z0,
    inner_tol: float = 1e-10,
    *,
    max_iter: int = DEFAULT_MAX_ITER,
    cached: bool = False,
    strict: bool = True,
    record: bool = False,
):
    """Fixed point of N_n by Picard iteration from ``z0``. Returns ``(z, InnerSolveReport)``.

    Stops once ||z_{k+1} - z_k|| <= inner_tol * (1 - beta) / beta. With
    ``strict`` a capped run raises ``NumericalError`` carrying the best
    iterate; otherwise it returns it with ``converged=False``.
    """
    if not inner_tol > 0:
        raise UsageError("inner_tol must be positive")
    if not (0 < eps < 1):
        raise UsageError(f"eps must lie in (0, 1), got {eps}")
    check_compatible(mu, rep)
    z = check_member(rep.domain, z0, "z0").astype(float)
    beta = contraction_factor(eps, f.alpha)
    if beta > 1 - 1e-6:
        warnings.warn(f"contraction factor {beta:.9f} is close to 1; inner solve may be slow", RuntimeWarning)
    threshold = inner_tol * (1 - beta) / max(beta, 1e-16)
    op = averaged_operator(mu, n, rep, cached)

    steps = []
    iterates = [z] if record else None
    first = step = 0.0
    converged = False
    for k in range(1, max_iter + 1):
        z_next = eps * f(z) + (1 - eps) * op(z)
        step = float(np.linalg.norm(z_next - z))
        z = z_next
        steps.append(step)
        if record:
            iterates.append(z)
        if k == 1:
            first = step
        if step <= threshold:
            converged = True
            break
    iterations = len(steps)
    report = InnerSolveReport(
        iterations=iterations,
        beta=beta,
        final_step=step,
        apriori_bound=beta**iterations / (1 - beta) * first,
        converged=converged,
        steps=tuple(steps),
        iterates=None if iterates is None else tuple(iterates),
    )
    if not converged and strict:
        raise NumericalError(
            f"inner solve at n={n} hit the iteration cap {max_iter}",
            best=z,
            achieved=report.aposteriori_bound,
            report=report,
        )
    return z, report


def run_scheme(
    f: Contraction,
    rep: SemigroupRep,
    mu: MeanSequence,
    schedule: Schedule,
    n_outer: int,
    inner_tol: float = 1e-10,
    sample_ts=(),
    *,
    z0=None,
    cached: bool = False,
    max_iter: int = DEFAULT_MAX_ITER,
    strict: bool = True,
) -> list[SchemeState]:
    """States z_1..z_N of the viscosity iteration, each warm-started from the previous one."""
    if n_outer < 1:
        raise UsageError("n_outer must be at least 1")
    check_compatible(mu, rep)
    if f.dim != rep.dim:
        raise UsageError("contraction and representation dimensions differ")
    ts = [rep.check_time(t) for t in sample_ts]
    z = check_member(rep.domain, rep.domain.center if z0 is None else z0, "z0")
    states: list[SchemeState] = []
    for n in range(1, n_outer + 1):
        eps = schedule.eps(n)
        try:
            z, report = inner_solve(n, eps, f, rep, mu, z, inner_tol, max_iter=max_iter, cached=cached, strict=strict)
        except NumericalError as exc:
            raise SchemeError(f"outer step n={n}: {exc}", states, exc) from exc
        residuals = {t: float(np.linalg.norm(z - rep.step(t, z))) for t in ts}
        states.append(SchemeState(n, eps, z, residuals, report))
        log.debug("n=%d eps=%.3g iters=%d max_res=%.3e", n, eps, report.iterations, max(residuals.values(), default=0.0))
    return states


def eps_fixed_membership(rep: SemigroupRep, t, x, eps: float) -> bool:
    """True iff ||x - T_t x|| <= eps (x is an eps-approximate fixed point of T_t)."""
    if eps < 0:
        raise UsageError("eps must be nonnegative")
    x = check_member(rep.domain, x)
    return bool(np.linalg.norm(x - rep.step(rep.check_time(t), x)) <= eps)


def linear_solve(n: int, eps: float, f: Contraction, rep: SemigroupRep, mu: MeanSequence) -> np.ndarray:
    """Solve (I - eps M - (1 - eps) A_n) z = eps b directly, ignoring the projection in f.

    Equals the fixed point of N_n whenever M z + b stays inside the domain.
    """
    a = averaged_matrix(mu, n, rep)
    m, b = f.affine_parts()
    lhs = np.eye(rep.dim) - eps * m - (1 - eps) * a
    return np.linalg.solve(lhs, eps * b)


__all__ = [
    "Cesaro",
    "EpsilonRule",
    "InnerSolveReport",
    "IntegralMean",
    "Schedule",
    "SchemeError",
    "SchemeState",
    "contraction_factor",
    "eps_fixed_membership",
    "inner_solve",
    "linear_solve",
    "run_scheme",
]
