import math

import numpy as np
import pytest
from hypothesis import settings

from viscofix import Ball, Cesaro, ContinuousFlow, Contraction, GrowthRule, IntegralMean, Rotation, Schedule

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

C_CONST = np.array([0.3, 0.1])
OFFSET = np.array([0.3, 0.1])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def disc():
    return Ball([0.0, 0.0], 1.0)


@pytest.fixture
def rotation_problem(disc):
    """Quarter-turn rotation, constant contraction c = (0.3, 0.1), Cesaro means."""
    return dict(
        f=Contraction(0.0, disc, constant=C_CONST),
        rep=Rotation(math.pi / 2, disc),
        mu=Cesaro(),
        schedule=Schedule(),
    )


@pytest.fixture
def flow_problem(disc):
    """exp(-t diag(1, 0)), f(x) = P_C(0.5 x + (0.3, 0.1)), integral means with a_n = n."""
    return dict(
        f=Contraction(0.5, disc, matrix=0.5 * np.eye(2), offset=OFFSET),
        rep=ContinuousFlow(np.diag([1.0, 0.0]), disc),
        mu=IntegralMean(GrowthRule("linear"), quadrature_tol=1e-10),
        schedule=Schedule(),
    )


def rot(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, title: str, checks: dict) -> str:
    """Store and print one line per criterion; ``checks`` maps name -> (ok, detail)."""
    ok = all(passed for passed, _ in checks.values())
    parts = [f"{name}={'ok' if passed else 'FAILED'} ({detail})" for name, (passed, detail) in checks.items()]
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: " + "; ".join(parts)
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
