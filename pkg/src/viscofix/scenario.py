"""Scenario files: a YAML document describing a finite family of runs.

Example::

    dimension: 2
    seed: 0
    indices:
      - label: rot
        domain: {kind: ball, center: [0, 0], radius: 1}
        rep: {kind: rotation, theta_over_pi: 0.5}
        contraction: {alpha: 0, constant: [0.3, 0.1]}
        mean: {kind: cesaro}
        schedule: {epsilon: harmonic}
        n_outer: 1000
        tolerances: {inner_tol: 1.0e-10, family_tol: 5.0e-3, residual_target: 1.0e-2}
        sample_ts: [1, 2, 3]

Validation reports every problem found, each prefixed by its field path.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .errors import ConstructionError, UnsupportedOperation, UsageError, ViscofixError
from .limit import FamilyEntry, Tolerances
from .means import GROWTH_KINDS, Cesaro, GrowthRule, IntegralMean
from .scheme import EPSILON_KINDS, EpsilonRule, Schedule
from .semigroup import (
    Contraction,
    ContinuousFlow,
    DiscretePower,
    ProjectionMap,
    Rotation,
    check_invariance,
    fixed_set,
)
from .space import AffineSlab, AffineSubspace, Ball, Box

DOMAIN_KINDS = ("ball", "box", "affine_slab")
REP_KINDS = ("discrete_power", "continuous_flow", "rotation", "projection_map")
MEAN_KINDS = ("cesaro", "integral")
TOLERANCE_KEYS = tuple(Tolerances.__dataclass_fields__)
INVARIANCE_TOL = 1e-9
_LABEL = re.compile(r"^[A-Za-z0-9_.-]+$")


class ScenarioError(ViscofixError):
    """Raised with the full list of problems found in a scenario file."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


class ScenarioParseError(ScenarioError):
    pass


@dataclass(frozen=True)
class IndexSpec:
    label: str
    domain: dict
    rep: dict
    contraction: dict
    mean: dict
    schedule: dict
    n_outer: int
    tolerances: dict
    sample_ts: tuple
    anchor_shift: tuple | None = None

    def to_dict(self) -> dict:
        out = {
            "label": self.label,
            "domain": self.domain,
            "rep": self.rep,
            "contraction": self.contraction,
            "mean": self.mean,
            "schedule": self.schedule,
            "n_outer": self.n_outer,
            "tolerances": self.tolerances,
            "sample_ts": list(self.sample_ts),
        }
        if self.anchor_shift is not None:
            out["anchor_shift"] = list(self.anchor_shift)
        return out


@dataclass(frozen=True)
class ScenarioFile:
    dimension: int
    indices: tuple
    seed: int = 0
    source: str | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "seed": self.seed, "indices": [i.to_dict() for i in self.indices]}


class _Collector:
    def __init__(self):
        self.errors: list[str] = []

    def add(self, path: str, msg: str):
        self.errors.append(f"{path}: {msg}")

    def number(self, raw, path, *, positive=False, integer=False, default=None):
        if raw is None:
            if default is not None:
                return default
            self.add(path, "missing")
            return None
        try:
            value = float(raw)  # YAML 1.1 reads 1e-10 as a string
        except (TypeError, ValueError):
            self.add(path, f"expected a number, got {raw!r}")
            return None
        if not math.isfinite(value):
            self.add(path, "must be finite")
            return None
        if positive and value <= 0:
            self.add(path, "must be positive")
            return None
        if integer:
            if not value.is_integer():
                self.add(path, "must be an integer")
                return None
            return int(value)
        return value

    def vector(self, raw, path, dim):
        if not isinstance(raw, (list, tuple)):
            self.add(path, f"expected a list of {dim} numbers")
            return None
        if len(raw) != dim:
            self.add(path, f"expected {dim} entries, got {len(raw)}")
            return None
        vals = [self.number(v, f"{path}[{i}]") for i, v in enumerate(raw)]
        return None if any(v is None for v in vals) else vals

    def matrix(self, raw, path, rows, cols):
        if not isinstance(raw, (list, tuple)) or len(raw) != rows:
            self.add(path, f"expected a {rows} x {cols} matrix")
            return None
        out = [self.vector(r, f"{path}[{i}]", cols) for i, r in enumerate(raw)]
        return None if any(r is None for r in out) else out

    def mapping(self, raw, path, allowed):
        if not isinstance(raw, dict):
            self.add(path, "expected a mapping")
            return None
        for key in raw:
            if key not in allowed:
                self.add(f"{path}.{key}", f"unknown field; allowed: {', '.join(allowed)}")
        return raw

    def kind(self, raw, path, allowed):
        if raw not in allowed:
            self.add(path, f"unknown kind {raw!r}; allowed kinds: {', '.join(allowed)}")
            return None
        return raw


def _norm_domain(c: _Collector, raw, path, d):
    raw = c.mapping(raw, path, ("kind", "center", "radius", "lower", "upper", "basis", "offset"))
    if raw is None:
        return None
    kind = c.kind(raw.get("kind"), f"{path}.kind", DOMAIN_KINDS)
    if kind == "ball" or kind == "affine_slab":
        out = {
            "kind": kind,
            "center": c.vector(raw.get("center"), f"{path}.center", d),
            "radius": c.number(raw.get("radius"), f"{path}.radius", positive=True),
        }
        if kind == "affine_slab":
            basis = raw.get("basis")
            if isinstance(basis, list):
                out["basis"] = c.matrix(basis, f"{path}.basis", len(basis), d)
            else:
                c.add(f"{path}.basis", "expected a list of vectors")
            out["offset"] = c.vector(raw.get("offset", [0.0] * d), f"{path}.offset", d)
        return out
    if kind == "box":
        out = {"kind": kind, "lower": c.vector(raw.get("lower"), f"{path}.lower", d), "upper": c.vector(raw.get("upper"), f"{path}.upper", d)}
        if out["lower"] and out["upper"] and any(lo > hi for lo, hi in zip(out["lower"], out["upper"])):
            c.add(path, "lower must be <= upper componentwise")
        return out
    return None


def _norm_rep(c: _Collector, raw, path, d):
    raw = c.mapping(raw, path, ("kind", "theta", "theta_over_pi", "generator", "matrix", "basis", "offset"))
    if raw is None:
        return None
    kind = c.kind(raw.get("kind"), f"{path}.kind", REP_KINDS)
    if kind == "rotation":
        if ("theta" in raw) == ("theta_over_pi" in raw):
            c.add(path, "give exactly one of theta, theta_over_pi")
            return None
        key = "theta" if "theta" in raw else "theta_over_pi"
        return {"kind": kind, key: c.number(raw[key], f"{path}.{key}")}
    if kind == "continuous_flow":
        return {"kind": kind, "generator": c.matrix(raw.get("generator"), f"{path}.generator", d, d)}
    if kind == "discrete_power":
        return {"kind": kind, "matrix": c.matrix(raw.get("matrix"), f"{path}.matrix", d, d)}
    if kind == "projection_map":
        basis = raw.get("basis", [])
        if not isinstance(basis, list):
            c.add(f"{path}.basis", "expected a list of vectors")
            return None
        return {
            "kind": kind,
            "basis": c.matrix(basis, f"{path}.basis", len(basis), d),
            "offset": c.vector(raw.get("offset", [0.0] * d), f"{path}.offset", d),
        }
    return None


def _norm_contraction(c: _Collector, raw, path, d):
    raw = c.mapping(raw, path, ("alpha", "constant", "matrix", "offset"))
    if raw is None:
        return None
    alpha = c.number(raw.get("alpha"), f"{path}.alpha")
    if alpha is not None and not alpha < 1:
        c.add(f"{path}.alpha", "alpha must be < 1")
    elif alpha is not None and alpha < 0:
        c.add(f"{path}.alpha", "alpha must be >= 0")
    out = {"alpha": alpha}
    if "constant" in raw:
        if "matrix" in raw or "offset" in raw:
            c.add(path, "give either constant or matrix/offset")
        out["constant"] = c.vector(raw["constant"], f"{path}.constant", d)
        return out
    m = raw.get("matrix")
    if isinstance(m, (int, float, str)) and not isinstance(m, bool):
        out["matrix"] = c.number(m, f"{path}.matrix")
    else:
        out["matrix"] = c.matrix(m, f"{path}.matrix", d, d)
    out["offset"] = c.vector(raw.get("offset", [0.0] * d), f"{path}.offset", d)
    return out


def _norm_mean(c: _Collector, raw, path):
    raw = c.mapping(raw, path, ("kind", "a", "cap", "quadrature_tol"))
    if raw is None:
        return None
    kind = c.kind(raw.get("kind"), f"{path}.kind", MEAN_KINDS)
    if kind == "integral":
        a = raw.get("a", "linear")
        if a not in GROWTH_KINDS:
            c.add(f"{path}.a", f"unknown a_n rule {a!r}; allowed: {', '.join(GROWTH_KINDS)}")
        return {
            "kind": kind,
            "a": a,
            "cap": c.number(raw.get("cap"), f"{path}.cap", positive=True, default=1024.0),
            "quadrature_tol": c.number(raw.get("quadrature_tol"), f"{path}.quadrature_tol", positive=True, default=1e-10),
        }
    return {"kind": kind} if kind else None


def _norm_schedule(c: _Collector, raw, path):
    raw = c.mapping(raw if raw is not None else {}, path, ("epsilon", "p"))
    if raw is None:
        return None
    eps = raw.get("epsilon", "harmonic")
    if eps not in EPSILON_KINDS:
        c.add(f"{path}.epsilon", f"unknown epsilon rule {eps!r}; allowed: {', '.join(EPSILON_KINDS)}")
    p = c.number(raw.get("p"), f"{path}.p", positive=True, default=1.0)
    if eps == "power" and p is not None and p > 1:
        c.add(f"{path}.p", "p must lie in (0, 1]")
    return {"epsilon": eps, "p": p}


def _norm_index(c: _Collector, raw, path, d):
    raw = c.mapping(
        raw,
        path,
        ("label", "domain", "rep", "contraction", "mean", "schedule", "n_outer", "tolerances", "sample_ts", "anchor_shift"),
    )
    if raw is None:
        return None
    label = raw.get("label")
    if not isinstance(label, str) or not _LABEL.match(label):
        c.add(f"{path}.label", "label must be a nonempty string of letters, digits, '_', '-' or '.'")
    tol_raw = c.mapping(raw.get("tolerances", {}), f"{path}.tolerances", TOLERANCE_KEYS) or {}
    defaults = Tolerances()
    tolerances = {
        k: c.number(tol_raw.get(k), f"{path}.tolerances.{k}", positive=True, default=getattr(defaults, k))
        for k in TOLERANCE_KEYS
    }
    ts = raw.get("sample_ts", [])
    if not isinstance(ts, list):
        c.add(f"{path}.sample_ts", "expected a list")
        ts = []
    ts = [c.number(t, f"{path}.sample_ts[{i}]") for i, t in enumerate(ts)]
    if any(t is not None and t < 0 for t in ts):
        c.add(f"{path}.sample_ts", "times must be nonnegative")
    shift = raw.get("anchor_shift")
    spec = IndexSpec(
        label=label,
        domain=_norm_domain(c, raw.get("domain"), f"{path}.domain", d),
        rep=_norm_rep(c, raw.get("rep"), f"{path}.rep", d),
        contraction=_norm_contraction(c, raw.get("contraction"), f"{path}.contraction", d),
        mean=_norm_mean(c, raw.get("mean"), f"{path}.mean"),
        schedule=_norm_schedule(c, raw.get("schedule"), f"{path}.schedule"),
        n_outer=c.number(raw.get("n_outer"), f"{path}.n_outer", positive=True, integer=True),
        tolerances=tolerances,
        sample_ts=tuple(ts),
        anchor_shift=None if shift is None else c.vector(shift, f"{path}.anchor_shift", d),
    )
    if spec.anchor_shift is not None:
        spec = replace(spec, anchor_shift=tuple(spec.anchor_shift))
    return spec


def build_domain(spec: dict, d: int):
    kind = spec["kind"]
    if kind == "ball":
        return Ball(spec["center"], spec["radius"])
    if kind == "box":
        return Box(spec["lower"], spec["upper"])
    sub = AffineSubspace(np.array(spec["basis"], dtype=float).reshape(-1, d).T, spec["offset"])
    return AffineSlab(sub, Ball(spec["center"], spec["radius"]))


def build_rep(spec: dict, domain):
    kind = spec["kind"]
    d = domain.dim
    if kind == "rotation":
        theta = spec["theta"] if "theta" in spec else math.pi * spec["theta_over_pi"]
        return Rotation(theta, domain)
    if kind == "continuous_flow":
        return ContinuousFlow(np.array(spec["generator"], dtype=float), domain)
    if kind == "discrete_power":
        return DiscretePower(np.array(spec["matrix"], dtype=float), domain)
    basis = np.array(spec["basis"], dtype=float).reshape(-1, d).T
    return ProjectionMap(AffineSubspace(basis, spec["offset"]), domain)


def build_contraction(spec: dict, domain):
    if "constant" in spec:
        return Contraction(spec["alpha"], domain, constant=spec["constant"])
    return Contraction(spec["alpha"], domain, matrix=spec["matrix"], offset=spec["offset"])


def build_mean(spec: dict):
    if spec["kind"] == "cesaro":
        return Cesaro()
    return IntegralMean(GrowthRule(spec["a"], spec["cap"]), spec["quadrature_tol"])


def build_entry(spec: IndexSpec, d: int) -> FamilyEntry:
    domain = build_domain(spec.domain, d)
    rep = build_rep(spec.rep, domain)
    return FamilyEntry(
        label=spec.label,
        f=build_contraction(spec.contraction, domain),
        rep=rep,
        mu=build_mean(spec.mean),
        schedule=Schedule(EpsilonRule(spec.schedule["epsilon"], spec.schedule["p"])),
        n_outer=spec.n_outer,
        tolerances=Tolerances(**spec.tolerances),
        sample_ts=tuple(int(t) if not rep.continuous else t for t in spec.sample_ts),
        anchor_shift=None if spec.anchor_shift is None else np.array(spec.anchor_shift),
    )


def _semantic_checks(c: _Collector, spec: IndexSpec, path: str, d: int, seed: int):
    """Build the runtime objects and run the checks that need them."""
    try:
        entry = build_entry(spec, d)
    except (ConstructionError, UsageError, UnsupportedOperation) as exc:
        c.add(path, str(exc))
        return
    rep, mu = entry.rep, entry.mu
    if isinstance(mu, IntegralMean) != rep.continuous:
        c.add(f"{path}.mean.kind", f"{mu.kind} mean is incompatible with rep kind {rep.kind}")
        return
    try:
        entry.schedule.check(entry.n_outer)
    except ConstructionError as exc:
        c.add(f"{path}.schedule", str(exc))
    if isinstance(mu, IntegralMean):
        for flag in mu.a.flags(entry.n_outer):
            c.add(f"{path}.mean.a", flag)
    if not rep.continuous and any(not float(t).is_integer() for t in spec.sample_ts):
        c.add(f"{path}.sample_ts", "discrete representations need integer times")
    worst = check_invariance(rep, np.random.default_rng(seed))
    if worst > INVARIANCE_TOL:
        c.add(f"{path}.rep", f"maps points out of the domain (distance {worst:.3e})")
    try:
        fixed_set(rep)
    except ConstructionError as exc:
        c.add(f"{path}.rep", str(exc))
    except UnsupportedOperation as exc:
        c.add(f"{path}.rep", f"{exc}; certificates need an exact fixed-point set")


def normalize(doc, source: str | None = None) -> ScenarioFile:
    """Validate a parsed document and return a ``ScenarioFile``; raises ``ScenarioError`` listing all problems."""
    c = _Collector()
    doc = c.mapping(doc, "scenario", ("dimension", "seed", "indices"))
    if doc is None:
        raise ScenarioError(c.errors)
    d = c.number(doc.get("dimension"), "dimension", positive=True, integer=True)
    seed = c.number(doc.get("seed"), "seed", integer=True, default=0)
    raw_indices = doc.get("indices")
    if not isinstance(raw_indices, list) or not raw_indices:
        c.add("indices", "index list must be a nonempty list")
        raise ScenarioError(c.errors)
    if d is None:
        raise ScenarioError(c.errors)
    specs = [_norm_index(c, raw, f"indices[{i}]", d) for i, raw in enumerate(raw_indices)]
    labels = [s.label for s in specs if s is not None]
    for label in {x for x in labels if labels.count(x) > 1}:
        c.add("indices", f"duplicate label {label!r}")
    if not c.errors:
        for i, spec in enumerate(specs):
            _semantic_checks(c, spec, f"indices[{i}]", d, seed)
    if c.errors:
        raise ScenarioError(c.errors)
    return ScenarioFile(dimension=d, indices=tuple(specs), seed=seed, source=source)


def loads(text: str, source: str | None = None) -> ScenarioFile:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        problem = getattr(exc, "problem", None) or str(exc)
        raise ScenarioParseError([f"{source or '<string>'}: {where}: {problem}"]) from None
    return normalize(doc, source)


def parse_scenario(path) -> ScenarioFile:
    """Read and validate a scenario file. I/O problems surface as ``OSError``."""
    path = Path(path)
    return loads(path.read_text(), str(path))


def dumps(scenario: ScenarioFile) -> str:
    return yaml.safe_dump(scenario.to_dict(), sort_keys=False, default_flow_style=None)


def build_family(scenario: ScenarioFile) -> list[FamilyEntry]:
    return [build_entry(spec, scenario.dimension) for spec in scenario.indices]
