"""Command line entry point.

Exit codes: 0 converged and certified, 2 numerical non-convergence,
3 certificate failure, 4 validation error, 5 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericalError
from .limit import FamilyResult, run_family
from .scenario import ScenarioError, build_family, parse_scenario
from .scheme import inner_solve, linear_solve

EXIT_OK = 0
EXIT_NUMERICAL = 2
EXIT_CERTIFICATE = 3
EXIT_VALIDATION = 4
EXIT_IO = 5
JOBS_ENV = "VISCOFIX_JOBS"


def fmt(x) -> str:
    """Floats with 17 significant digits; integers verbatim."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def to_json(obj, indent: int = 0) -> str:
    """Deterministic JSON text with 17-digit floats (non-finite floats become null)."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{to_json(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def trajectory_table(result) -> str:
    """CSV rows n, eps_n, inner iterations, residual per sampled t, distance, gamma, gbh slack."""
    ts = sorted(result.trajectory[0].residuals) if result.trajectory else []
    header = ["n", "eps", "inner_iterations"] + [f"residual_t={fmt(t)}" for t in ts]
    header += ["distance_to_limit", "gamma", "gbh_slack"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    cert = result.certificate
    for i, state in enumerate(result.trajectory):
        row = [state.n, fmt(state.eps), state.inner_report.iterations]
        row += [fmt(state.residuals[t]) for t in ts]
        if cert is None:
            row += ["nan", "nan", "nan"]
        else:
            dist = float(np.linalg.norm(state.z - cert.retraction_image))
            row += [fmt(dist), fmt(cert.gamma_samples[i]), fmt(cert.gbh_slack[i])]
        writer.writerow(row)
    return buf.getvalue()


def exit_status(family: FamilyResult) -> int:
    if any(r.numerical_failure for r in family.results):
        return EXIT_NUMERICAL
    if not all(r.residual_ok for r in family.results):
        return EXIT_NUMERICAL
    if not family.converged_all or not family.certified_all:
        return EXIT_CERTIFICATE
    return EXIT_OK


def failure_summary(family: FamilyResult) -> list[dict]:
    out = []
    for r in family.results:
        reasons = []
        if r.error:
            reasons.append(r.error)
        if r.trajectory and not r.residual_ok:
            reasons.append("residual_target not met")
        if r.certificate is not None:
            reasons += [f"certificate check failed: {name}" for name in r.certificate.failures()]
        if reasons:
            out.append({"label": r.label, "reasons": reasons})
    return out


def certificate_document(family: FamilyResult, scenario, seed: int, status: int) -> dict:
    indices = []
    for r in family.results:
        entry = {
            "label": r.label,
            "outer_steps": len(r.trajectory),
            "final_max_residual": r.trajectory[-1].max_residual if r.trajectory else None,
            "residual_ok": r.residual_ok,
            "converged": r.converged,
            "error": r.error,
        }
        entry["certificate"] = None if r.certificate is None else r.certificate.summary()
        indices.append(entry)
    return {
        "status": status,
        "converged_all": family.converged_all,
        "certified_all": family.certified_all,
        "max_final_distance": family.max_final_distance,
        "failures": failure_summary(family),
        "indices": indices,
        "metadata": {
            "scenario": Path(scenario.source).name if scenario.source else None,
            "seed": seed,
            "viscofix": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }


def _load(path):
    """Parse a scenario or return an exit code with the errors printed."""
    try:
        return parse_scenario(path), None
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        return None, EXIT_IO
    except ScenarioError as exc:
        for err in exc.errors:
            print(f"validation error: {err}", file=sys.stderr)
        return None, EXIT_VALIDATION


def cmd_validate(args) -> int:
    scenario, code = _load(args.scenario)
    if scenario is None:
        return code
    print(f"ok: dimension {scenario.dimension}, {len(scenario.indices)} index(es): "
          + ", ".join(s.label for s in scenario.indices))
    return EXIT_OK


def cmd_run(args) -> int:
    scenario, code = _load(args.scenario)
    if scenario is None:
        return code
    seed = scenario.seed if args.seed is None else args.seed
    family = run_family(build_family(scenario), jobs=args.jobs, seed=seed)
    status = exit_status(family)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for r in family.results:
            (out / f"{r.label}.trajectory.csv").write_text(trajectory_table(r))
        (out / "certificate.json").write_text(to_json(certificate_document(family, scenario, seed, status)) + "\n")
    except OSError as exc:
        print(f"error: cannot write reports to {out}: {exc}", file=sys.stderr)
        return EXIT_IO

    print(f"{'index':<16}{'N':>7}{'final distance':>18}{'max residual':>16}  certificate")
    for r in family.results:
        res = r.trajectory[-1].max_residual if r.trajectory else math.nan
        verdict = "n/a" if r.certificate is None else ("pass" if r.certificate.passed else "FAIL")
        print(f"{r.label:<16}{len(r.trajectory):>7}{r.final_distance:>18.6e}{res:>16.6e}  {verdict}")
    if status != EXIT_OK:
        print(to_json({"status": status, "failures": failure_summary(family)}), file=sys.stderr)
    return status


def cmd_oracle_check(args) -> int:
    """Compare the iterated inner solve with a direct linear solve at every n."""
    scenario, code = _load(args.scenario)
    if scenario is None:
        return code
    status = EXIT_OK
    for entry in build_family(scenario):
        f, rep, mu = entry.f, entry.rep, entry.mu
        if not rep.linear:
            print(f"{entry.label}: skipped (representation is not linear)")
            continue
        tol = 10 * entry.tolerances.inner_tol
        worst, skipped = 0.0, 0
        z = rep.domain.center
        try:
            for n in range(1, entry.n_outer + 1):
                eps = entry.schedule.eps(n)
                z, _ = inner_solve(n, eps, f, rep, mu, z, entry.tolerances.inner_tol)
                m, b = f.affine_parts()
                if not rep.domain.contains(m @ z + b, 1e-12):
                    skipped += 1  # projection inside f is active: no linear oracle
                    continue
                worst = max(worst, float(np.linalg.norm(z - linear_solve(n, eps, f, rep, mu))))
        except NumericalError as exc:
            print(f"{entry.label}: numerical failure: {exc}")
            status = EXIT_NUMERICAL
            continue
        verdict = "pass" if worst <= tol else "FAIL"
        print(f"{entry.label}: max |z_iter - z_oracle| = {worst:.3e} (tol {tol:.1e}, {skipped} n skipped) {verdict}")
        if worst > tol:
            status = EXIT_NUMERICAL
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="viscofix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every index of a scenario and write reports")
    run.add_argument("scenario")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--jobs", type=int, default=int(os.environ.get(JOBS_ENV, "1")))
    run.add_argument("--seed", type=int, default=None, help="overrides the scenario seed")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a scenario file and list all problems")
    val.add_argument("scenario")
    val.set_defaults(func=cmd_validate)

    orc = sub.add_parser("oracle-check", help="compare inner solves with a direct linear solve")
    orc.add_argument("scenario")
    orc.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
