"""Decay of the residual, the distance to P x* and the gamma samples along the reference runs.

The last block fits gamma_n ~ C / n on the tail and reports the run length a
tail average of 1e-6 would need.
"""
import argparse
from pathlib import Path

import numpy as np

from viscofix.limit import certify
from viscofix.scenario import build_family, parse_scenario
from viscofix.scheme import run_scheme

ROOT = Path(__file__).resolve().parents[1] / "scenarios"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scale", type=float, default=1.0, help="multiply each n_outer by this factor")
    args = parser.parse_args()

    for name in ("rotation_cesaro.yaml", "flow_integral.yaml"):
        (e,) = build_family(parse_scenario(ROOT / name))
        n_outer = max(10, int(e.n_outer * args.scale))
        traj = run_scheme(e.f, e.rep, e.mu, e.schedule, n_outer, e.tolerances.inner_tol, e.sample_ts)
        cert = certify(traj, e.f, e.rep)
        dist = np.linalg.norm(np.array([s.z for s in traj]) - cert.retraction_image, axis=1)

        print(f"\n{e.label}: P x* = {cert.retraction_image}, N = {n_outer}")
        print(f"{'n':>7}{'eps':>12}{'residual':>12}{'distance':>12}{'gamma':>12}{'gbh slack':>12}")
        marks = sorted({int(round(v)) for v in np.geomspace(1, n_outer, 12)})
        for n in marks:
            s = traj[n - 1]
            print(f"{n:>7}{s.eps:>12.3e}{s.max_residual:>12.3e}{dist[n - 1]:>12.3e}"
                  f"{cert.gamma_samples[n - 1]:>12.3e}{cert.gbh_slack[n - 1]:>12.3e}")

        tail = slice(n_outer // 2, None)
        ns = np.arange(1, n_outer + 1)[tail]
        g = np.asarray(cert.gamma_samples)[tail]
        coef = float(np.sum(g / ns) / np.sum(1.0 / ns**2))  # least squares for g = coef / n
        needed = coef / 1e-6
        print(f"tail average of gamma: {cert.gamma_tail:.3e}; fit gamma_n ~ {coef:.3e} / n; "
              f"tail average 1e-6 needs N of order {needed:.1e}")


if __name__ == "__main__":
    main()
