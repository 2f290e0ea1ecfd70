"""Inner iteration counts with and without warm starts across n (matrix-cached averaged operator)."""
import argparse
from pathlib import Path

from viscofix.scenario import build_family, parse_scenario
from viscofix.scheme import inner_solve

ROOT = Path(__file__).resolve().parents[1] / "scenarios"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-outer", type=int, default=100)
    args = parser.parse_args()

    for name in ("rotation_cesaro.yaml", "flow_integral.yaml", "projection_box.yaml"):
        (e,) = build_family(parse_scenario(ROOT / name))
        warm_total = cold_total = 0
        z = e.rep.domain.center
        for n in range(1, args.n_outer + 1):
            eps = e.schedule.eps(n)
            z, warm = inner_solve(n, eps, e.f, e.rep, e.mu, z, e.tolerances.inner_tol, cached=True)
            _, cold = inner_solve(n, eps, e.f, e.rep, e.mu, e.rep.domain.center, e.tolerances.inner_tol, cached=True)
            warm_total += warm.iterations
            cold_total += cold.iterations
        print(f"{e.label:<8} N={args.n_outer}: warm {warm_total:>9d} iterations, cold {cold_total:>9d} "
              f"(ratio {cold_total / warm_total:.2f})")


if __name__ == "__main__":
    main()
