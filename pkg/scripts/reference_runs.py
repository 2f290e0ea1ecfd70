"""Run every shipped scenario and print one summary row per index."""
import argparse
import time
from pathlib import Path

from viscofix.limit import run_family
from viscofix.scenario import build_family, parse_scenario

ROOT = Path(__file__).resolve().parents[1] / "scenarios"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("scenarios", nargs="*", type=Path, default=sorted(ROOT.glob("*.yaml")))
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    print(f"{'scenario':<22}{'index':<14}{'N':>6}{'distance':>12}{'residual':>12}{'gamma tail':>12}  certificate  time")
    for path in args.scenarios:
        scenario = parse_scenario(path)
        start = time.perf_counter()
        family = run_family(build_family(scenario), jobs=args.jobs, seed=scenario.seed)
        elapsed = time.perf_counter() - start
        for r in family.results:
            cert = r.certificate
            verdict = "n/a" if cert is None else ("pass" if cert.passed else "FAIL " + ",".join(cert.failures()))
            gamma = float("nan") if cert is None else cert.gamma_tail
            print(
                f"{path.stem:<22}{r.label:<14}{len(r.trajectory):>6}{r.final_distance:>12.3e}"
                f"{r.trajectory[-1].max_residual:>12.3e}{gamma:>12.3e}  {verdict:<11}  {elapsed:.2f}s"
            )


if __name__ == "__main__":
    main()
