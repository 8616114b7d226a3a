"""Run every scenario file end to end and print one summary line each."""

import argparse
import sys
from pathlib import Path

from modelgate.pipeline import run_scenario

REPO_ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--scenario-dir", type=Path, default=REPO_ROOT / "scenarios",
        help="directory holding *.scenario files",
    )
    parser.add_argument(
        "--out", type=Path, default=REPO_ROOT / "runs",
        help="output root; each scenario gets a subdirectory",
    )
    args = parser.parse_args()

    paths = sorted(args.scenario_dir.glob("*.scenario"))
    if not paths:
        print(f"no scenario files in {args.scenario_dir}", file=sys.stderr)
        return 1

    header = f"{'scenario':<18} {'gate':<7} {'status':<12} {'windows':>7} {'alerts':>6} {'top suspect':<14}"
    print(header)
    print("-" * len(header))
    for path in paths:
        summary = run_scenario(path, args.out / path.stem)
        gate = summary["gate"].get("default", "?")
        top = summary["final_diagnosis_top"] or "-"
        print(
            f"{summary['scenario']:<18} {gate:<7} {summary['status']:<12} "
            f"{summary['windows_evaluated']:>7} {summary['alerts']:>6} {top:<14}"
        )
    print(f"\nartifacts under {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
