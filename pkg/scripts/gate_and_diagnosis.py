"""Gate discrimination and KPI-diagnosis recovery sweeps over seeded variants."""

import argparse
from pathlib import Path

from modelgate import studies
from modelgate.scenario import load_scenario

REPO_ROOT = Path(__file__).resolve().parents[1]


def gate_sweep(path: Path, theta: float, seeds: list[int]) -> None:
    runs = studies.gate_study(load_scenario(path), theta, seeds)
    hits = sum(1 for r in runs if r["split_matches_oracle"])
    print(f"gate sweep: {path.name} theta={theta} seeds={seeds[0]}..{seeds[-1]}")
    print(f"{'seed':>6} {'stationary low':>14} {'drifted low':>12} {'split ok':>9}")
    for r in runs:
        print(
            f"{r['seed']:>6} {r['predicted_low']['stationary']:>14.4f} "
            f"{r['predicted_low']['drifted']:>12.4f} {str(r['split_matches_oracle']):>9}"
        )
    print(f"split matched oracle ordering in {hits}/{len(runs)}\n")


def diagnosis_sweep(path: Path, seeds: list[int]) -> None:
    runs = studies.diagnosis_study(load_scenario(path), seeds)
    counts: dict[tuple[str, str], int] = {}
    for r in runs:
        key = (r["top_metric"], r["top_direction"])
        counts[key] = counts.get(key, 0) + 1
    print(f"diagnosis sweep: {path.name} seeds={seeds[0]}..{seeds[-1]}")
    for (metric, direction), n in sorted(counts.items(), key=lambda kv: -kv[1]):
        print(f"  {metric:<22} {direction:<12} {n:>4}/{len(runs)}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--gate-scenario", type=Path, default=REPO_ROOT / "scenarios" / "stationary.scenario"
    )
    parser.add_argument("--theta", type=float, default=0.895)
    parser.add_argument("--gate-seeds", type=int, default=20)
    parser.add_argument("--gate-seed-start", type=int, default=300)
    parser.add_argument(
        "--diagnosis-scenario", type=Path, default=REPO_ROOT / "scenarios" / "kpi_linked.scenario"
    )
    parser.add_argument("--diagnosis-seeds", type=int, default=50)
    parser.add_argument("--diagnosis-seed-start", type=int, default=800)
    args = parser.parse_args()

    gate_sweep(
        args.gate_scenario,
        args.theta,
        list(range(args.gate_seed_start, args.gate_seed_start + args.gate_seeds)),
    )
    diagnosis_sweep(
        args.diagnosis_scenario,
        list(range(args.diagnosis_seed_start, args.diagnosis_seed_start + args.diagnosis_seeds)),
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
