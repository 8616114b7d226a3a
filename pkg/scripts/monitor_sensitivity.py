"""Seed sweep of the window monitor: alert latency and false-alert rate."""

import argparse
from pathlib import Path

import numpy as np

from modelgate import studies
from modelgate.scenario import load_scenario


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("scenario", type=Path, help="scenario file to sweep")
    parser.add_argument("--seeds", type=int, default=20, help="number of seeds")
    parser.add_argument("--seed-start", type=int, default=0, help="first seed")
    args = parser.parse_args()

    scenario = load_scenario(args.scenario)
    seeds = list(range(args.seed_start, args.seed_start + args.seeds))
    runs = studies.monitor_study(scenario, seeds)

    onset = scenario.drift[0].onset_tick if scenario.drift else None
    w = scenario.window_size
    total = alerted = perf_flagged = 0
    offsets = []
    print(f"{'seed':>6} {'windows':>7} {'alerts':>6} {'perf flags':>10} {'first offset':>12}")
    for run in runs:
        n_alerts = sum(1 for x in run["windows"] if x["alerted"])
        n_perf = sum(1 for x in run["windows"] if x["flags"]["performance_drift"])
        total += len(run["windows"])
        alerted += n_alerts
        perf_flagged += n_perf
        offset = (
            studies.first_alert_offset(run, onset, w) if onset is not None else None
        )
        if offset is not None:
            offsets.append(offset)
        print(
            f"{run['seed']:>6} {len(run['windows']):>7} {n_alerts:>6} "
            f"{n_perf:>10} {offset if offset is not None else '-':>12}"
        )

    print(f"\nperf-flag rate {perf_flagged}/{total} = {perf_flagged / total:.3%}")
    if onset is not None:
        hit3 = sum(1 for o in offsets if o <= 3)
        mean_off = float(np.mean(offsets)) if offsets else float("nan")
        print(
            f"post-onset detections {len(offsets)}/{len(runs)}; "
            f"within 3 windows {hit3}/{len(runs)}; mean offset {mean_off:.2f}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
