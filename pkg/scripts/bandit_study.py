"""Canary bandit sweep against Bernoulli reward arms with known rates."""

import argparse

import numpy as np

from modelgate import studies
from modelgate.canary import CanaryConfig


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--champion-rate", type=float, default=0.5)
    parser.add_argument("--challenger-rate", type=float, default=0.3)
    parser.add_argument("--seeds", type=int, default=100, help="number of seeds")
    parser.add_argument("--seed-start", type=int, default=600, help="first seed")
    parser.add_argument("--n-min", type=int, default=100)
    parser.add_argument("--delta", type=float, default=0.05)
    parser.add_argument("--p-decide", type=float, default=0.95)
    parser.add_argument("--max-requests", type=int, default=2000)
    args = parser.parse_args()

    config = CanaryConfig(n_min=args.n_min, delta=args.delta, p_decide=args.p_decide)
    seeds = list(range(args.seed_start, args.seed_start + args.seeds))
    runs = studies.bandit_study(
        args.champion_rate, args.challenger_rate, seeds, config, args.max_requests
    )

    by_status: dict[str, int] = {}
    decided = []
    for run in runs:
        by_status[run["status"]] = by_status.get(run["status"], 0) + 1
        if run["decided_at"] is not None:
            decided.append(run["decided_at"])

    print(
        f"champion={args.champion_rate} challenger={args.challenger_rate} "
        f"n_min={args.n_min} delta={args.delta} p_decide={args.p_decide}"
    )
    for status in sorted(by_status):
        print(f"  {status:<12} {by_status[status]:>4}/{len(runs)}")
    if decided:
        print(
            f"decision latency (routed requests): "
            f"median {int(np.median(decided))}, p90 {int(np.percentile(decided, 90))}, "
            f"max {max(decided)}"
        )
    else:
        print("no run reached a terminal decision")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
