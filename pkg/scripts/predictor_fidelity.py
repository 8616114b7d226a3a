"""Compare predicted window accuracy against the hidden oracle for one scenario."""

import argparse
from pathlib import Path

from modelgate import studies
from modelgate.scenario import load_scenario


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("scenario", type=Path, help="scenario file to stream")
    parser.add_argument(
        "--method", choices=("meta", "calibrated_mean"), default="meta",
        help="accuracy predictor to evaluate",
    )
    args = parser.parse_args()

    scenario = load_scenario(args.scenario)
    result = studies.predictor_fidelity_run(scenario, args.method)

    print(f"scenario={scenario.name} method={result['method']}")
    print(f"{'window':>12} {'predicted':>10} {'oracle':>8} {'error':>8}")
    for row in result["per_window"]:
        start = row["start_tick"]
        err = row["predicted"] - row["oracle"]
        print(
            f"{start:>5}-{start + scenario.window_size:<6} "
            f"{row['predicted']:>10.4f} {row['oracle']:>8.4f} {err:>+8.4f}"
        )
    print(f"\nmae={result['mae']:.4f} over {len(result['per_window'])} windows")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
