"""Record operator-console API fixtures from a real simulated run.

The console test suite replays these JSON payloads; rerun this script after
any API or pipeline change that affects response shapes. The scenario stages
a mild quarter-turn (warning alerts) followed by a full inversion whose
confidences look healthy while the KPI collapses (critical kpi alerts), so
the recorded feed carries both severities and both alert kinds.
"""

import argparse
import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from modelgate.api import create_app
from modelgate.pipeline import run_scenario
from modelgate.scenario import parse_scenario

REPO_ROOT = Path(__file__).resolve().parents[1]

SCENARIO_TEXT = """\
seed = 23
n_features = 4
class_count = 2
ticks_total = 8000
window_size = 500
mix = 0.5, 0.5
class.0.mean = 1.0, 1.0, 0.0, 0.0
class.1.mean = -1.0, -1.0, 0.0, 0.0
label_rule.features = 0, 1
label_rule.sharpness = 1.2
drift.0.onset_tick = 4500
drift.0.kind = concept
drift.0.angle = 1.5707963267948966
drift.1.onset_tick = 6500
drift.1.kind = concept
drift.1.angle = 1.5707963267948966
kpi.name = click
kpi.base_rate = 0.25
"""


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out", type=Path, default=REPO_ROOT / "frontend" / "tests" / "fixtures",
        help="directory for the recorded JSON payloads",
    )
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    scenario = parse_scenario(SCENARIO_TEXT, name="console_fixture")
    with tempfile.TemporaryDirectory() as tmp:
        summary = run_scenario(scenario, Path(tmp) / "run")
        client = TestClient(create_app(Path(tmp) / "run"))

        recorded: dict[str, object] = {}

        def record(name: str, path: str) -> dict | list:
            response = client.get(path)
            response.raise_for_status()
            recorded[name] = response.json()
            return recorded[name]

        record("health", "/health")
        alerts = record("alerts", "/alerts")
        deployments = record("deployments", "/deployments")
        record("deployment", f"/deployments/{deployments[0]['deployment_id']}")
        record("accuracy", "/metrics/accuracy")
        record("diagnosis", f"/diagnosis/{alerts[-1]['id']}")

        for name, payload in recorded.items():
            path = args.out / f"{name}.json"
            path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
            print(f"wrote {path}")

    severities = [(a["severity"], a["kind"]) for a in alerts]
    print(f"run status={summary['status']}, {len(alerts)} alerts: {severities}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
