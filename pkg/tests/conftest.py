"""Shared fixtures: small deterministic datasets and two prebuilt scenario runs."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from modelgate.models import Dataset, TrainConfig, train_classifier
from modelgate.pipeline import run_scenario
from modelgate.scenario import parse_scenario

# Well separated two-blob traffic with a tail of noise features. Drift and
# alert behaviour at full scale is exercised by the acceptance suite; these
# runs exist so API/CLI/pipeline tests have a complete artifact directory
# without paying for a full-size scenario.
MINI_ALERT_TEXT = """
seed = 17
n_features = 4
class_count = 2
ticks_total = 3500
window_size = 500
mix = 0.5, 0.5
class.0.mean = 1.0, 1.0, 0.0, 0.0
class.1.mean = -1.0, -1.0, 0.0, 0.0
label_rule.features = 0, 1
label_rule.sharpness = 1.2
drift.0.kind = concept
drift.0.onset_tick = 2000
drift.0.angle = 1.5707963267948966
kpi.name = click
kpi.base_rate = 0.9
"""

MINI_PIPELINE_TEXT = """
seed = 5
n_features = 3
class_count = 2
ticks_total = 2000
window_size = 400
mix = 0.5, 0.5
class.0.mean = 1.2, 1.2, 0.0
class.1.mean = -1.2, -1.2, 0.0
label_rule.features = 0, 1
label_rule.sharpness = 1.5
train.n = 800
test.n = 400
kpi.name = click
kpi.base_rate = 0.85
kpi.link.metric = margin
kpi.link.threshold = 0.3
kpi.link.degraded_rate = 0.2
challenger.epochs = 0
pipeline.bandit.n_min = 60
"""


def make_blobs(n: int, seed: int, separation: float = 2.0, n_features: int = 3) -> Dataset:
    """Two Gaussian blobs at +-separation/2 on the first two axes."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=n)
    centers = np.zeros((2, n_features))
    centers[0, :2] = separation / 2
    centers[1, :2] = -separation / 2
    features = centers[labels] + rng.standard_normal((n, n_features))
    return Dataset(features=features, labels=labels, class_count=2)


@pytest.fixture(scope="session")
def blob_train() -> Dataset:
    return make_blobs(400, seed=1)


@pytest.fixture(scope="session")
def blob_test() -> Dataset:
    return make_blobs(300, seed=2)


@pytest.fixture(scope="session")
def blob_model(blob_train) -> object:
    return train_classifier(blob_train, TrainConfig(seed=0), model_id="blob")


@pytest.fixture(scope="session")
def mini_alert_run(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("mini_alert")
    scenario = parse_scenario(MINI_ALERT_TEXT, name="mini_alert")
    run_scenario(scenario, out)
    return out


@pytest.fixture(scope="session")
def mini_pipeline_run(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("mini_pipeline")
    scenario = parse_scenario(MINI_PIPELINE_TEXT, name="mini_pipeline")
    run_scenario(scenario, out)
    return out


@pytest.fixture()
def mini_alert_copy(mini_alert_run, tmp_path) -> Path:
    """Fresh mutable copy for tests that write through the API."""
    import shutil

    dest = tmp_path / "run"
    shutil.copytree(mini_alert_run, dest)
    return dest
