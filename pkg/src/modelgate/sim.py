"""Deterministic synthetic production traffic with scheduled drift.

Inputs come from a Gaussian mixture; true labels are drawn from a softmax
rule over a subset of features, so the conditional P(label | x) is exactly
logistic and a linear classifier can be both accurate and calibrated on it.
Drift kinds:

- covariate: shift the mixture means of chosen features; the label rule is
  untouched, so accuracy only moves if the model leans on those features.
- prior: swap in a new class mix; the label rule is untouched.
- concept: rotate the class means and the label rule together in the plane of
  the first two label features. With a symmetric layout the per-feature
  marginals are preserved, so histogram detectors stay quiet while a model
  trained before the onset loses real accuracy.

True labels never reach the pipeline; they go to a separate oracle file that
only the KPI emitter and the acceptance tests read.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .events import ScoredEvent, Window
from .scenario import DriftSpec, KpiRule, Scenario

TRAFFIC_KEY = 0
KPI_KEY = 3
TRAIN_KEY_BASE = 100
TEST_KEY = 200


@dataclass(frozen=True)
class LabelRule:
    features: tuple[int, ...]
    weights: np.ndarray  # class_count x len(features)
    offsets: np.ndarray  # class_count
    sharpness: float

    def class_probs(self, features: np.ndarray) -> np.ndarray:
        x_sub = features[:, list(self.features)]
        logits = self.sharpness * (x_sub @ self.weights.T + self.offsets)
        logits -= logits.max(axis=1, keepdims=True)
        probs = np.exp(logits)
        return probs / probs.sum(axis=1, keepdims=True)


@dataclass
class SimState:
    means: np.ndarray  # class_count x n_features
    covs: np.ndarray  # class_count x n_features
    mix: np.ndarray  # class_count
    rule: LabelRule


def rule_from_means(means: np.ndarray, features: tuple[int, ...], sharpness: float) -> LabelRule:
    weights = means[:, list(features)].copy()
    offsets = -0.5 * np.sum(weights**2, axis=1)
    return LabelRule(features=features, weights=weights, offsets=offsets, sharpness=sharpness)


def base_state(scenario: Scenario) -> SimState:
    means = scenario.class_means.copy()
    return SimState(
        means=means,
        covs=scenario.class_covs.copy(),
        mix=np.asarray(scenario.mix, dtype=float),
        rule=rule_from_means(means, scenario.label_features, scenario.sharpness),
    )


def apply_drift(state: SimState, spec: DriftSpec) -> SimState:
    means = state.means.copy()
    covs = state.covs.copy()
    mix = state.mix.copy()
    rule = state.rule
    if spec.kind == "covariate":
        for f in spec.features:
            means[:, f] += spec.magnitude
    elif spec.kind == "prior":
        mix = np.asarray(spec.mix, dtype=float)
    elif spec.kind == "concept":
        f0, f1 = rule.features[0], rule.features[1]
        c, s = math.cos(spec.angle), math.sin(spec.angle)
        rot = np.array([[c, -s], [s, c]])
        means[:, [f0, f1]] = means[:, [f0, f1]] @ rot.T
        rule = rule_from_means(means, rule.features, rule.sharpness)
    else:
        raise ValidationError(f"unknown drift kind {spec.kind!r}")
    return SimState(means=means, covs=covs, mix=mix, rule=rule)


def segments(scenario: Scenario) -> list[tuple[int, int, SimState]]:
    """(start_tick, end_tick, state) pieces covering [0, ticks_total)."""
    state = base_state(scenario)
    out = []
    cursor = 0
    for spec in scenario.drift:
        if spec.onset_tick > cursor:
            out.append((cursor, spec.onset_tick, state))
        state = apply_drift(state, spec)
        cursor = spec.onset_tick
    out.append((cursor, scenario.ticks_total, state))
    return out


@dataclass
class TrafficBatch:
    ticks: np.ndarray  # int per row, nondecreasing
    correlation_ids: list[str]
    features: np.ndarray  # n x n_features
    true_labels: np.ndarray  # int per row

    @property
    def n_rows(self) -> int:
        return len(self.correlation_ids)

    def window_slice(self, window: Window) -> "TrafficBatch":
        lo = int(np.searchsorted(self.ticks, window.start_tick, side="left"))
        hi = int(np.searchsorted(self.ticks, window.end_tick, side="left"))
        return TrafficBatch(
            ticks=self.ticks[lo:hi],
            correlation_ids=self.correlation_ids[lo:hi],
            features=self.features[lo:hi],
            true_labels=self.true_labels[lo:hi],
        )


def _sample_rows(state: SimState, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    k, d = state.means.shape
    components = rng.choice(k, size=n, p=state.mix)
    noise = rng.standard_normal((n, d))
    features = state.means[components] + noise * np.sqrt(state.covs[components])
    probs = state.rule.class_probs(features)
    cum = np.cumsum(probs, axis=1)
    u = rng.random(n)
    labels = np.minimum((u[:, None] > cum).sum(axis=1), k - 1)
    return features, labels.astype(int)


def generate_stream(scenario: Scenario) -> TrafficBatch:
    """The full run's traffic, segment by segment, deterministic in the seed."""
    rng = np.random.default_rng([scenario.seed, TRAFFIC_KEY])
    rows_per_tick = scenario.rows_per_tick
    parts_f, parts_y, parts_t = [], [], []
    ids: list[str] = []
    for start, end, state in segments(scenario):
        n = (end - start) * rows_per_tick
        if n <= 0:
            continue
        features, labels = _sample_rows(state, n, rng)
        ticks = start + np.arange(n) // rows_per_tick
        idx = np.arange(n) % rows_per_tick
        ids.extend(f"t{t}_{i}" for t, i in zip(ticks.tolist(), idx.tolist()))
        parts_f.append(features)
        parts_y.append(labels)
        parts_t.append(ticks)
    return TrafficBatch(
        ticks=np.concatenate(parts_t),
        correlation_ids=ids,
        features=np.vstack(parts_f),
        true_labels=np.concatenate(parts_y),
    )


def generate_dataset(scenario: Scenario, n: int, stream_key: int):
    """Labeled pre-drift sample for training and test sets."""
    from .models import Dataset

    rng = np.random.default_rng([scenario.seed, stream_key])
    features, labels = _sample_rows(base_state(scenario), n, rng)
    return Dataset(features=features, labels=labels, class_count=scenario.class_count)


def write_oracle(batch: TrafficBatch, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for cid, label, tick in zip(batch.correlation_ids, batch.true_labels.tolist(), batch.ticks.tolist()):
            fh.write(
                json.dumps(
                    {"correlation_id": cid, "true_label": int(label), "tick": int(tick)},
                    sort_keys=True,
                )
                + "\n"
            )


def load_oracle(path: str | Path) -> dict[str, int]:
    labels: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                record = json.loads(line)
                labels[record["correlation_id"]] = int(record["true_label"])
    return labels


def oracle_accuracy(
    oracle: dict[str, int] | str | Path, events: list[ScoredEvent], window: Window
) -> float:
    if not isinstance(oracle, dict):
        oracle = load_oracle(oracle)
    windowed = [e for e in events if window.contains(e.timestamp)]
    if not windowed:
        raise ValidationError(f"no model events in [{window.start_tick},{window.end_tick})")
    hits = 0
    for event in windowed:
        if event.correlation_id not in oracle:
            raise ValidationError(f"no oracle record for correlation_id {event.correlation_id!r}")
        hits += int(event.predicted_label == oracle[event.correlation_id])
    return hits / len(windowed)


class KpiEmitter:
    """Simulated application outcome per scored event.

    Success probability starts at base_rate, drops to base_rate * 0.25 when
    the prediction is wrong, and is additionally multiplied by degraded_rate
    when the linked metric crosses its threshold.
    """

    def __init__(self, rule: KpiRule, seed: int):
        self.rule = rule
        self.rng = np.random.default_rng([seed, KPI_KEY])

    def success_probability(self, correct: bool, metrics: dict[str, float]) -> float:
        p = self.rule.base_rate if correct else self.rule.base_rate * 0.25
        link = self.rule.link
        if link is not None:
            value = metrics[link.metric]
            crossed = value < link.threshold if link.direction == "below" else value > link.threshold
            if crossed:
                p *= link.degraded_rate
        return p

    def emit(self, correct: bool, metrics: dict[str, float]) -> float:
        p = self.success_probability(correct, metrics)
        if self.rule.type == "binary":
            return float(self.rng.random() < p)
        value = p + 0.05 * self.rng.standard_normal()
        return float(min(1.0, max(0.0, value)))
