"""Seeded multi-run studies behind the statistical acceptance checks.

Each study re-runs one narrow slice of the pipeline (monitor flags, bandit
decisions, gate verdicts, diagnosis ranking) across many seeds, skipping the
parts of a full scenario run that cannot affect the measured quantity. The
slices call the same production functions the orchestrator calls, so the
measured rates are rates of the shipped code paths, just without the run
directory and event-log bookkeeping per seed.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import sim
from .analytics import SplitRule, SuspectReport, contrast_good_bad
from .canary import (
    STATUS_ACTIVE,
    TERMINAL,
    BanditArm,
    CanaryConfig,
    CanaryState,
    decide,
    record_reward,
    route,
)
from .drift import build_reference_profile, evaluate_window
from .events import JoinedTransaction, ScoredEvent, Window
from .perf import MetaFeatureVector, meta_features_batch
from .pipeline import GATE_GO, build_predictor, config_from_scenario, gate, train_from_spec
from .scenario import DriftSpec, Scenario

# shared placeholder: evaluate_window reads only n and predicted_label from
# events; the confidence features come from the predictor on raw features
_NEUTRAL_FEATURES = MetaFeatureVector(
    top_prob=1.0, margin=1.0, entropy=0.0, mean_feature_distance=0.0
)


def with_seed(scenario: Scenario, seed: int) -> Scenario:
    return replace(scenario, seed=seed)


def _count_events(batch: sim.TrafficBatch, labels: np.ndarray, model_id: str) -> list[ScoredEvent]:
    return [
        ScoredEvent(
            correlation_id=batch.correlation_ids[i],
            model_id=model_id,
            timestamp=int(batch.ticks[i]),
            arm="none",
            predicted_label=int(labels[i]),
            confidence_features=_NEUTRAL_FEATURES,
        )
        for i in range(batch.n_rows)
    ]


def monitor_run(scenario: Scenario) -> dict:
    """Train, profile, and score every post-reference window for one seed.

    Mirrors run_scenario's monitoring stage without canary routing or KPI
    emission: the drift flags in covariate/prior/concept scenarios depend
    only on the champion predictor over window features.
    """
    config = config_from_scenario(scenario)
    w = config.window_size
    champion = train_from_spec(scenario, scenario.train, "champion")
    test = sim.generate_dataset(scenario, scenario.test_n, sim.TEST_KEY)
    predictor = build_predictor(champion, test, config.predictor_method)

    traffic = sim.generate_stream(scenario)
    labels = champion.predict_labels(traffic.features)
    correct = labels == traffic.true_labels

    ref = traffic.window_slice(Window(start_tick=0, end_tick=w))
    ref_predicted = predictor.predict(ref.features, seed=config.seed)
    train_for_edges = sim.generate_dataset(
        scenario, scenario.train.n, sim.TRAIN_KEY_BASE + scenario.train.seed_offset
    )
    profile = build_reference_profile(
        train_features=train_for_edges.features,
        reference_features=ref.features,
        predicted_labels=labels[: ref.n_rows],
        class_count=scenario.class_count,
        reference_accuracy=ref_predicted.point,
    )

    windows = []
    boundary = w
    while boundary + w <= scenario.ticks_total:
        window = Window(start_tick=boundary, end_tick=boundary + w)
        batch = traffic.window_slice(window)
        lo = int(np.searchsorted(traffic.ticks, boundary, side="left"))
        events = _count_events(batch, labels[lo : lo + batch.n_rows], champion.model_id)
        outcome = evaluate_window(
            profile=profile,
            window=window,
            features=batch.features,
            events=events,
            kpi_means={},
            predictor=predictor,
            thresholds=config.thresholds,
            seed=config.seed + boundary,
        )
        windows.append(
            {
                "start_tick": boundary,
                "flags": dict(outcome.report.flags),
                "alerted": outcome.alert is not None,
                "predicted": outcome.report.predicted_accuracy.point,
                "oracle": float(correct[lo : lo + batch.n_rows].mean()),
            }
        )
        boundary += w
    return {
        "seed": scenario.seed,
        "reference_predicted": ref_predicted.point,
        "reference_oracle": float(correct[: ref.n_rows].mean()),
        "windows": windows,
    }


def monitor_study(scenario: Scenario, seeds: list[int]) -> list[dict]:
    return [monitor_run(with_seed(scenario, seed)) for seed in seeds]


def first_alert_offset(run: dict, onset_tick: int, window_size: int) -> int | None:
    """1-based window index of the first alert at or after the drift onset."""
    for item in run["windows"]:
        if item["alerted"] and item["start_tick"] >= onset_tick:
            return (item["start_tick"] - onset_tick) // window_size + 1
    return None


def bandit_run(
    champion_rate: float,
    challenger_rate: float,
    config: CanaryConfig,
    seed: int,
    max_requests: int = 2000,
    decide_every: int = 50,
    trace: bool = False,
) -> dict:
    """One canary deployment against Bernoulli reward arms of known rates."""
    state = CanaryState(
        deployment_id=f"study_{seed}",
        champion=BanditArm(model_id="champion"),
        challenger=BanditArm(model_id="challenger"),
        config=replace(config, seed=seed),
    )
    rewards = np.random.default_rng([seed, 7])
    arms_seq: list[str] = []
    decided_at = None
    for i in range(max_requests):
        arm = route(state, f"r{i}")
        if trace:
            arms_seq.append(arm)
        rate = champion_rate if arm == "champion" else challenger_rate
        record_reward(state, f"r{i}", float(rewards.random() < rate))
        if state.status == STATUS_ACTIVE and (i + 1) % decide_every == 0:
            decide(state, tick=i + 1)
            if state.status in TERMINAL:
                decided_at = i + 1
                break
    out = {"seed": seed, "status": state.status, "routed": i + 1, "decided_at": decided_at}
    if trace:
        out["trace"] = arms_seq
    return out


def bandit_study(
    champion_rate: float,
    challenger_rate: float,
    seeds: list[int],
    config: CanaryConfig | None = None,
    max_requests: int = 2000,
    trace: bool = False,
) -> list[dict]:
    config = config or CanaryConfig(n_min=100, delta=0.05, p_decide=0.95)
    return [
        bandit_run(champion_rate, challenger_rate, config, seed, max_requests, trace=trace)
        for seed in seeds
    ]


def _zone_batch(scenario: Scenario, n: int, drift: DriftSpec | None) -> sim.TrafficBatch:
    zone = replace(
        scenario, ticks_total=n, window_size=n, drift=[drift] if drift else [], kpi=None
    )
    return sim.generate_stream(zone)


def gate_two_zone_run(scenario: Scenario, theta_gate: float, zone_n: int = 2000) -> dict:
    """Gate one champion over a stationary zone and a quarter-turn drifted zone."""
    config = replace(config_from_scenario(scenario), theta_gate=theta_gate)
    champion = train_from_spec(scenario, scenario.train, "champion")
    test = sim.generate_dataset(scenario, scenario.test_n, sim.TEST_KEY)
    stationary = _zone_batch(scenario, zone_n, None)
    drifted = _zone_batch(
        scenario, zone_n, DriftSpec(onset_tick=0, kind="concept", angle=np.pi / 2)
    )
    report = gate(
        champion,
        test,
        {"stationary": stationary.features, "drifted": drifted.features},
        config,
    )
    verdicts = {z.zone: z.verdict for z in report.zones}
    oracle = {
        "stationary": float(
            np.mean(champion.predict_labels(stationary.features) == stationary.true_labels)
        ),
        "drifted": float(
            np.mean(champion.predict_labels(drifted.features) == drifted.true_labels)
        ),
    }
    split_matches_oracle = (
        oracle["stationary"] > theta_gate > oracle["drifted"]
        and verdicts["stationary"] == GATE_GO
        and verdicts["drifted"] != GATE_GO
    )
    return {
        "seed": scenario.seed,
        "theta_gate": theta_gate,
        "verdicts": verdicts,
        "oracle": oracle,
        "predicted_low": {z.zone: z.predicted.interval_low for z in report.zones},
        "split_matches_oracle": split_matches_oracle,
    }


def gate_study(scenario: Scenario, theta_gate: float, seeds: list[int]) -> list[dict]:
    return [gate_two_zone_run(with_seed(scenario, seed), theta_gate) for seed in seeds]


def diagnosis_run(scenario: Scenario) -> SuspectReport:
    """Champion serves the whole deployment window; contrast KPI good vs bad."""
    if scenario.kpi is None:
        raise ValueError("diagnosis study needs a scenario with a KPI rule")
    champion = train_from_spec(scenario, scenario.train, "champion")
    traffic = sim.generate_stream(scenario)
    labels = champion.predict_labels(traffic.features)
    meta_rows = meta_features_batch(champion, traffic.features)
    emitter = sim.KpiEmitter(scenario.kpi, scenario.seed)

    window = Window(start_tick=scenario.window_size, end_tick=scenario.ticks_total)
    lo = int(np.searchsorted(traffic.ticks, window.start_tick, side="left"))
    joined = []
    names = ("top_prob", "margin", "entropy", "mean_feature_distance")
    for i in range(lo, traffic.n_rows):
        row = meta_rows[i]
        metrics = dict(zip(names, row))
        value = emitter.emit(bool(labels[i] == traffic.true_labels[i]), metrics)
        event = ScoredEvent(
            correlation_id=traffic.correlation_ids[i],
            model_id=champion.model_id,
            timestamp=int(traffic.ticks[i]),
            arm="none",
            predicted_label=int(labels[i]),
            confidence_features=MetaFeatureVector(
                top_prob=float(row[0]),
                margin=float(row[1]),
                entropy=float(row[2]),
                mean_feature_distance=float(row[3]),
            ),
        )
        joined.append(
            JoinedTransaction(
                correlation_id=event.correlation_id,
                model_event=event,
                kpi_values={scenario.kpi.name: value},
            )
        )
    return contrast_good_bad(
        joined, scenario.kpi.name, SplitRule(kind="binary"), window, scenario.class_count
    )


def diagnosis_study(scenario: Scenario, seeds: list[int]) -> list[dict]:
    out = []
    for seed in seeds:
        report = diagnosis_run(with_seed(scenario, seed))
        out.append(
            {
                "seed": seed,
                "top_metric": report.ranked[0].metric_name,
                "top_direction": report.ranked[0].direction,
            }
        )
    return out


def predictor_fidelity_run(scenario: Scenario, method: str) -> dict:
    """Per-window predicted vs oracle accuracy over a whole scenario stream."""
    config = config_from_scenario(scenario)
    champion = train_from_spec(scenario, scenario.train, "champion")
    test = sim.generate_dataset(scenario, scenario.test_n, sim.TEST_KEY)
    predictor = build_predictor(champion, test, method)
    traffic = sim.generate_stream(scenario)
    labels = champion.predict_labels(traffic.features)
    correct = labels == traffic.true_labels

    w = config.window_size
    per_window = []
    for start in range(0, scenario.ticks_total - w + 1, w):
        window = Window(start_tick=start, end_tick=start + w)
        batch = traffic.window_slice(window)
        lo = int(np.searchsorted(traffic.ticks, start, side="left"))
        predicted = predictor.predict(batch.features, seed=config.seed + start)
        per_window.append(
            {
                "start_tick": start,
                "predicted": predicted.point,
                "oracle": float(correct[lo : lo + batch.n_rows].mean()),
            }
        )
    mae = float(np.mean([abs(x["predicted"] - x["oracle"]) for x in per_window]))
    return {"method": method, "mae": mae, "per_window": per_window}
