"""Orchestration of the four stages: gate, deploy, monitor, diagnose.

`run_scenario` binds everything together over simulated traffic: train models,
gate the champion on a reference window, start a champion/challenger canary,
stream traffic through routing and KPI emission, evaluate each completed
window against the reference profile, and attach a diagnosis to every alert.
All artifacts land in one run directory as deterministic JSON/JSONL/CSV files,
so a run can be replayed, served over HTTP, or diffed byte for byte.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import sim
from .analytics import SplitRule, SuspectReport, contrast_good_bad, export_suspect_csv
from .calibration import Calibrator, correctness_samples, fit_platt
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
from .drift import (
    Alert,
    DriftReport,
    MonitorOutcome,
    MonitorThresholds,
    ReferenceProfile,
    build_reference_profile,
    evaluate_window,
)
from .errors import InsufficientDataError, ValidationError
from .events import EventStore, KpiEvent, ScoredEvent, Window
from .models import (
    ClassifierModel,
    Dataset,
    TrainConfig,
    accuracy,
    load_model,
    save_model,
    train_classifier,
)
from .perf import (
    CalibratedMeanPredictor,
    MetaFeatureVector,
    MetaModelPredictor,
    PredictedAccuracy,
    load_meta_model,
    meta_features_batch,
    save_meta_model,
    train_meta_model,
)
from .scenario import Scenario, TrainSpec, load_scenario

GATE_GO = "go"
GATE_NO_GO = "no_go"


@dataclass
class PipelineConfig:
    window_size: int
    n_min: int = 100
    theta_gate: float = 0.7
    theta_acc: float = 0.05
    theta_kpi: float = 0.05
    theta_psi: float = 0.2
    theta_tv: float = 0.1
    predictor_method: str = "meta"  # meta | calibrated_mean
    reward_source: str = "predicted_correctness"
    bandit: CanaryConfig = field(default_factory=CanaryConfig)
    seed: int = 0

    def __post_init__(self):
        if self.window_size < 1:
            raise ValidationError("window_size must be >= 1")
        for name in ("theta_gate", "theta_acc", "theta_kpi", "theta_psi", "theta_tv"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValidationError(f"{name} must lie in (0,1), got {value!r}")
        if self.predictor_method not in ("meta", "calibrated_mean"):
            raise ValidationError(f"unknown predictor method {self.predictor_method!r}")

    @property
    def thresholds(self) -> MonitorThresholds:
        return MonitorThresholds(
            n_min=self.n_min,
            theta_psi=self.theta_psi,
            theta_tv=self.theta_tv,
            theta_acc=self.theta_acc,
            theta_kpi=self.theta_kpi,
        )

    def to_dict(self) -> dict:
        return {
            "window_size": self.window_size,
            "n_min": self.n_min,
            "theta_gate": self.theta_gate,
            "theta_acc": self.theta_acc,
            "theta_kpi": self.theta_kpi,
            "theta_psi": self.theta_psi,
            "theta_tv": self.theta_tv,
            "predictor_method": self.predictor_method,
            "reward_source": self.reward_source,
            "bandit": self.bandit.to_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PipelineConfig":
        payload = dict(payload)
        payload["bandit"] = CanaryConfig.from_dict(payload["bandit"])
        return cls(**payload)


def config_from_scenario(scenario: Scenario) -> PipelineConfig:
    p = scenario.pipeline
    reward = p.get("reward") or (
        f"kpi:{scenario.kpi.name}" if scenario.kpi else "predicted_correctness"
    )
    return PipelineConfig(
        window_size=scenario.window_size,
        n_min=p.get("n_min", 100),
        theta_gate=p.get("theta_gate", 0.7),
        theta_acc=p.get("theta_acc", 0.05),
        theta_kpi=p.get("theta_kpi", 0.05),
        theta_psi=p.get("theta_psi", 0.2),
        theta_tv=p.get("theta_tv", 0.1),
        predictor_method=p.get("predictor", "meta"),
        reward_source=reward,
        bandit=CanaryConfig(
            n_min=p.get("bandit_n_min", 100),
            delta=p.get("bandit_delta", 0.05),
            p_decide=p.get("bandit_p_decide", 0.95),
            seed=scenario.seed,
        ),
        seed=scenario.seed,
    )


def build_predictor(model: ClassifierModel, test: Dataset, method: str, n_boot: int = 1000):
    if method == "meta":
        return MetaModelPredictor(base_model=model, meta=train_meta_model(model, test), n_boot=n_boot)
    if method == "calibrated_mean":
        calibrator = fit_platt(correctness_samples(model, test))
        return CalibratedMeanPredictor(base_model=model, calibrator=calibrator, n_boot=n_boot)
    raise ValidationError(f"unknown predictor method {method!r}")


@dataclass(frozen=True)
class ZoneVerdict:
    zone: str
    predicted: PredictedAccuracy
    verdict: str

    def to_dict(self) -> dict:
        return {"zone": self.zone, "predicted": self.predicted.to_dict(), "verdict": self.verdict}


@dataclass
class GateReport:
    model_id: str
    zones: list[ZoneVerdict]
    theta_gate: float
    test_set_accuracy: float
    method: str

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "zones": [z.to_dict() for z in self.zones],
            "theta_gate": self.theta_gate,
            "test_set_accuracy": self.test_set_accuracy,
            "method": self.method,
        }


def gate(
    model: ClassifierModel,
    test: Dataset,
    production_windows: dict[str, np.ndarray],
    config: PipelineConfig,
    predictor=None,
) -> GateReport:
    """Pre-deploy readiness check: go iff interval_low clears theta_gate per zone."""
    if test.labels is None:
        raise ValidationError("gate requires a labeled test set")
    if not production_windows:
        raise ValidationError("gate requires at least one zone batch")
    for zone, batch in production_windows.items():
        if np.asarray(batch).shape[0] == 0:
            raise ValidationError(f"zone {zone!r}: empty production batch")
    if predictor is None:
        predictor = build_predictor(model, test, config.predictor_method)
    zones = []
    for index, zone in enumerate(sorted(production_windows)):
        predicted = predictor.predict(
            np.asarray(production_windows[zone], dtype=float), seed=config.seed + index
        )
        verdict = GATE_GO if predicted.interval_low >= config.theta_gate else GATE_NO_GO
        zones.append(ZoneVerdict(zone=zone, predicted=predicted, verdict=verdict))
    return GateReport(
        model_id=model.model_id,
        zones=zones,
        theta_gate=config.theta_gate,
        test_set_accuracy=accuracy(model, test),
        method=predictor.method,
    )


# ---------------------------------------------------------------------------
# Run directory layout
# ---------------------------------------------------------------------------


class RunDir:
    """Paths for one scenario run's artifacts."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def __getattr__(self, name: str) -> Path:
        files = {
            "config": "config.json",
            "scenario_file": "scenario.txt",
            "champion_file": "model_champion.json",
            "challenger_file": "model_challenger.json",
            "meta_file": "meta_model.bin",
            "calibrator_file": "calibrator.json",
            "gate_file": "gate_report.json",
            "profile_file": "profile.json",
            "traffic_file": "traffic.csv",
            "oracle_file": "oracle.jsonl",
            "reports_file": "reports.jsonl",
            "alerts_file": "alerts.jsonl",
            "decisions_file": "decisions.jsonl",
            "deployment_file": "deployment.json",
            "monitor_state_file": "monitor_state.json",
            "final_diagnosis_file": "final_diagnosis.json",
            "suspects_csv": "suspects.csv",
            "summary_file": "summary.json",
        }
        if name in files:
            return self.root / files[name]
        raise AttributeError(name)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _read_json(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


def _append_jsonl(path: Path, payload: dict) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(payload, sort_keys=True) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_traffic_csv(batch: sim.TrafficBatch, path: Path) -> None:
    d = batch.features.shape[1]
    header = "correlation_id,tick," + ",".join(f"f{i}" for i in range(d))
    lines = [header]
    for i in range(batch.n_rows):
        feats = ",".join(repr(float(v)) for v in batch.features[i])
        lines.append(f"{batch.correlation_ids[i]},{int(batch.ticks[i])},{feats}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_traffic_csv(path: Path) -> tuple[list[str], np.ndarray, np.ndarray]:
    lines = path.read_text(encoding="utf-8").splitlines()
    ids: list[str] = []
    ticks: list[int] = []
    rows: list[list[float]] = []
    for line in lines[1:]:
        parts = line.split(",")
        ids.append(parts[0])
        ticks.append(int(parts[1]))
        rows.append([float(v) for v in parts[2:]])
    return ids, np.array(ticks, dtype=int), np.array(rows, dtype=float)


# ---------------------------------------------------------------------------
# Monitoring over a run directory (shared by run_scenario and the CLI)
# ---------------------------------------------------------------------------


@dataclass
class MonitorContext:
    profile: ReferenceProfile
    predictor: object
    thresholds: MonitorThresholds
    store: EventStore
    features_by_id: dict[str, int]
    features: np.ndarray
    window_size: int
    seed: int
    kpi_name: str | None
    class_count: int


def _window_kpi_means(store: EventStore, window: Window) -> dict[str, float]:
    joined, _ = store.join_by_correlation(window)
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for t in joined:
        for name, value in t.kpi_values.items():
            sums[name] = sums.get(name, 0.0) + value
            counts[name] = counts.get(name, 0) + 1
    return {name: sums[name] / counts[name] for name in sums}


def evaluate_one_window(ctx: MonitorContext, window: Window) -> MonitorOutcome:
    events = [
        e
        for e in ctx.store.query_window("model", window)
        if e.correlation_id in ctx.features_by_id
    ]
    features = ctx.features[[ctx.features_by_id[e.correlation_id] for e in events]]
    kpi_means = _window_kpi_means(ctx.store, window)
    return evaluate_window(
        profile=ctx.profile,
        window=window,
        features=features,
        events=events,
        kpi_means=kpi_means,
        predictor=ctx.predictor,
        thresholds=ctx.thresholds,
        seed=ctx.seed + window.start_tick,
    )


def _diagnose_window(ctx: MonitorContext, window: Window) -> tuple[SuspectReport | None, str]:
    if ctx.kpi_name is None:
        return None, "no KPI configured; diagnosis skipped"
    joined, _ = ctx.store.join_by_correlation(window)
    try:
        report = contrast_good_bad(
            joined, ctx.kpi_name, SplitRule(kind="binary"), window, ctx.class_count
        )
        return report, ""
    except InsufficientDataError as exc:
        return None, str(exc)


def run_monitor_pass(
    ctx: MonitorContext, run: RunDir, upto_tick: int, max_windows: int | None = None
) -> tuple[list[DriftReport], list[Alert]]:
    """Evaluate every completed, not-yet-evaluated window up to `upto_tick`."""
    state = (
        _read_json(run.monitor_state_file)
        if run.monitor_state_file.exists()
        else {"evaluated_through_tick": ctx.window_size}
    )
    cursor = state["evaluated_through_tick"]
    reports: list[DriftReport] = []
    alerts: list[Alert] = []
    while cursor + ctx.window_size <= upto_tick:
        if max_windows is not None and len(reports) >= max_windows:
            break
        window = Window(start_tick=cursor, end_tick=cursor + ctx.window_size)
        outcome = evaluate_one_window(ctx, window)
        cursor = window.end_tick
        if outcome.report is None:
            _append_jsonl(
                run.reports_file,
                {"window": window.to_dict(), "inconclusive": outcome.inconclusive_reason},
            )
            continue
        reports.append(outcome.report)
        _append_jsonl(run.reports_file, outcome.report.to_dict())
        if outcome.alert is not None:
            suspect, note = _diagnose_window(ctx, window)
            record = outcome.alert.to_dict()
            record["suspect_report"] = suspect.to_dict() if suspect else None
            if note:
                record["diagnosis_note"] = note
            _append_jsonl(run.alerts_file, record)
            alerts.append(outcome.alert)
    state["evaluated_through_tick"] = cursor
    _write_json(run.monitor_state_file, state)
    return reports, alerts


def load_monitor_context(run: RunDir) -> MonitorContext:
    """Rebuild the monitor from a persisted run directory."""
    for required in (run.config, run.profile_file, run.traffic_file, run.champion_file):
        if not required.exists():
            raise ValidationError(f"run directory is missing {required.name}")
    extras = _read_json(run.config)
    config = PipelineConfig.from_dict(extras["pipeline"])
    champion = load_model(run.champion_file)
    if config.predictor_method == "meta":
        predictor = MetaModelPredictor(base_model=champion, meta=load_meta_model(run.meta_file))
    else:
        predictor = CalibratedMeanPredictor(
            base_model=champion,
            calibrator=Calibrator.from_dict(_read_json(run.calibrator_file)),
        )
    ids, _, features = read_traffic_csv(run.traffic_file)
    return MonitorContext(
        profile=ReferenceProfile.from_dict(_read_json(run.profile_file)),
        predictor=predictor,
        thresholds=config.thresholds,
        store=EventStore.open(run.root),
        features_by_id={cid: i for i, cid in enumerate(ids)},
        features=features,
        window_size=config.window_size,
        seed=config.seed,
        kpi_name=extras.get("kpi_name"),
        class_count=extras["class_count"],
    )


def run_monitor_cycle(run_dir: str | Path, cycles: int = 1) -> tuple[list[dict], list[dict]]:
    """CLI entry: evaluate up to `cycles` pending windows from persisted state."""
    run = RunDir(run_dir)
    ctx = load_monitor_context(run)
    upto = ctx.store.max_model_timestamp()
    if upto is None:
        return [], []
    reports, alerts = run_monitor_pass(ctx, run, upto_tick=upto + 1, max_windows=cycles)
    return [r.to_dict() for r in reports], [a.to_dict() for a in alerts]


# ---------------------------------------------------------------------------
# Full scenario execution
# ---------------------------------------------------------------------------


def train_from_spec(scenario: Scenario, spec: TrainSpec, model_id: str) -> ClassifierModel:
    data = sim.generate_dataset(scenario, spec.n, sim.TRAIN_KEY_BASE + spec.seed_offset)
    config = TrainConfig(
        learning_rate=spec.learning_rate, epochs=spec.epochs, l2=spec.l2, seed=scenario.seed
    )
    return train_classifier(data, config, model_id=model_id)


@dataclass
class _ArmModels:
    model: ClassifierModel
    labels: np.ndarray  # predicted label per traffic row
    meta_rows: np.ndarray  # meta-feature matrix per traffic row
    scores: np.ndarray | None = None  # per-row predicted correctness


def _prepare_arm(model: ClassifierModel, features: np.ndarray) -> _ArmModels:
    return _ArmModels(
        model=model,
        labels=model.predict_labels(features),
        meta_rows=meta_features_batch(model, features),
    )


def _event_for_row(
    batch: sim.TrafficBatch, i: int, arm_name: str, arm: _ArmModels, model_id: str
) -> ScoredEvent:
    row = arm.meta_rows[i]
    return ScoredEvent(
        correlation_id=batch.correlation_ids[i],
        model_id=model_id,
        timestamp=int(batch.ticks[i]),
        arm=arm_name,
        predicted_label=int(arm.labels[i]),
        confidence_features=MetaFeatureVector(
            top_prob=float(row[0]),
            margin=float(row[1]),
            entropy=float(row[2]),
            mean_feature_distance=float(row[3]),
        ),
    )


def run_scenario(scenario: Scenario | str | Path, out_dir: str | Path) -> dict:
    if not isinstance(scenario, Scenario):
        scenario_path = Path(scenario)
        scenario = load_scenario(scenario_path)
    else:
        scenario_path = None
    run = RunDir(out_dir)
    run.root.mkdir(parents=True, exist_ok=True)
    for stale in run.root.iterdir():
        if stale.is_file():
            stale.unlink()
        elif stale.is_dir():
            shutil.rmtree(stale)
    if scenario_path is not None:
        shutil.copyfile(scenario_path, run.scenario_file)

    config = config_from_scenario(scenario)
    w = config.window_size

    # stage 0: data and models
    champion = train_from_spec(scenario, scenario.train, "champion")
    challenger_spec = scenario.challenger or replace(
        scenario.train, seed_offset=scenario.train.seed_offset + 1
    )
    challenger = train_from_spec(scenario, challenger_spec, "challenger")
    test = sim.generate_dataset(scenario, scenario.test_n, sim.TEST_KEY)
    save_model(champion, run.champion_file)
    save_model(challenger, run.challenger_file)

    traffic = sim.generate_stream(scenario)
    sim.write_oracle(traffic, run.oracle_file)
    write_traffic_csv(traffic, run.traffic_file)

    champ_arm = _prepare_arm(champion, traffic.features)
    chall_arm = _prepare_arm(challenger, traffic.features)

    # stage 1: gate on the reference window
    predictor = build_predictor(champion, test, config.predictor_method)
    if config.predictor_method == "meta":
        save_meta_model(predictor.meta, run.meta_file)
    else:
        _write_json(run.calibrator_file, predictor.calibrator.to_dict())
    ref_window = Window(start_tick=0, end_tick=w)
    ref_batch = traffic.window_slice(ref_window)
    gate_report = gate(
        champion, test, {"default": ref_batch.features}, config, predictor=predictor
    )
    _write_json(run.gate_file, gate_report.to_dict())
    _write_json(
        run.config,
        {
            "pipeline": config.to_dict(),
            "class_count": scenario.class_count,
            "kpi_name": scenario.kpi.name if scenario.kpi else None,
            "scenario_name": scenario.name,
            "seed": scenario.seed,
        },
    )

    store = EventStore(directory=run.root)
    emitter = sim.KpiEmitter(scenario.kpi, scenario.seed) if scenario.kpi else None

    def emit_row(i: int, arm_name: str, arm: _ArmModels) -> tuple[ScoredEvent, KpiEvent | None]:
        event = _event_for_row(traffic, i, arm_name, arm, arm.model.model_id)
        kpi_event = None
        if emitter is not None:
            correct = bool(arm.labels[i] == traffic.true_labels[i])
            metrics = dict(zip(("top_prob", "margin", "entropy", "mean_feature_distance"), arm.meta_rows[i]))
            value = emitter.emit(correct, metrics)
            kpi_event = KpiEvent(
                correlation_id=event.correlation_id,
                kpi_name=scenario.kpi.name,
                value=value,
                timestamp=event.timestamp,
            )
        return event, kpi_event

    # reference window: champion serves everything, no canary yet
    ref_lo = int(np.searchsorted(traffic.ticks, 0, side="left"))
    ref_hi = int(np.searchsorted(traffic.ticks, w, side="left"))
    pending_events: list = []
    for i in range(ref_lo, ref_hi):
        event, kpi_event = emit_row(i, "none", champ_arm)
        pending_events.append(event)
        if kpi_event is not None:
            pending_events.append(kpi_event)
    store.append_many(pending_events)

    gate_ok = all(z.verdict == GATE_GO for z in gate_report.zones)

    # reference profile from the gated window
    train_for_edges = sim.generate_dataset(
        scenario, scenario.train.n, sim.TRAIN_KEY_BASE + scenario.train.seed_offset
    )
    ref_kpi_means = _window_kpi_means(store, ref_window)
    profile = build_reference_profile(
        train_features=train_for_edges.features,
        reference_features=ref_batch.features,
        predicted_labels=champ_arm.labels[ref_lo:ref_hi],
        class_count=scenario.class_count,
        reference_accuracy=gate_report.zones[0].predicted.point,
        kpi_means=ref_kpi_means,
    )
    _write_json(run.profile_file, profile.to_dict())

    summary: dict = {
        "scenario": scenario.name,
        "seed": scenario.seed,
        "gate": {z.zone: z.verdict for z in gate_report.zones},
        "test_set_accuracy": gate_report.test_set_accuracy,
        "status": "gate_no_go",
        "windows_evaluated": 0,
        "alerts": 0,
        "first_alert": None,
        "decision": None,
        "final_diagnosis_top": None,
    }
    if not gate_ok:
        _write_json(run.summary_file, summary)
        return summary

    # stage 2: canary deployment over the remaining traffic
    state = CanaryState(
        deployment_id=f"deploy_{scenario.name}",
        champion=BanditArm(model_id=champion.model_id),
        challenger=BanditArm(model_id=challenger.model_id),
        reward_source=config.reward_source,
        config=config.bandit,
        audit_path=run.decisions_file,
    )
    if config.reward_source == "predicted_correctness":
        champ_arm.scores = predictor.row_scores(traffic.features)
        chall_arm.scores = build_predictor(
            challenger, test, config.predictor_method
        ).row_scores(traffic.features)

    ctx = MonitorContext(
        profile=profile,
        predictor=predictor,
        thresholds=config.thresholds,
        store=store,
        features_by_id={cid: i for i, cid in enumerate(traffic.correlation_ids)},
        features=traffic.features,
        window_size=w,
        seed=config.seed,
        kpi_name=scenario.kpi.name if scenario.kpi else None,
        class_count=scenario.class_count,
    )

    arms = {"champion": champ_arm, "challenger": chall_arm}
    decision_record = None
    all_alerts: list[Alert] = []
    windows_evaluated = 0

    boundary = w
    while boundary < scenario.ticks_total:
        window_end = min(boundary + w, scenario.ticks_total)
        lo = int(np.searchsorted(traffic.ticks, boundary, side="left"))
        hi = int(np.searchsorted(traffic.ticks, window_end, side="left"))
        pending_events = []
        for i in range(lo, hi):
            cid = traffic.correlation_ids[i]
            if state.status in TERMINAL:
                arm_name = "champion" if state.status == "rolled_back" else "challenger"
                event, kpi_event = emit_row(i, arm_name, arms[arm_name])
            else:
                arm_name = route(state, cid)
                event, kpi_event = emit_row(i, arm_name, arms[arm_name])
                if config.reward_source.startswith("kpi:"):
                    reward = float(min(1.0, max(0.0, kpi_event.value)))
                else:
                    reward = float(arms[arm_name].scores[i])
                record_reward(state, cid, reward)
            pending_events.append(event)
            if kpi_event is not None:
                pending_events.append(kpi_event)
        store.append_many(pending_events)

        if state.status == STATUS_ACTIVE:
            status = decide(state, tick=window_end)
            if status in TERMINAL and decision_record is None:
                decision_record = {
                    "status": status,
                    "tick": window_end,
                    "routed_requests": state.routed_counts["champion"]
                    + state.routed_counts["challenger"],
                }

        reports, alerts = run_monitor_pass(ctx, run, upto_tick=window_end)
        windows_evaluated += len(reports)
        all_alerts.extend(alerts)
        boundary = window_end

    _write_json(run.deployment_file, state.to_dict())

    # stage 4: diagnosis over the whole deployed range when KPI data exists
    final_top = None
    if scenario.kpi is not None and scenario.ticks_total > w:
        deploy_window = Window(start_tick=w, end_tick=scenario.ticks_total)
        suspect, note = _diagnose_window(ctx, deploy_window)
        if suspect is not None:
            _write_json(run.final_diagnosis_file, suspect.to_dict())
            export_suspect_csv(suspect, run.suspects_csv)
            final_top = suspect.ranked[0].metric_name
        else:
            _write_json(run.final_diagnosis_file, {"error": note})

    summary.update(
        {
            "status": state.status,
            "windows_evaluated": windows_evaluated,
            "alerts": len(all_alerts),
            "first_alert": all_alerts[0].to_dict() if all_alerts else None,
            "decision": decision_record,
            "final_diagnosis_top": final_top,
            "event_counts": store.counts(),
        }
    )
    _write_json(run.summary_file, summary)
    return summary
