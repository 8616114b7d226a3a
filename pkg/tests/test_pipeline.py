"""Gate, orchestrated scenario runs, and incremental monitor cycles."""

from __future__ import annotations

import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from modelgate.errors import ValidationError
from modelgate.events import Window
from modelgate.models import TrainConfig, train_classifier
from modelgate.pipeline import (
    PipelineConfig,
    build_predictor,
    config_from_scenario,
    gate,
    read_traffic_csv,
    run_monitor_cycle,
    run_scenario,
    write_traffic_csv,
)
from modelgate.scenario import parse_scenario
from modelgate.sim import generate_dataset, generate_stream
from tests.conftest import MINI_ALERT_TEXT, MINI_PIPELINE_TEXT


class TestPipelineConfig:
    def test_round_trip(self):
        config = PipelineConfig(window_size=500, theta_gate=0.8, reward_source="kpi:click")
        assert PipelineConfig.from_dict(config.to_dict()) == config

    def test_threshold_range_enforced(self):
        with pytest.raises(ValidationError):
            PipelineConfig(window_size=500, theta_gate=0.0)
        with pytest.raises(ValidationError):
            PipelineConfig(window_size=500, theta_acc=1.5)
        with pytest.raises(ValidationError):
            PipelineConfig(window_size=0)

    def test_unknown_predictor_rejected(self):
        with pytest.raises(ValidationError):
            PipelineConfig(window_size=500, predictor_method="psychic")

    def test_thresholds_view(self):
        config = PipelineConfig(window_size=500, n_min=40, theta_acc=0.03)
        thresholds = config.thresholds
        assert thresholds.n_min == 40
        assert thresholds.theta_acc == 0.03

    def test_reward_defaults_follow_kpi(self):
        with_kpi = parse_scenario(MINI_PIPELINE_TEXT, name="a")
        assert config_from_scenario(with_kpi).reward_source == "kpi:click"
        plain = parse_scenario(
            MINI_PIPELINE_TEXT.replace("kpi.name = click\n", "")
            .replace("kpi.base_rate = 0.85\n", "")
            .replace("kpi.link.metric = margin\n", "")
            .replace("kpi.link.threshold = 0.3\n", "")
            .replace("kpi.link.degraded_rate = 0.2\n", ""),
            name="b",
        )
        assert config_from_scenario(plain).reward_source == "predicted_correctness"


@pytest.fixture(scope="module")
def gate_setup():
    sc = parse_scenario(MINI_ALERT_TEXT, name="gate")
    train = generate_dataset(sc, 2000, 100)
    test = generate_dataset(sc, 800, 200)
    model = train_classifier(train, TrainConfig(seed=sc.seed), model_id="champion")
    batch = generate_stream(sc)
    zones = {
        "stationary": batch.window_slice(Window(0, 2000)).features,
        "drifted": batch.window_slice(Window(2000, 3500)).features,
    }
    return sc, model, test, zones


class TestGate:
    def test_modest_threshold_passes(self, gate_setup):
        _, model, test, zones = gate_setup
        config = PipelineConfig(window_size=500, theta_gate=0.7, seed=17)
        report = gate(model, test, {"stationary": zones["stationary"]}, config)
        assert report.zones[0].verdict == "go"

    def test_impossible_threshold_blocks(self, gate_setup):
        _, model, test, zones = gate_setup
        config = PipelineConfig(window_size=500, theta_gate=0.999, seed=17)
        report = gate(model, test, {"stationary": zones["stationary"]}, config)
        assert report.zones[0].verdict == "no_go"

    def test_two_zone_split_follows_predicted_intervals(self, gate_setup):
        _, model, test, zones = gate_setup
        probe = PipelineConfig(window_size=500, theta_gate=0.5, seed=17)
        report = gate(model, test, zones, probe)
        by_zone = {z.zone: z.predicted for z in report.zones}
        low_stat = by_zone["stationary"].interval_low
        low_drift = by_zone["drifted"].interval_low
        assert low_drift < low_stat
        theta = (low_drift + low_stat) / 2
        split = gate(
            model, test, zones, PipelineConfig(window_size=500, theta_gate=theta, seed=17)
        )
        verdicts = {z.zone: z.verdict for z in split.zones}
        assert verdicts == {"stationary": "go", "drifted": "no_go"}

    def test_verdict_rule_invariant(self, gate_setup):
        _, model, test, zones = gate_setup
        config = PipelineConfig(window_size=500, theta_gate=0.85, seed=17)
        report = gate(model, test, zones, config)
        for zone in report.zones:
            expected = "go" if zone.predicted.interval_low >= config.theta_gate else "no_go"
            assert zone.verdict == expected

    def test_calibrated_mean_predictor_supported(self, gate_setup):
        _, model, test, zones = gate_setup
        config = PipelineConfig(
            window_size=500, theta_gate=0.7, predictor_method="calibrated_mean", seed=17
        )
        predictor = build_predictor(model, test, "calibrated_mean")
        report = gate(model, test, {"stationary": zones["stationary"]}, config, predictor)
        assert report.method == "calibrated_mean"
        assert report.zones[0].verdict == "go"

    def test_zone_report_is_deterministic(self, gate_setup):
        _, model, test, zones = gate_setup
        config = PipelineConfig(window_size=500, theta_gate=0.7, seed=17)
        a = gate(model, test, zones, config)
        b = gate(model, test, zones, config)
        assert a.to_dict() == b.to_dict()


class TestRunScenario:
    def test_summary_shape(self, mini_pipeline_run):
        summary = json.loads((mini_pipeline_run / "summary.json").read_text())
        assert summary["gate"] == {"default": "go"}
        assert summary["status"] == "rolled_back"
        assert summary["decision"]["status"] == "rolled_back"
        assert summary["event_counts"] == {"model": 2000, "kpi": 2000}
        assert summary["final_diagnosis_top"] == "margin"

    def test_expected_artifacts_exist(self, mini_pipeline_run):
        for name in (
            "config.json",
            "model_champion.json",
            "model_challenger.json",
            "meta_model.bin",
            "gate_report.json",
            "profile.json",
            "traffic.csv",
            "oracle.jsonl",
            "model_events.jsonl",
            "kpi_events.jsonl",
            "reports.jsonl",
            "alerts.jsonl",
            "decisions.jsonl",
            "deployment.json",
            "monitor_state.json",
            "final_diagnosis.json",
            "suspects.csv",
            "summary.json",
        ):
            assert (mini_pipeline_run / name).exists(), name

    def test_rerun_is_byte_identical(self, mini_pipeline_run, tmp_path):
        scenario = parse_scenario(MINI_PIPELINE_TEXT, name="mini_pipeline")
        rerun = tmp_path / "rerun"
        run_scenario(scenario, rerun)
        for name in (
            "summary.json",
            "traffic.csv",
            "model_champion.json",
            "gate_report.json",
            "alerts.jsonl",
            "decisions.jsonl",
            "deployment.json",
        ):
            assert (rerun / name).read_bytes() == (mini_pipeline_run / name).read_bytes(), name

    def test_audit_trail_records_the_rollback(self, mini_pipeline_run):
        rows = [
            json.loads(line)
            for line in (mini_pipeline_run / "decisions.jsonl").read_text().splitlines()
        ]
        assert rows[-1]["verdict"] == "rollback"
        assert rows[-1]["actor"] == "auto"
        assert rows[-1]["posterior"]["challenger"]["mean"] < rows[-1]["posterior"]["champion"]["mean"]

    def test_blocked_gate_skips_deployment(self, tmp_path):
        text = MINI_PIPELINE_TEXT + "pipeline.theta_gate = 0.99\n"
        scenario = parse_scenario(text, name="blocked")
        out = tmp_path / "blocked"
        summary = run_scenario(scenario, out)
        assert summary["gate"] == {"default": "no_go"}
        assert summary["status"] == "gate_no_go"
        assert not (out / "deployment.json").exists()
        # The champion serves the reference window regardless; the blocked
        # canary never serves the deployment windows after it.
        events = (out / "model_events.jsonl").read_text().splitlines()
        assert len(events) == 400


class TestMonitorCycle:
    def test_completed_run_has_nothing_left_to_evaluate(self, mini_alert_run, tmp_path):
        work = tmp_path / "work"
        shutil.copytree(mini_alert_run, work)
        reports, alerts = run_monitor_cycle(work, cycles=1)
        assert reports == []
        assert alerts == []

    def test_rewound_cursor_replays_the_same_alerts(self, mini_alert_run, tmp_path):
        work = tmp_path / "work"
        shutil.copytree(mini_alert_run, work)
        baseline = [
            json.loads(line) for line in (work / "alerts.jsonl").read_text().splitlines()
        ]
        state = json.loads((work / "monitor_state.json").read_text())
        state["evaluated_through_tick"] = 500
        (work / "monitor_state.json").write_text(json.dumps(state))
        (work / "alerts.jsonl").write_text("")
        (work / "reports.jsonl").write_text("")
        reports, alerts = run_monitor_cycle(work, cycles=10)
        replayed = [
            json.loads(line) for line in (work / "alerts.jsonl").read_text().splitlines()
        ]
        assert replayed == baseline
        state = json.loads((work / "monitor_state.json").read_text())
        assert state["evaluated_through_tick"] == 3500


class TestTrafficCsv:
    def test_round_trip(self, tmp_path):
        scenario = parse_scenario(MINI_ALERT_TEXT, name="csv")
        batch = generate_stream(scenario)
        path = tmp_path / "traffic.csv"
        write_traffic_csv(batch, path)
        ids, ticks, features = read_traffic_csv(path)
        assert ids == batch.correlation_ids
        assert np.array_equal(ticks, batch.ticks)
        assert np.array_equal(features, batch.features)
