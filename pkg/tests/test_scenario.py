"""Scenario file parsing, defaults, and validation diagnostics."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from modelgate.errors import ValidationError
from modelgate.scenario import load_scenario, parse_scenario

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"

BASIC = """
seed = 3
n_features = 2
class_count = 2
ticks_total = 1000
window_size = 100
mix = 0.5, 0.5
class.0.mean = 1.0, 0.0
class.1.mean = -1.0, 0.0
label_rule.features = 0, 1
label_rule.sharpness = 1.5
"""


class TestParsing:
    def test_basic_fields(self):
        sc = parse_scenario(BASIC, name="basic")
        assert sc.name == "basic"
        assert sc.seed == 3
        assert sc.class_count == 2
        assert sc.mix == (0.5, 0.5)
        assert np.array_equal(sc.class_means, [[1.0, 0.0], [-1.0, 0.0]])
        assert np.array_equal(sc.class_covs, np.ones((2, 2)))
        assert sc.label_features == (0, 1)

    def test_defaults(self):
        sc = parse_scenario(BASIC)
        assert sc.kpi is None
        assert sc.challenger is None
        assert sc.drift == []
        assert sc.test_n == 1000
        assert sc.train.n == 2000
        assert sc.train.epochs == 300
        assert sc.pipeline["theta_gate"] == 0.7
        assert sc.pipeline["n_min"] == 100
        assert sc.pipeline["predictor"] == "meta"
        assert sc.pipeline["bandit_n_min"] == 100

    def test_comments_and_blank_lines_ignored(self):
        sc = parse_scenario("# leading comment\n\n" + BASIC)
        assert sc.seed == 3

    def test_drift_block(self):
        sc = parse_scenario(
            BASIC
            + "drift.0.kind = covariate\ndrift.0.onset_tick = 500\n"
            + "drift.0.features = 1\ndrift.0.magnitude = 2.0\n"
        )
        assert len(sc.drift) == 1
        assert sc.drift[0].kind == "covariate"
        assert sc.drift[0].onset_tick == 500
        assert sc.drift[0].features == (1,)
        assert sc.drift[0].magnitude == 2.0

    def test_kpi_link_block(self):
        sc = parse_scenario(
            BASIC
            + "kpi.name = click\nkpi.base_rate = 0.9\n"
            + "kpi.link.metric = margin\nkpi.link.threshold = 0.2\n"
            + "kpi.link.degraded_rate = 0.1\n"
        )
        assert sc.kpi.name == "click"
        assert sc.kpi.link.metric == "margin"
        assert sc.kpi.link.threshold == 0.2
        assert sc.kpi.link.direction == "below"

    def test_challenger_block_only_when_keys_present(self):
        sc = parse_scenario(BASIC + "challenger.epochs = 10\n")
        assert sc.challenger is not None
        assert sc.challenger.epochs == 10
        assert sc.challenger.seed_offset == 1

    def test_pipeline_overrides(self):
        sc = parse_scenario(
            BASIC + "pipeline.theta_gate = 0.9\npipeline.predictor = calibrated_mean\n"
        )
        assert sc.pipeline["theta_gate"] == 0.9
        assert sc.pipeline["predictor"] == "calibrated_mean"


class TestSyntaxErrors:
    def test_missing_equals_names_the_line(self):
        with pytest.raises(ValidationError, match="line 2"):
            parse_scenario("seed = 3\nno equals sign here\n")

    def test_duplicate_key_names_the_line(self):
        with pytest.raises(ValidationError, match="line 3.*duplicate"):
            parse_scenario("seed = 3\nn_features = 2\nseed = 4\n")

    def test_bad_type_names_the_key(self):
        with pytest.raises(ValidationError, match="seed"):
            parse_scenario(BASIC.replace("seed = 3", "seed = banana"))

    def test_unknown_key_rejected(self):
        with pytest.raises(ValidationError, match="mystery_key"):
            parse_scenario(BASIC + "mystery_key = 1\n")

    def test_missing_required_key(self):
        with pytest.raises(ValidationError, match="class_count"):
            parse_scenario("seed = 3\nn_features = 2\n")


class TestSemanticValidation:
    def test_mix_must_sum_to_one(self):
        with pytest.raises(ValidationError, match="mix"):
            parse_scenario(BASIC.replace("mix = 0.5, 0.5", "mix = 0.9, 0.9"))

    def test_unknown_drift_kind(self):
        with pytest.raises(ValidationError, match="kind"):
            parse_scenario(
                BASIC + "drift.0.kind = seasonal\ndrift.0.onset_tick = 100\n"
            )

    def test_covariate_drift_needs_features(self):
        with pytest.raises(ValidationError, match="features"):
            parse_scenario(
                BASIC + "drift.0.kind = covariate\ndrift.0.onset_tick = 100\n"
            )

    def test_onset_beyond_run_rejected(self):
        with pytest.raises(ValidationError, match="beyond"):
            parse_scenario(
                BASIC
                + "drift.0.kind = covariate\ndrift.0.onset_tick = 5000\n"
                + "drift.0.features = 0\ndrift.0.magnitude = 1.0\n"
            )

    def test_onsets_must_increase(self):
        text = (
            BASIC
            + "drift.0.kind = covariate\ndrift.0.onset_tick = 500\n"
            + "drift.0.features = 0\ndrift.0.magnitude = 1.0\n"
            + "drift.1.kind = covariate\ndrift.1.onset_tick = 400\n"
            + "drift.1.features = 1\ndrift.1.magnitude = 1.0\n"
        )
        with pytest.raises(ValidationError, match="increasing"):
            parse_scenario(text)

    def test_bad_base_rate_rejected(self):
        with pytest.raises(ValidationError, match="base_rate"):
            parse_scenario(BASIC + "kpi.name = click\nkpi.base_rate = 1.5\n")

    def test_mean_arity_must_match_features(self):
        with pytest.raises(ValidationError, match="class.0.mean"):
            parse_scenario(BASIC.replace("class.0.mean = 1.0, 0.0", "class.0.mean = 1.0"))

    def test_bad_predictor_rejected(self):
        with pytest.raises(ValidationError, match="predictor"):
            parse_scenario(BASIC + "pipeline.predictor = psychic\n")


class TestShippedScenarios:
    @pytest.mark.parametrize(
        "stem",
        [
            "stationary",
            "covariate_only",
            "prior_shift",
            "concept_drift",
            "kpi_linked",
            "challenger_worse",
        ],
    )
    def test_shipped_file_parses(self, stem):
        sc = load_scenario(SCENARIO_DIR / f"{stem}.scenario")
        assert sc.ticks_total % sc.window_size == 0
        assert len(sc.mix) == sc.class_count

    def test_shipped_drift_scenarios_share_onset(self):
        for stem in ("covariate_only", "prior_shift", "concept_drift"):
            sc = load_scenario(SCENARIO_DIR / f"{stem}.scenario")
            assert len(sc.drift) == 1
            assert sc.drift[0].onset_tick == 6000

    def test_challenger_worse_has_untrained_challenger(self):
        sc = load_scenario(SCENARIO_DIR / "challenger_worse.scenario")
        assert sc.challenger is not None
        assert sc.challenger.epochs == 0
        assert sc.kpi is not None
