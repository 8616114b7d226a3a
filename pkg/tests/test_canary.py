"""Thompson-sampling canary: routing, posteriors, decisions, audit trail."""

from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modelgate.canary import (
    BanditArm,
    CanaryConfig,
    CanaryState,
    decide,
    force_decision,
    posterior_comparison,
    record_reward,
    route,
)
from modelgate.errors import InsufficientDataError, ValidationError
from modelgate.studies import bandit_run


def fresh_state(n_min=4, delta=0.05, p_decide=0.95, seed=0, audit_path=None) -> CanaryState:
    return CanaryState(
        deployment_id="dep-test",
        champion=BanditArm(model_id="champion"),
        challenger=BanditArm(model_id="challenger"),
        config=CanaryConfig(n_min=n_min, delta=delta, p_decide=p_decide, seed=seed),
        audit_path=audit_path,
    )


def feed(arm: BanditArm, ones: int, zeros: int) -> None:
    for _ in range(ones):
        arm.update(1.0)
    for _ in range(zeros):
        arm.update(0.0)


class TestRouting:
    def test_warming_alternates_starting_with_champion(self):
        state = fresh_state(n_min=100)
        arms = [route(state, f"r{i}") for i in range(6)]
        assert arms == ["champion", "challenger"] * 3

    def test_terminal_state_refuses_traffic(self):
        state = fresh_state()
        state.status = "promoted"
        with pytest.raises(ValidationError):
            route(state, "r0")

    def test_duplicate_correlation_id_rejected(self):
        state = fresh_state()
        route(state, "r0")
        with pytest.raises(ValidationError):
            route(state, "r0")

    def test_rewarded_id_cannot_be_routed_again(self):
        state = fresh_state(n_min=100)
        route(state, "r0")
        record_reward(state, "r0", 1.0)
        with pytest.raises(ValidationError):
            route(state, "r0")

    def test_uniform_posteriors_split_traffic_evenly(self):
        state = fresh_state(n_min=2, seed=5)
        state.status = "active"
        arms = [route(state, f"r{i}") for i in range(10_000)]
        share = arms.count("challenger") / len(arms)
        assert share == pytest.approx(0.5, abs=0.02)

    def test_dominant_champion_starves_challenger(self):
        state = fresh_state(n_min=2, seed=6)
        state.status = "active"
        feed(state.champion, 99, 0)
        feed(state.challenger, 0, 99)
        arms = [route(state, f"r{i}") for i in range(2000)]
        assert arms.count("challenger") / len(arms) < 0.01

    def test_routing_is_seed_deterministic(self):
        a = fresh_state(n_min=2, seed=9)
        b = fresh_state(n_min=2, seed=9)
        a.status = b.status = "active"
        assert [route(a, f"r{i}") for i in range(200)] == [
            route(b, f"r{i}") for i in range(200)
        ]

    def test_traffic_share_tracks_routed_counts(self):
        state = fresh_state(n_min=100)
        for i in range(10):
            route(state, f"r{i}")
        share = state.traffic_share()
        assert share["champion"] == pytest.approx(0.5)
        assert share["challenger"] == pytest.approx(0.5)


class TestPosterior:
    def test_success_increments_alpha(self):
        arm = BanditArm(model_id="m")
        arm.update(1.0)
        assert (arm.alpha, arm.beta) == (2.0, 1.0)

    def test_failure_increments_beta(self):
        arm = BanditArm(model_id="m")
        arm.update(0.0)
        assert (arm.alpha, arm.beta) == (1.0, 2.0)

    def test_fractional_reward_splits_mass(self):
        arm = BanditArm(model_id="m")
        arm.update(0.25)
        assert arm.alpha == pytest.approx(1.25)
        assert arm.beta == pytest.approx(1.75)

    def test_out_of_range_reward_rejected(self):
        with pytest.raises(ValidationError):
            BanditArm(model_id="m").update(1.5)
        with pytest.raises(ValidationError):
            BanditArm(model_id="m").update(-0.1)

    def test_posterior_mean(self):
        arm = BanditArm(model_id="m")
        feed(arm, 3, 1)
        assert arm.posterior_mean == pytest.approx(4 / 6)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=0, max_size=40))
    def test_conjugate_bookkeeping(self, rewards):
        arm = BanditArm(model_id="m")
        for r in rewards:
            arm.update(r)
        assert arm.alpha - arm.prior_alpha == pytest.approx(sum(rewards))
        assert arm.beta - arm.prior_beta == pytest.approx(len(rewards) - sum(rewards))
        assert arm.pulls == len(rewards)


class TestRewards:
    def test_unknown_correlation_id_rejected(self):
        state = fresh_state()
        with pytest.raises(ValidationError):
            record_reward(state, "ghost", 1.0)

    def test_double_reward_rejected(self):
        state = fresh_state(n_min=100)
        route(state, "r0")
        record_reward(state, "r0", 1.0)
        with pytest.raises(ValidationError):
            record_reward(state, "r0", 1.0)

    def test_warming_flips_to_active_after_half_n_min_per_arm(self):
        state = fresh_state(n_min=4)
        assert state.status == "warming"
        for i in range(4):
            route(state, f"r{i}")
            record_reward(state, f"r{i}", 1.0)
        assert state.status == "active"

    def test_stays_warming_while_one_arm_short(self):
        state = fresh_state(n_min=4)
        for i in range(3):
            route(state, f"r{i}")
        record_reward(state, "r0", 1.0)
        record_reward(state, "r2", 1.0)
        # Both rewarded pulls landed on champion; challenger still has none.
        assert state.status == "warming"


class TestDecide:
    def _active_state(self, champ, chall, delta=0.1, seed=3):
        state = fresh_state(n_min=100, delta=delta, seed=seed)
        state.status = "active"
        feed(state.champion, *champ)
        feed(state.challenger, *chall)
        return state

    def test_clearly_worse_challenger_rolls_back(self):
        state = self._active_state(champ=(45, 5), chall=(0, 50))
        assert decide(state) == "rolled_back"

    def test_symmetric_evidence_stays_active(self):
        state = self._active_state(champ=(25, 25), chall=(25, 25))
        assert decide(state) == "active"

    def test_clearly_better_challenger_promotes(self):
        state = self._active_state(champ=(30, 20), chall=(49, 1))
        assert decide(state) == "promoted"

    def test_insufficient_pulls_rejected(self):
        state = self._active_state(champ=(20, 20), chall=(45, 4))
        with pytest.raises(InsufficientDataError):
            decide(state)

    def test_terminal_state_rejected(self):
        state = self._active_state(champ=(45, 5), chall=(0, 50))
        decide(state)
        with pytest.raises(ValidationError):
            decide(state)

    def test_comparison_probabilities_are_complementary_tail_events(self):
        state = self._active_state(champ=(25, 25), chall=(25, 25))
        comparison = posterior_comparison(state)
        assert 0.0 <= comparison["p_challenger_worse"] <= 1.0
        assert 0.0 <= comparison["p_challenger_better"] <= 1.0
        assert comparison["p_challenger_worse"] + comparison["p_challenger_better"] <= 1.0


class TestForceDecision:
    def test_force_rollback_writes_audit_row(self, tmp_path):
        audit = tmp_path / "decisions.jsonl"
        state = fresh_state(audit_path=audit)
        assert force_decision(state, "rollback", actor="operator:jane") == "rolled_back"
        rows = [json.loads(line) for line in audit.read_text().splitlines()]
        assert len(rows) == 1
        assert rows[0]["actor"] == "operator:jane"
        assert rows[0]["verdict"] == "rollback"
        assert rows[0]["deployment_id"] == "dep-test"

    def test_force_works_during_warming(self):
        state = fresh_state()
        assert state.status == "warming"
        assert force_decision(state, "promote", actor="op") == "promoted"

    def test_second_force_rejected(self):
        state = fresh_state()
        force_decision(state, "rollback", actor="op")
        with pytest.raises(ValidationError):
            force_decision(state, "promote", actor="op")

    def test_empty_actor_rejected(self):
        with pytest.raises(ValidationError):
            force_decision(fresh_state(), "rollback", actor="")

    def test_unknown_verdict_rejected(self):
        with pytest.raises(ValidationError):
            force_decision(fresh_state(), "decommission", actor="op")


class TestPersistence:
    def test_state_round_trip(self, tmp_path):
        state = fresh_state(n_min=6, seed=11)
        for i in range(6):
            route(state, f"r{i}")
            record_reward(state, f"r{i}", float(i % 2))
        payload = state.to_dict()
        restored = CanaryState.from_dict(payload, audit_path=None)
        assert restored.status == state.status
        assert restored.champion.alpha == state.champion.alpha
        assert restored.challenger.beta == state.challenger.beta
        assert restored.routed_counts == state.routed_counts
        assert restored.to_dict() == payload

    def test_serialized_state_reports_posterior_means(self):
        state = fresh_state()
        feed(state.champion, 3, 1)
        payload = state.to_dict()
        assert payload["posterior_means"]["champion"] == pytest.approx(4 / 6)
        assert "traffic_share" in payload


class TestRegret:
    def test_challenger_share_decays_as_evidence_accumulates(self):
        # With a clearly worse challenger the sampler routes less and less
        # traffic to it; pool first- vs last-quartile shares over ten runs.
        firsts, lasts = [], []
        for seed in range(600, 610):
            result = bandit_run(
                champion_rate=0.5,
                challenger_rate=0.3,
                config=CanaryConfig(n_min=100, delta=0.05, p_decide=0.95, seed=seed),
                seed=seed,
                trace=True,
            )
            arms = result["trace"]
            quarter = max(len(arms) // 4, 1)
            firsts.append(arms[:quarter].count("challenger") / quarter)
            lasts.append(arms[-quarter:].count("challenger") / quarter)
        assert np.mean(firsts) > np.mean(lasts)
