"""Champion/challenger rollout driven by a two-armed Thompson-sampling bandit.

Each arm keeps a Beta posterior over its reward rate. Routing alternates
deterministically during warm-up so both arms reach a minimum sample size,
then samples from the posteriors. A decision fires once the posterior
probability of a delta-sized reward difference clears p_decide, estimated by
seeded Monte Carlo draws. Decisions are irreversible within a deployment and
append to an audit log.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InsufficientDataError, ValidationError

STATUS_WARMING = "warming"
STATUS_ACTIVE = "active"
STATUS_PROMOTED = "promoted"
STATUS_ROLLED_BACK = "rolled_back"
TERMINAL = (STATUS_PROMOTED, STATUS_ROLLED_BACK)

MC_DRAWS = 10_000


@dataclass
class BanditArm:
    model_id: str
    alpha: float = 1.0
    beta: float = 1.0
    prior_alpha: float = 1.0
    prior_beta: float = 1.0
    pulls: int = 0
    reward_sum: float = 0.0

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValidationError("Beta parameters must be positive")

    def update(self, reward: float) -> None:
        if not 0.0 <= reward <= 1.0:
            raise ValidationError(f"reward {reward!r} outside [0,1]")
        self.alpha += reward
        self.beta += 1.0 - reward
        self.pulls += 1
        self.reward_sum += reward

    @property
    def posterior_mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "alpha": self.alpha,
            "beta": self.beta,
            "prior_alpha": self.prior_alpha,
            "prior_beta": self.prior_beta,
            "pulls": self.pulls,
            "reward_sum": self.reward_sum,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "BanditArm":
        return cls(
            model_id=payload["model_id"],
            alpha=float(payload["alpha"]),
            beta=float(payload["beta"]),
            prior_alpha=float(payload["prior_alpha"]),
            prior_beta=float(payload["prior_beta"]),
            pulls=int(payload["pulls"]),
            reward_sum=float(payload["reward_sum"]),
        )


@dataclass
class CanaryConfig:
    n_min: int = 100
    delta: float = 0.05
    p_decide: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if self.n_min < 2:
            raise ValidationError("n_min must be >= 2")
        if not 0.0 <= self.delta < 1.0:
            raise ValidationError("delta must lie in [0,1)")
        if not 0.5 < self.p_decide < 1.0:
            raise ValidationError("p_decide must lie in (0.5,1)")

    def to_dict(self) -> dict:
        return {
            "n_min": self.n_min,
            "delta": self.delta,
            "p_decide": self.p_decide,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "CanaryConfig":
        return cls(**payload)


@dataclass
class CanaryState:
    deployment_id: str
    champion: BanditArm
    challenger: BanditArm
    reward_source: str = "predicted_correctness"  # or "kpi:<name>"
    config: CanaryConfig = field(default_factory=CanaryConfig)
    status: str = STATUS_WARMING
    audit_path: Path | None = None
    routed_counts: dict[str, int] = field(default_factory=lambda: {"champion": 0, "challenger": 0})
    _pending: dict[str, str] = field(default_factory=dict)
    _rewarded: set = field(default_factory=set)
    _route_counter: int = 0
    _decide_counter: int = 0

    def __post_init__(self):
        if self.reward_source != "predicted_correctness" and not self.reward_source.startswith(
            "kpi:"
        ):
            raise ValidationError(f"unknown reward source {self.reward_source!r}")
        self._rng = np.random.default_rng([self.config.seed, 1])

    @property
    def kpi_name(self) -> str | None:
        if self.reward_source.startswith("kpi:"):
            return self.reward_source.split(":", 1)[1]
        return None

    def arm(self, name: str) -> BanditArm:
        if name == "champion":
            return self.champion
        if name == "challenger":
            return self.challenger
        raise ValidationError(f"unknown arm {name!r}")

    def traffic_share(self) -> dict[str, float]:
        total = self.routed_counts["champion"] + self.routed_counts["challenger"]
        if total == 0:
            return {"champion": 0.0, "challenger": 0.0}
        return {name: count / total for name, count in self.routed_counts.items()}

    def to_dict(self) -> dict:
        return {
            "deployment_id": self.deployment_id,
            "champion": self.champion.to_dict(),
            "challenger": self.challenger.to_dict(),
            "reward_source": self.reward_source,
            "config": self.config.to_dict(),
            "status": self.status,
            "routed_counts": dict(self.routed_counts),
            "traffic_share": self.traffic_share(),
            "posterior_means": {
                "champion": self.champion.posterior_mean,
                "challenger": self.challenger.posterior_mean,
            },
        }

    @classmethod
    def from_dict(cls, payload: dict, audit_path: Path | None = None) -> "CanaryState":
        """Rehydrate a persisted deployment; routing bookkeeping starts fresh."""
        state = cls(
            deployment_id=payload["deployment_id"],
            champion=BanditArm.from_dict(payload["champion"]),
            challenger=BanditArm.from_dict(payload["challenger"]),
            reward_source=payload["reward_source"],
            config=CanaryConfig.from_dict(payload["config"]),
            status=payload["status"],
            audit_path=audit_path,
        )
        state.routed_counts = {k: int(v) for k, v in payload["routed_counts"].items()}
        return state


def route(state: CanaryState, correlation_id: str) -> str:
    """Pick an arm for one request and remember it for reward attribution."""
    if state.status in TERMINAL:
        raise ValidationError(f"deployment {state.deployment_id} is {state.status}; routing closed")
    if correlation_id in state._pending or correlation_id in state._rewarded:
        raise ValidationError(f"correlation_id {correlation_id!r} already routed")
    if state.status == STATUS_WARMING:
        arm_name = "champion" if state._route_counter % 2 == 0 else "challenger"
    else:
        theta_champ = state._rng.beta(state.champion.alpha, state.champion.beta)
        theta_chall = state._rng.beta(state.challenger.alpha, state.challenger.beta)
        arm_name = "challenger" if theta_chall > theta_champ else "champion"
    state._route_counter += 1
    state._pending[correlation_id] = arm_name
    state.routed_counts[arm_name] += 1
    return arm_name


def record_reward(state: CanaryState, correlation_id: str, reward: float) -> None:
    if correlation_id in state._rewarded:
        raise ValidationError(f"correlation_id {correlation_id!r} already rewarded")
    arm_name = state._pending.pop(correlation_id, None)
    if arm_name is None:
        raise ValidationError(f"correlation_id {correlation_id!r} was never routed")
    state.arm(arm_name).update(reward)
    state._rewarded.add(correlation_id)
    half = state.config.n_min // 2
    if (
        state.status == STATUS_WARMING
        and state.champion.pulls >= half
        and state.challenger.pulls >= half
    ):
        state.status = STATUS_ACTIVE


def posterior_comparison(state: CanaryState) -> dict[str, float]:
    """Monte Carlo estimates of a delta-sized reward difference, either way."""
    rng = np.random.default_rng([state.config.seed, 2, state._decide_counter])
    champ = rng.beta(state.champion.alpha, state.champion.beta, MC_DRAWS)
    chall = rng.beta(state.challenger.alpha, state.challenger.beta, MC_DRAWS)
    delta = state.config.delta
    return {
        "p_challenger_worse": float(np.mean(chall < champ - delta)),
        "p_challenger_better": float(np.mean(chall > champ + delta)),
    }


def decide(state: CanaryState, tick: int = 0) -> str:
    if state.status in TERMINAL:
        raise ValidationError(f"deployment {state.deployment_id} already decided: {state.status}")
    half = state.config.n_min // 2
    if state.champion.pulls < half or state.challenger.pulls < half:
        raise InsufficientDataError(
            f"decide needs >= {half} pulls per arm; have champion={state.champion.pulls}, "
            f"challenger={state.challenger.pulls}"
        )
    comparison = posterior_comparison(state)
    state._decide_counter += 1
    verdict = None
    if comparison["p_challenger_worse"] > state.config.p_decide:
        state.status = STATUS_ROLLED_BACK
        verdict = "rollback"
    elif comparison["p_challenger_better"] > state.config.p_decide:
        state.status = STATUS_PROMOTED
        verdict = "promote"
    if verdict is not None:
        _audit(state, tick=tick, verdict=verdict, actor="auto", comparison=comparison)
    return state.status


def force_decision(state: CanaryState, verdict: str, actor: str, tick: int = 0) -> str:
    if verdict not in ("promote", "rollback"):
        raise ValidationError(f"verdict must be promote or rollback, got {verdict!r}")
    if not actor:
        raise ValidationError("actor must be nonempty")
    if state.status in TERMINAL:
        raise ValidationError(f"deployment {state.deployment_id} already decided: {state.status}")
    state.status = STATUS_PROMOTED if verdict == "promote" else STATUS_ROLLED_BACK
    _audit(state, tick=tick, verdict=verdict, actor=actor, comparison=posterior_comparison(state))
    return state.status


def _audit(state: CanaryState, tick: int, verdict: str, actor: str, comparison: dict) -> None:
    record = {
        "deployment_id": state.deployment_id,
        "tick": tick,
        "verdict": verdict,
        "actor": actor,
        "posterior": {
            "champion": {
                "alpha": state.champion.alpha,
                "beta": state.champion.beta,
                "mean": state.champion.posterior_mean,
                "pulls": state.champion.pulls,
            },
            "challenger": {
                "alpha": state.challenger.alpha,
                "beta": state.challenger.beta,
                "mean": state.challenger.posterior_mean,
                "pulls": state.challenger.pulls,
            },
            **comparison,
        },
    }
    if state.audit_path is not None:
        with open(state.audit_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
