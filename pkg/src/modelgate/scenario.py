"""Scenario files: flat dotted-key text describing one simulated run.

Format, one `key = value` per line, `#` comments allowed:

    seed = 7
    n_features = 4
    class_count = 2
    ticks_total = 20000
    window_size = 1000
    mix = 0.5, 0.5
    class.0.mean = 1.0, 1.0, 0.0, 0.0
    class.1.mean = -1.0, -1.0, 0.0, 0.0
    label_rule.features = 0, 1
    label_rule.sharpness = 1.2
    drift.0.onset_tick = 5000
    drift.0.kind = covariate
    drift.0.features = 3
    drift.0.magnitude = 3.0
    kpi.name = click
    kpi.base_rate = 0.9

Lists are comma-separated. Parse errors carry the offending line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError

DRIFT_KINDS = ("covariate", "prior", "concept")
PREDICTOR_METHODS = ("meta", "calibrated_mean")


@dataclass(frozen=True)
class DriftSpec:
    onset_tick: int
    kind: str
    features: tuple[int, ...] = ()  # covariate
    magnitude: float = 0.0  # covariate
    mix: tuple[float, ...] = ()  # prior
    angle: float = 0.0  # concept

    def to_dict(self) -> dict:
        return {
            "onset_tick": self.onset_tick,
            "kind": self.kind,
            "features": list(self.features),
            "magnitude": self.magnitude,
            "mix": list(self.mix),
            "angle": self.angle,
        }


@dataclass(frozen=True)
class KpiLink:
    metric: str
    threshold: float
    degraded_rate: float
    direction: str = "below"  # degrade when metric below/above threshold


@dataclass(frozen=True)
class KpiRule:
    name: str
    type: str = "binary"
    base_rate: float = 0.9
    link: KpiLink | None = None


@dataclass(frozen=True)
class TrainSpec:
    n: int = 2000
    learning_rate: float = 0.1
    epochs: int = 300
    l2: float = 1e-3
    seed_offset: int = 0


@dataclass
class Scenario:
    name: str
    seed: int
    n_features: int
    class_count: int
    ticks_total: int
    window_size: int
    class_means: np.ndarray  # K x D
    class_covs: np.ndarray  # K x D diagonal variances
    mix: tuple[float, ...]
    label_features: tuple[int, ...]
    sharpness: float = 1.0
    rows_per_tick: int = 1
    drift: list[DriftSpec] = field(default_factory=list)
    kpi: KpiRule | None = None
    train: TrainSpec = field(default_factory=TrainSpec)
    test_n: int = 1000
    challenger: TrainSpec | None = None
    pipeline: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_features < 1 or self.class_count < 2:
            raise ValidationError("need n_features >= 1 and class_count >= 2")
        if self.ticks_total < 1 or self.window_size < 1 or self.rows_per_tick < 1:
            raise ValidationError("ticks_total, window_size, rows_per_tick must be >= 1")
        self.class_means = np.asarray(self.class_means, dtype=float)
        self.class_covs = np.asarray(self.class_covs, dtype=float)
        if self.class_means.shape != (self.class_count, self.n_features):
            raise ValidationError(
                f"class means shape {self.class_means.shape} != "
                f"({self.class_count}, {self.n_features})"
            )
        if self.class_covs.shape != self.class_means.shape:
            raise ValidationError("class covariances must match class means shape")
        if np.any(self.class_covs <= 0):
            raise ValidationError("class variances must be positive")
        if len(self.mix) != self.class_count or abs(sum(self.mix) - 1.0) > 1e-9:
            raise ValidationError("mix must have one weight per class and sum to 1")
        if not self.label_features or any(
            f < 0 or f >= self.n_features for f in self.label_features
        ):
            raise ValidationError("label_rule.features must index real features")
        if self.sharpness <= 0:
            raise ValidationError("label_rule.sharpness must be positive")
        last = -1
        for i, d in enumerate(self.drift):
            if d.kind not in DRIFT_KINDS:
                raise ValidationError(f"drift.{i}: unknown kind {d.kind!r}")
            if d.onset_tick <= last:
                raise ValidationError(f"drift.{i}: onset ticks must be strictly increasing")
            if d.onset_tick >= self.ticks_total:
                raise ValidationError(f"drift.{i}: onset {d.onset_tick} beyond run end")
            if d.kind == "covariate" and not d.features:
                raise ValidationError(f"drift.{i}: covariate drift needs features")
            if d.kind == "prior":
                if len(d.mix) != self.class_count or abs(sum(d.mix) - 1.0) > 1e-9:
                    raise ValidationError(f"drift.{i}: prior drift mix must sum to 1")
            if d.kind == "concept" and len(self.label_features) < 2:
                raise ValidationError(f"drift.{i}: concept drift needs >= 2 label features")
            last = d.onset_tick
        if self.kpi is not None:
            if not 0.0 <= self.kpi.base_rate <= 1.0:
                raise ValidationError("kpi.base_rate must lie in [0,1]")
            if self.kpi.type not in ("binary", "continuous"):
                raise ValidationError(f"unknown kpi type {self.kpi.type!r}")
            if self.kpi.link is not None and not 0.0 <= self.kpi.link.degraded_rate <= 1.0:
                raise ValidationError("kpi.link.degraded_rate must lie in [0,1]")


def _parse_scalar(raw: str, line_no: int):
    raw = raw.strip()
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def parse_lines(lines) -> dict:
    """Raw dotted keys to parsed values, with line numbers for errors."""
    values: dict[str, tuple[object, int]] = {}
    for line_no, line in enumerate(lines, start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ValidationError(f"line {line_no}: expected 'key = value', got {body!r}")
        key, _, raw = body.partition("=")
        key = key.strip()
        raw = raw.strip()
        if not key or not raw:
            raise ValidationError(f"line {line_no}: expected 'key = value', got {body!r}")
        if key in values:
            raise ValidationError(f"line {line_no}: duplicate key {key!r}")
        if "," in raw:
            value = tuple(_parse_scalar(part, line_no) for part in raw.split(","))
        else:
            value = _parse_scalar(raw, line_no)
        values[key] = (value, line_no)
    return values


class _KeyReader:
    def __init__(self, values: dict):
        self.values = values
        self.used = set()

    def has(self, key: str) -> bool:
        return key in self.values

    def get(self, key: str, kind: str, default=None):
        if key not in self.values:
            if default is not None or kind.endswith("?"):
                return default
            raise ValidationError(f"missing required scenario key {key!r}")
        self.used.add(key)
        value, line_no = self.values[key]
        kind = kind.rstrip("?")
        try:
            if kind == "int":
                if not isinstance(value, int):
                    raise ValueError
                return value
            if kind == "float":
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ValueError
                return float(value)
            if kind == "str":
                return str(value)
            if kind == "int_list":
                items = value if isinstance(value, tuple) else (value,)
                if not all(isinstance(v, int) for v in items):
                    raise ValueError
                return tuple(items)
            if kind == "float_list":
                items = value if isinstance(value, tuple) else (value,)
                if not all(isinstance(v, (int, float)) for v in items):
                    raise ValueError
                return tuple(float(v) for v in items)
        except ValueError:
            raise ValidationError(f"line {line_no}: key {key!r} is not a {kind}") from None
        raise ValidationError(f"internal: unknown kind {kind!r}")

    def unknown_keys(self) -> list[tuple[str, int]]:
        return [(k, ln) for k, (_, ln) in self.values.items() if k not in self.used]


def _read_train_spec(reader: _KeyReader, prefix: str, base: TrainSpec) -> TrainSpec:
    return TrainSpec(
        n=reader.get(f"{prefix}.n", "int", base.n),
        learning_rate=reader.get(f"{prefix}.learning_rate", "float", base.learning_rate),
        epochs=reader.get(f"{prefix}.epochs", "int", base.epochs),
        l2=reader.get(f"{prefix}.l2", "float", base.l2),
        seed_offset=reader.get(f"{prefix}.seed_offset", "int", base.seed_offset),
    )


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    values = parse_lines(text.splitlines())
    reader = _KeyReader(values)

    n_features = reader.get("n_features", "int")
    class_count = reader.get("class_count", "int")
    if class_count < 2:
        raise ValidationError("class_count must be >= 2")

    means, covs = [], []
    for k in range(class_count):
        mean = reader.get(f"class.{k}.mean", "float_list")
        if len(mean) != n_features:
            raise ValidationError(f"class.{k}.mean needs {n_features} entries, got {len(mean)}")
        cov = reader.get(f"class.{k}.cov", "float_list", tuple([1.0] * n_features))
        if len(cov) != n_features:
            raise ValidationError(f"class.{k}.cov needs {n_features} entries, got {len(cov)}")
        means.append(mean)
        covs.append(cov)

    mix = reader.get("mix", "float_list", tuple([1.0 / class_count] * class_count))

    drift = []
    i = 0
    while reader.has(f"drift.{i}.kind") or reader.has(f"drift.{i}.onset_tick"):
        drift.append(
            DriftSpec(
                onset_tick=reader.get(f"drift.{i}.onset_tick", "int"),
                kind=reader.get(f"drift.{i}.kind", "str"),
                features=reader.get(f"drift.{i}.features", "int_list", ()),
                magnitude=reader.get(f"drift.{i}.magnitude", "float", 0.0),
                mix=reader.get(f"drift.{i}.mix", "float_list", ()),
                angle=reader.get(f"drift.{i}.angle", "float", 0.0),
            )
        )
        i += 1

    kpi = None
    if reader.has("kpi.name"):
        link = None
        if reader.has("kpi.link.metric"):
            link = KpiLink(
                metric=reader.get("kpi.link.metric", "str"),
                threshold=reader.get("kpi.link.threshold", "float"),
                degraded_rate=reader.get("kpi.link.degraded_rate", "float"),
                direction=reader.get("kpi.link.direction", "str", "below"),
            )
        kpi = KpiRule(
            name=reader.get("kpi.name", "str"),
            type=reader.get("kpi.type", "str", "binary"),
            base_rate=reader.get("kpi.base_rate", "float", 0.9),
            link=link,
        )

    train = _read_train_spec(reader, "train", TrainSpec())
    challenger = None
    if any(k.startswith("challenger.") for k in values):
        challenger = _read_train_spec(
            reader, "challenger", TrainSpec(n=train.n, seed_offset=1)
        )

    pipeline = {
        "theta_gate": reader.get("pipeline.theta_gate", "float", 0.7),
        "n_min": reader.get("pipeline.n_min", "int", 100),
        "theta_acc": reader.get("pipeline.theta_acc", "float", 0.05),
        "theta_kpi": reader.get("pipeline.theta_kpi", "float", 0.05),
        "theta_psi": reader.get("pipeline.theta_psi", "float", 0.2),
        "theta_tv": reader.get("pipeline.theta_tv", "float", 0.1),
        "predictor": reader.get("pipeline.predictor", "str", "meta"),
        "reward": reader.get("pipeline.reward", "str", ""),
        "bandit_n_min": reader.get("pipeline.bandit.n_min", "int", 100),
        "bandit_delta": reader.get("pipeline.bandit.delta", "float", 0.05),
        "bandit_p_decide": reader.get("pipeline.bandit.p_decide", "float", 0.95),
    }
    if pipeline["predictor"] not in PREDICTOR_METHODS:
        raise ValidationError(f"pipeline.predictor must be one of {PREDICTOR_METHODS}")

    scenario = Scenario(
        name=reader.get("name", "str", name),
        seed=reader.get("seed", "int"),
        n_features=n_features,
        class_count=class_count,
        ticks_total=reader.get("ticks_total", "int"),
        window_size=reader.get("window_size", "int"),
        class_means=np.array(means, dtype=float),
        class_covs=np.array(covs, dtype=float),
        mix=mix,
        label_features=reader.get("label_rule.features", "int_list"),
        sharpness=reader.get("label_rule.sharpness", "float", 1.0),
        rows_per_tick=reader.get("rows_per_tick", "int", 1),
        drift=drift,
        kpi=kpi,
        train=train,
        test_n=reader.get("test.n", "int", 1000),
        challenger=challenger,
        pipeline=pipeline,
    )

    unknown = reader.unknown_keys()
    if unknown:
        key, line_no = unknown[0]
        raise ValidationError(f"line {line_no}: unknown scenario key {key!r}")
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read scenario file {path}: {exc}") from exc
    return parse_scenario(text, name=path.stem)
