"""Batch accuracy prediction on unlabeled traffic.

Two interchangeable backends estimate a model's accuracy on a batch with
no labels: the mean of calibrated per-row confidences, and a meta-model (a
binary logistic model over per-row uncertainty features) predicting whether
each base prediction is correct. Both report a percentile-bootstrap
interval so downstream gate and rollback thresholds can be risk-aware.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import calibration
from .errors import DegenerateLabelsError, ProvenanceError, ValidationError
from .models import ClassifierModel, Dataset, TrainConfig, train_classifier

META_FEATURE_NAMES = ("top_prob", "margin", "entropy", "mean_feature_distance")
MAGIC = b"MGPP1"


@dataclass(frozen=True)
class MetaFeatureVector:
    """Per-prediction uncertainty signals: confidence, ambiguity, novelty."""

    top_prob: float
    margin: float
    entropy: float
    mean_feature_distance: float

    def __post_init__(self):
        if not 0.0 <= self.top_prob <= 1.0:
            raise ValidationError("top_prob outside [0,1]")
        if not 0.0 <= self.margin <= 1.0:
            raise ValidationError("margin outside [0,1]")
        if self.entropy < 0.0:
            raise ValidationError("entropy must be >= 0")
        if self.mean_feature_distance < 0.0:
            raise ValidationError("mean_feature_distance must be >= 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.top_prob, self.margin, self.entropy, self.mean_feature_distance])

    def to_dict(self) -> dict[str, float]:
        return {
            "top_prob": self.top_prob,
            "margin": self.margin,
            "entropy": self.entropy,
            "mean_feature_distance": self.mean_feature_distance,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MetaFeatureVector":
        return cls(**{k: float(payload[k]) for k in META_FEATURE_NAMES})


@dataclass(frozen=True)
class PredictedAccuracy:
    point: float
    interval_low: float
    interval_high: float
    n: int
    method: str  # "calibrated_mean" | "meta_model"

    def __post_init__(self):
        if not (0.0 <= self.interval_low <= self.point <= self.interval_high <= 1.0):
            raise ValidationError("accuracy interval must satisfy 0 <= low <= point <= high <= 1")
        if self.n < 1:
            raise ValidationError("batch size must be >= 1")

    def to_dict(self) -> dict:
        return {
            "point": self.point,
            "interval_low": self.interval_low,
            "interval_high": self.interval_high,
            "n": self.n,
            "method": self.method,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PredictedAccuracy":
        return cls(
            point=payload["point"],
            interval_low=payload["interval_low"],
            interval_high=payload["interval_high"],
            n=payload["n"],
            method=payload["method"],
        )


@dataclass
class MetaModel:
    """Binary correctness predictor over MetaFeatureVector inputs."""

    classifier: ClassifierModel  # 2 classes: incorrect / correct
    base_model_id: str
    test_fingerprint: str


def meta_features_batch(model: ClassifierModel, features: np.ndarray) -> np.ndarray:
    """n x 4 matrix of meta features, column order per META_FEATURE_NAMES."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    probs = model.predict_proba_batch(features)
    part = np.sort(probs, axis=1)
    top = part[:, -1]
    second = part[:, -2] if probs.shape[1] > 1 else np.zeros(len(probs))
    ent = -np.sum(np.where(probs > 0, probs * np.log(np.clip(probs, 1e-300, None)), 0.0), axis=1)
    ent = np.maximum(ent, 0.0)
    dist = np.linalg.norm(model.standardize(features), axis=1)
    return np.column_stack([top, top - second, ent, dist])


def extract_meta_features(model: ClassifierModel, features: np.ndarray) -> MetaFeatureVector:
    row = meta_features_batch(model, np.asarray(features, dtype=float)[None, :])[0]
    return MetaFeatureVector(
        top_prob=float(row[0]),
        margin=float(row[1]),
        entropy=float(row[2]),
        mean_feature_distance=float(row[3]),
    )


def bootstrap_interval(
    values: np.ndarray, n_boot: int = 1000, seed: int = 0
) -> tuple[float, float]:
    """Seeded percentile bootstrap (2.5/97.5) of the mean of ``values``."""
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        raise ValidationError("values must be nonempty")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(values), size=(n_boot, len(values)))
    means = values[idx].mean(axis=1)
    low, high = np.percentile(means, [2.5, 97.5])
    return float(low), float(high)


def _as_predicted(values: np.ndarray, method: str, n_boot: int, seed: int) -> PredictedAccuracy:
    point = float(np.mean(values))
    low, high = bootstrap_interval(values, n_boot=n_boot, seed=seed)
    low = min(max(low, 0.0), point)
    high = max(min(high, 1.0), point)
    return PredictedAccuracy(
        point=point, interval_low=low, interval_high=high, n=len(values), method=method
    )


def predict_accuracy_calibrated(
    calibrator: calibration.Calibrator,
    confidences: list[float] | np.ndarray,
    n_boot: int = 1000,
    seed: int = 0,
    already_calibrated: bool = False,
) -> PredictedAccuracy:
    """Mean of calibrated confidences with a bootstrap interval."""
    confidences = np.asarray(confidences, dtype=float)
    if confidences.size == 0:
        raise ValidationError("cannot predict accuracy of an empty batch")
    calibrated = confidences if already_calibrated else calibration.apply_batch(calibrator, confidences)
    return _as_predicted(calibrated, "calibrated_mean", n_boot, seed)


def dataset_fingerprint(data: Dataset) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(data.features).tobytes())
    if data.labels is not None:
        h.update(np.ascontiguousarray(data.labels).tobytes())
    return h.hexdigest()[:16]


def train_meta_model(
    model: ClassifierModel,
    test: Dataset,
    config: TrainConfig | None = None,
) -> MetaModel:
    """Fit the correctness predictor on a scored, labeled test set."""
    if test.labels is None:
        raise ValidationError("meta-model training requires a labeled test set")
    if test.n_rows < 2:
        raise ValidationError("meta-model training requires at least 2 rows")
    correct = (model.predict_labels(test.features) == test.labels).astype(int)
    if correct.min() == correct.max():
        raise DegenerateLabelsError(
            "base model is uniformly correct or incorrect on the test set; "
            "use the calibrated_mean predictor instead"
        )
    meta_x = meta_features_batch(model, test.features)
    meta_train = Dataset(features=meta_x, labels=correct, class_count=2)
    config = config or TrainConfig(learning_rate=0.2, epochs=400, l2=1e-3, seed=0)
    clf = train_classifier(meta_train, config, model_id=f"meta:{model.model_id}")
    return MetaModel(
        classifier=clf,
        base_model_id=model.model_id,
        test_fingerprint=dataset_fingerprint(test),
    )


def row_correctness_proba(
    meta: MetaModel, features: np.ndarray, base_model: ClassifierModel
) -> np.ndarray:
    """Per-row probability that the base model's prediction is correct."""
    if meta.base_model_id != base_model.model_id:
        raise ProvenanceError(
            f"meta-model was trained for {meta.base_model_id!r}, got {base_model.model_id!r}"
        )
    meta_x = meta_features_batch(base_model, features)
    return meta.classifier.predict_proba_batch(meta_x)[:, 1]


def predict_accuracy_meta(
    meta: MetaModel,
    features: np.ndarray,
    base_model: ClassifierModel,
    n_boot: int = 1000,
    seed: int = 0,
) -> PredictedAccuracy:
    features = np.atleast_2d(np.asarray(features, dtype=float))
    if features.shape[0] == 0:
        raise ValidationError("cannot predict accuracy of an empty batch")
    probs = row_correctness_proba(meta, features, base_model)
    return _as_predicted(probs, "meta_model", n_boot, seed)


class CalibratedMeanPredictor:
    """Batch-accuracy predictor backed by a fitted calibrator."""

    method = "calibrated_mean"

    def __init__(self, base_model, calibrator, n_boot: int = 1000, seed: int = 0):
        self.base_model = base_model
        self.calibrator = calibrator
        self.n_boot = n_boot
        self.seed = seed

    def predict(self, features: np.ndarray, seed: int | None = None) -> PredictedAccuracy:
        return predict_accuracy_calibrated(
            self.calibrator,
            self.row_scores(features),
            n_boot=self.n_boot,
            seed=self.seed if seed is None else seed,
            already_calibrated=True,
        )

    def row_scores(self, features: np.ndarray) -> np.ndarray:
        """Calibrated per-row probability that the base model's prediction is right."""
        from .calibration import apply_batch

        conf = self.base_model.predict_proba_batch(features).max(axis=1)
        return apply_batch(self.calibrator, conf)


class MetaModelPredictor:
    """Batch-accuracy predictor backed by a trained meta-model."""

    method = "meta_model"

    def __init__(self, base_model, meta: MetaModel, n_boot: int = 1000, seed: int = 0):
        self.base_model = base_model
        self.meta = meta
        self.n_boot = n_boot
        self.seed = seed

    def predict(self, features: np.ndarray, seed: int | None = None) -> PredictedAccuracy:
        return predict_accuracy_meta(
            self.meta,
            features,
            self.base_model,
            n_boot=self.n_boot,
            seed=self.seed if seed is None else seed,
        )

    def row_scores(self, features: np.ndarray) -> np.ndarray:
        """Per-row probability that the base model's prediction is right."""
        return row_correctness_proba(self.meta, features, self.base_model)


def evaluate_predictor(predictor, batches: list[tuple[np.ndarray, np.ndarray]]) -> dict:
    """Compare predicted batch accuracy against labeled ground truth.

    ``batches`` holds (features, labels) pairs; actual accuracy comes from
    the predictor's base model scored against the labels.
    """
    per_batch: list[tuple[float, float]] = []
    for features, labels in batches:
        features = np.atleast_2d(np.asarray(features, dtype=float))
        labels = np.asarray(labels, dtype=int)
        if features.shape[0] == 0:
            raise ValidationError("batches must be nonempty")
        predicted = predictor.predict(features)
        actual = float(np.mean(predictor.base_model.predict_labels(features) == labels))
        per_batch.append((predicted.point, actual))
    mae = float(np.mean([abs(p - a) for p, a in per_batch]))
    return {"mae": mae, "per_batch": per_batch}


def save_meta_model(meta: MetaModel, path: str | Path) -> None:
    """Single-file binary artifact: MGPP1 magic, little-endian float64 fields."""
    clf = meta.classifier
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<B", 1)  # format version
    for text in (meta.base_model_id, meta.test_fingerprint):
        raw = text.encode("utf-8")
        buf += struct.pack("<H", len(raw)) + raw
    buf += struct.pack("<I", clf.feature_count)
    for arr in (clf.weights, clf.intercepts, clf.feature_means, clf.feature_stds):
        flat = np.ascontiguousarray(arr, dtype="<f8").ravel()
        buf += struct.pack("<I", flat.size)
        buf += flat.tobytes()
    Path(path).write_bytes(bytes(buf))


def load_meta_model(path: str | Path) -> MetaModel:
    raw = Path(path).read_bytes()
    if raw[:5] != MAGIC:
        raise ValidationError(f"{path}: not a meta-model artifact (bad magic)")
    off = 5
    (version,) = struct.unpack_from("<B", raw, off)
    off += 1
    if version != 1:
        raise ValidationError(f"{path}: unsupported artifact version {version}")

    def read_str(off):
        (n,) = struct.unpack_from("<H", raw, off)
        off += 2
        return raw[off : off + n].decode("utf-8"), off + n

    base_model_id, off = read_str(off)
    fingerprint, off = read_str(off)
    (feature_count,) = struct.unpack_from("<I", raw, off)
    off += 4

    arrays = []
    for _ in range(4):
        (size,) = struct.unpack_from("<I", raw, off)
        off += 4
        arrays.append(np.frombuffer(raw, dtype="<f8", count=size, offset=off).copy())
        off += size * 8
    weights, intercepts, means, stds = arrays
    clf = ClassifierModel(
        model_id=f"meta:{base_model_id}",
        weights=weights.reshape(2, feature_count),
        intercepts=intercepts,
        feature_means=means,
        feature_stds=stds,
        class_count=2,
        feature_count=feature_count,
    )
    return MetaModel(classifier=clf, base_model_id=base_model_id, test_fingerprint=fingerprint)
