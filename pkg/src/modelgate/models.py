"""Reference classifiers: multinomial logistic regression trained in-repo.

The deployed model is deliberately small and fully deterministic: full-batch
gradient descent from a zero initialization, with feature standardization
(train-set mean/variance) stored inside the model so covariate shift in raw
feature scales is handled by the model itself, not by callers.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError


@dataclass
class Dataset:
    """Feature matrix plus optional class labels."""

    features: np.ndarray
    labels: np.ndarray | None
    class_count: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValidationError("features must be a nonempty 2-D matrix")
        if not np.all(np.isfinite(self.features)):
            raise ValidationError("features contain non-finite values")
        if self.class_count < 1:
            raise ValidationError("class_count must be positive")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (self.features.shape[0],):
                raise ValidationError("labels length must match feature rows")
            if self.labels.min() < 0 or self.labels.max() >= self.class_count:
                raise ValidationError("label values must lie in [0, class_count)")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 300
    l2: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.l2 < 0:
            raise ValidationError("l2 must be >= 0")


@dataclass
class ClassifierModel:
    """Linear softmax classifier with built-in standardization.

    ``weights`` is class_count x feature_count, applied to standardized
    inputs; ties in the predicted label break toward the lowest class index.
    """

    model_id: str
    weights: np.ndarray
    intercepts: np.ndarray
    feature_means: np.ndarray
    feature_stds: np.ndarray
    class_count: int
    feature_count: int
    loss_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.intercepts = np.asarray(self.intercepts, dtype=float)
        self.feature_means = np.asarray(self.feature_means, dtype=float)
        self.feature_stds = np.asarray(self.feature_stds, dtype=float)
        if self.weights.shape != (self.class_count, self.feature_count):
            raise ValidationError("weight shape must be class_count x feature_count")
        if self.intercepts.shape != (self.class_count,):
            raise ValidationError("intercepts length must equal class_count")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.intercepts))):
            raise ValidationError("model parameters must be finite")

    def standardize(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=float) - self.feature_means) / self.feature_stds

    def predict_proba_batch(self, features: np.ndarray) -> np.ndarray:
        """Softmax class probabilities for a batch, rows summing to 1."""
        features = np.atleast_2d(np.asarray(features, dtype=float))
        if features.shape[1] != self.feature_count:
            raise ValidationError(
                f"feature dimension {features.shape[1]} does not match model ({self.feature_count})"
            )
        logits = self.standardize(features) @ self.weights.T + self.intercepts
        logits -= logits.max(axis=1, keepdims=True)
        exp = np.exp(logits)
        return exp / exp.sum(axis=1, keepdims=True)

    def predict_labels(self, features: np.ndarray) -> np.ndarray:
        # np.argmax returns the first maximum: ties go to the lowest class.
        return np.argmax(self.predict_proba_batch(features), axis=1)


def predict_proba(model: ClassifierModel, features: np.ndarray) -> np.ndarray:
    """Class probabilities for a single feature row."""
    features = np.asarray(features, dtype=float)
    if features.ndim != 1:
        raise ValidationError("predict_proba expects a single feature row")
    return model.predict_proba_batch(features[None, :])[0]


def softmax_nll_and_grad(
    weights: np.ndarray,
    intercepts: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy loss plus L2 penalty on weights, with gradients.

    Inputs are assumed already standardized; the intercepts are not
    penalized. Exposed separately so the analytic gradient can be checked
    against finite differences.
    """
    n, _ = features.shape
    logits = features @ weights.T + intercepts
    logits -= logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    probs = exp / exp.sum(axis=1, keepdims=True)
    eps = 1e-12
    nll = -np.mean(np.log(probs[np.arange(n), labels] + eps))
    loss = nll + 0.5 * l2 * float(np.sum(weights**2))

    onehot = np.zeros_like(probs)
    onehot[np.arange(n), labels] = 1.0
    diff = probs - onehot
    grad_w = diff.T @ features / n + l2 * weights
    grad_b = diff.mean(axis=0)
    return float(loss), grad_w, grad_b


def train_classifier(
    train: Dataset,
    config: TrainConfig | None = None,
    model_id: str = "model",
) -> ClassifierModel:
    """Fit a multinomial logistic model by full-batch gradient descent.

    Zero-initialized, so ``epochs=0`` returns an all-zero (uniform) model.
    Fully deterministic; the seed exists for interface symmetry with the
    stochastic trainers this one may replace.
    """
    config = config or TrainConfig()
    if train.labels is None:
        raise ValidationError("training requires a labeled dataset")

    means = train.features.mean(axis=0)
    stds = train.features.std(axis=0)
    stds = np.where(stds < 1e-12, 1.0, stds)
    x = (train.features - means) / stds
    y = train.labels

    k, d = train.class_count, train.n_features
    weights = np.zeros((k, d))
    intercepts = np.zeros(k)
    history: list[float] = []
    for _ in range(config.epochs):
        loss, grad_w, grad_b = softmax_nll_and_grad(weights, intercepts, x, y, config.l2)
        history.append(loss)
        weights -= config.learning_rate * grad_w
        intercepts -= config.learning_rate * grad_b

    return ClassifierModel(
        model_id=model_id,
        weights=weights,
        intercepts=intercepts,
        feature_means=means,
        feature_stds=stds,
        class_count=k,
        feature_count=d,
        loss_history=history,
    )


def accuracy(model: ClassifierModel, data: Dataset) -> float:
    """Fraction of rows whose argmax prediction equals the label."""
    if data.labels is None:
        raise ValidationError("accuracy requires labels")
    return float(np.mean(model.predict_labels(data.features) == data.labels))


@dataclass(frozen=True)
class ExternalScore:
    row_id: str
    probabilities: np.ndarray
    label: int | None


def load_external_scores(path: str | Path) -> list[ExternalScore]:
    """Parse a header-less ``row_id,p_0,...,p_{k-1}[,label]`` score file.

    A trailing integer-looking token is read as a label; probability rows
    must sum to 1 within 1e-6 or the offending line is reported.
    """
    rows: list[ExternalScore] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split(",")
            if fields and fields[-1] == "":  # trailing comma: no label column
                fields = fields[:-1]
            if len(fields) < 2:
                raise ValidationError(f"line {lineno}: expected row_id plus probabilities")
            row_id, rest = fields[0], fields[1:]

            label: int | None = None
            prob_fields = rest
            if len(rest) >= 2 and _looks_like_int(rest[-1]):
                label = int(rest[-1])
                prob_fields = rest[:-1]
            try:
                probs = np.array([float(v) for v in prob_fields])
            except ValueError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from exc
            if np.any(probs < 0) or np.any(probs > 1):
                raise ValidationError(f"line {lineno}: probability outside [0,1]")
            total = float(probs.sum())
            if abs(total - 1.0) > 1e-6:
                raise ValidationError(f"line {lineno}: probabilities sum to {total:g}, not 1")
            rows.append(ExternalScore(row_id=row_id, probabilities=probs, label=label))
    return rows


def _looks_like_int(token: str) -> bool:
    token = token.strip()
    return token.isdigit() or (token.startswith("-") and token[1:].isdigit())


def load_dataset_csv(path: str | Path, class_count: int | None = None) -> Dataset:
    """Load a comma-separated dataset with a header row.

    A column named ``label`` (any position) becomes the labels; remaining
    columns are features in file order.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValidationError(f"{path}: empty dataset file")
        label_idx = header.index("label") if "label" in header else None
        feats: list[list[float]] = []
        labels: list[int] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if label_idx is not None:
                    labels.append(int(float(row[label_idx])))
                    feats.append([float(v) for i, v in enumerate(row) if i != label_idx])
                else:
                    feats.append([float(v) for v in row])
            except (ValueError, IndexError) as exc:
                raise ValidationError(f"{path} line {lineno}: {exc}") from exc
    if not feats:
        raise ValidationError(f"{path}: no data rows")
    label_arr = np.array(labels) if label_idx is not None else None
    if class_count is None:
        class_count = int(label_arr.max()) + 1 if label_arr is not None else 2
    return Dataset(features=np.array(feats), labels=label_arr, class_count=class_count)


def save_dataset_csv(data: Dataset, path: str | Path) -> None:
    cols = [f"f{i}" for i in range(data.n_features)]
    if data.labels is not None:
        cols.append("label")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for i in range(data.n_rows):
            row = [repr(float(v)) for v in data.features[i]]
            if data.labels is not None:
                row.append(str(int(data.labels[i])))
            writer.writerow(row)


def save_model(model: ClassifierModel, path: str | Path) -> None:
    payload = {
        "model_id": model.model_id,
        "weights": model.weights.tolist(),
        "intercepts": model.intercepts.tolist(),
        "feature_means": model.feature_means.tolist(),
        "feature_stds": model.feature_stds.tolist(),
        "class_count": model.class_count,
        "feature_count": model.feature_count,
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1), encoding="utf-8")


def load_model(path: str | Path) -> ClassifierModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return ClassifierModel(
        model_id=payload["model_id"],
        weights=np.array(payload["weights"]),
        intercepts=np.array(payload["intercepts"]),
        feature_means=np.array(payload["feature_means"]),
        feature_stds=np.array(payload["feature_stds"]),
        class_count=payload["class_count"],
        feature_count=payload["feature_count"],
    )
