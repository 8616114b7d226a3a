"""Confidence calibration: Platt scaling and histogram binning.

Both calibrators map a top-class probability to an estimate of the
empirical correctness rate at that confidence level. The Platt slope is
clamped at zero so calibrated output is always nondecreasing in the raw
confidence; an anti-correlated confidence signal flattens out instead of
being silently inverted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateLabelsError, ValidationError

CONF_CLIP = 1e-6


@dataclass(frozen=True)
class CorrectnessSample:
    confidence: float
    correct: bool

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(f"confidence {self.confidence} outside [0,1]")


@dataclass
class Calibrator:
    """Fitted calibration map; ``kind`` selects which fields apply."""

    kind: str  # "platt" | "histogram_binning"
    a: float = 1.0
    b: float = 0.0
    n_bins: int = 0
    bin_values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("platt", "histogram_binning"):
            raise ValidationError(f"unknown calibrator kind {self.kind!r}")
        if self.kind == "platt" and self.a < 0:
            raise ValidationError("platt slope must be >= 0")
        if self.kind == "histogram_binning":
            self.bin_values = np.asarray(self.bin_values, dtype=float)
            if self.bin_values.shape != (self.n_bins,):
                raise ValidationError("bin_values length must equal n_bins")
            if np.any(self.bin_values < 0) or np.any(self.bin_values > 1):
                raise ValidationError("bin values must lie in [0,1]")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "platt":
            out.update(a=self.a, b=self.b)
        else:
            out.update(n_bins=self.n_bins, bin_values=self.bin_values.tolist())
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "Calibrator":
        if payload["kind"] == "platt":
            return cls(kind="platt", a=payload["a"], b=payload["b"])
        return cls(
            kind="histogram_binning",
            n_bins=payload["n_bins"],
            bin_values=np.array(payload["bin_values"]),
        )


def _logit(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, CONF_CLIP, 1.0 - CONF_CLIP)
    return np.log(p / (1.0 - p))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def _check_samples(samples: list[CorrectnessSample]) -> tuple[np.ndarray, np.ndarray]:
    if not samples:
        raise ValidationError("at least one sample required")
    conf = np.array([s.confidence for s in samples])
    correct = np.array([1.0 if s.correct else 0.0 for s in samples])
    return conf, correct


def fit_platt(samples: list[CorrectnessSample]) -> Calibrator:
    """Logistic fit of correctness on logit(confidence), slope clamped >= 0."""
    conf, correct = _check_samples(samples)
    if len(samples) < 2:
        raise ValidationError("platt fit requires at least 2 samples")
    if correct.min() == correct.max():
        raise DegenerateLabelsError(
            "all samples are correct or all incorrect; platt fit is undefined"
        )
    z = _logit(conf)

    def nll(params):
        a, b = params
        p = np.clip(_sigmoid(a * z + b), 1e-12, 1 - 1e-12)
        loss = -np.mean(correct * np.log(p) + (1 - correct) * np.log(1 - p))
        resid = p - correct
        grad_a = np.mean(resid * z)
        grad_b = np.mean(resid)
        return loss, np.array([grad_a, grad_b])

    result = minimize(
        nll,
        x0=np.array([1.0, 0.0]),
        jac=True,
        method="L-BFGS-B",
        bounds=[(0.0, None), (None, None)],
        options={"maxiter": 200, "ftol": 1e-12},
    )
    a, b = result.x
    return Calibrator(kind="platt", a=max(float(a), 0.0), b=float(b))


def fit_histogram_binning(samples: list[CorrectnessSample], n_bins: int) -> Calibrator:
    """Equal-width bins over [0,1]; empty bins fall back to their midpoint."""
    if n_bins < 1:
        raise ValidationError("n_bins must be >= 1")
    conf, correct = _check_samples(samples)
    idx = _bin_index(conf, n_bins)
    values = np.empty(n_bins)
    for b in range(n_bins):
        mask = idx == b
        values[b] = correct[mask].mean() if mask.any() else (b + 0.5) / n_bins
    return Calibrator(kind="histogram_binning", n_bins=n_bins, bin_values=values)


def _bin_index(conf: np.ndarray, n_bins: int) -> np.ndarray:
    # confidence 1.0 belongs to the last bin
    return np.minimum((conf * n_bins).astype(int), n_bins - 1)


def apply(calibrator: Calibrator, confidence: float) -> float:
    if not 0.0 <= confidence <= 1.0:
        raise ValidationError(f"confidence {confidence} outside [0,1]")
    return float(apply_batch(calibrator, np.array([confidence]))[0])


def apply_batch(calibrator: Calibrator, confidences: np.ndarray) -> np.ndarray:
    confidences = np.asarray(confidences, dtype=float)
    if np.any(confidences < 0) or np.any(confidences > 1):
        raise ValidationError("confidence outside [0,1]")
    if calibrator.kind == "platt":
        out = _sigmoid(calibrator.a * _logit(confidences) + calibrator.b)
    else:
        out = calibrator.bin_values[_bin_index(confidences, calibrator.n_bins)]
    return np.clip(out, 0.0, 1.0)


def calibration_metrics(samples: list[CorrectnessSample], n_bins: int = 10) -> dict[str, float]:
    """Expected calibration error (equal-width bins) and Brier score."""
    conf, correct = _check_samples(samples)
    n = len(conf)
    idx = _bin_index(conf, n_bins)
    ece = 0.0
    for b in range(n_bins):
        mask = idx == b
        if not mask.any():
            continue
        ece += (mask.sum() / n) * abs(conf[mask].mean() - correct[mask].mean())
    brier = float(np.mean((conf - correct) ** 2))
    return {"ece": float(ece), "brier": brier}


def correctness_samples(model, data) -> list[CorrectnessSample]:
    """Score a labeled dataset into (top-class confidence, correct) pairs."""
    if data.labels is None:
        raise ValidationError("correctness samples require labels")
    probs = model.predict_proba_batch(data.features)
    top = probs.max(axis=1)
    pred = probs.argmax(axis=1)
    return [
        CorrectnessSample(confidence=float(t), correct=bool(p == y))
        for t, p, y in zip(top, pred, data.labels)
    ]
