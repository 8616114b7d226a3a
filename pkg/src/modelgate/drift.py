"""Drift detection that alerts only when performance or KPIs are impacted.

Feature drift (PSI per input feature) and prior shift (total variation on the
predicted-class mix) are measured but never alert by themselves; they ride
along as annotations. An alert fires only when the predicted accuracy drops
decisively below the reference, or a KPI mean falls, because neither covariate
shift nor prior shift by itself implies the model got worse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .events import Window, ScoredEvent
from .perf import PredictedAccuracy

PSI_FLOOR = 1e-6
N_BINS = 10  # interior bins; two overflow bins are added around them


@dataclass(frozen=True)
class FeatureHistogram:
    """Mass histogram with fixed edges; first/last bins catch overflow."""

    edges: tuple[float, ...]  # interior edges, len N_BINS + 1
    mass: tuple[float, ...]  # len N_BINS + 2, sums to 1

    def __post_init__(self):
        # interior bins = len(edges) - 1, plus 2 overflow bins
        if len(self.mass) != len(self.edges) + 1:
            raise ValidationError(
                f"histogram has {len(self.mass)} masses for {len(self.edges)} edges"
            )
        total = sum(self.mass)
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"histogram mass sums to {total!r}, not 1")


def feature_edges(train_column: np.ndarray, n_bins: int = N_BINS) -> tuple[float, ...]:
    lo = float(np.min(train_column))
    hi = float(np.max(train_column))
    if hi <= lo:
        hi = lo + 1.0  # constant feature still gets a usable axis
    return tuple(np.linspace(lo, hi, n_bins + 1).tolist())


def histogram_mass(values: np.ndarray, edges: Sequence[float]) -> tuple[float, ...]:
    """Counts into interior bins plus underflow/overflow, normalized to 1."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValidationError("cannot histogram an empty sample")
    bins = np.concatenate([[-np.inf], np.asarray(edges, dtype=float), [np.inf]])
    counts, _ = np.histogram(values, bins=bins)
    return tuple((counts / values.size).tolist())


def _floored(mass: np.ndarray) -> np.ndarray:
    floored = np.maximum(np.asarray(mass, dtype=float), PSI_FLOOR)
    return floored / floored.sum()


def psi(reference, current) -> float:
    """Population stability index, zero-mass bins floored at 1e-6 then renormalized."""
    if isinstance(reference, FeatureHistogram) and isinstance(current, FeatureHistogram):
        if reference.edges != current.edges:
            raise ValidationError("histogram edges differ between reference and current")
        ref_mass, cur_mass = np.array(reference.mass), np.array(current.mass)
    else:
        ref_mass = np.asarray(reference, dtype=float)
        cur_mass = np.asarray(current, dtype=float)
        if ref_mass.shape != cur_mass.shape:
            raise ValidationError("histograms have different bin counts")
    r = _floored(ref_mass)
    c = _floored(cur_mass)
    return float(np.sum((c - r) * np.log(c / r)))


def ks_statistic(sample_a: Sequence[float], sample_b: Sequence[float]) -> float:
    """Sup-norm distance between the two empirical CDFs."""
    a = np.sort(np.asarray(sample_a, dtype=float))
    b = np.sort(np.asarray(sample_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValidationError("ks_statistic requires nonempty samples")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def prior_shift_tv(reference_dist: Sequence[float], current_dist: Sequence[float]) -> float:
    r = np.asarray(reference_dist, dtype=float)
    c = np.asarray(current_dist, dtype=float)
    if r.shape != c.shape:
        raise ValidationError("class distributions have different lengths")
    for name, vec in (("reference", r), ("current", c)):
        if np.any(vec < -1e-12) or abs(vec.sum() - 1.0) > 1e-6:
            raise ValidationError(f"{name} distribution is not a probability vector")
    return float(0.5 * np.sum(np.abs(r - c)))


@dataclass
class MonitorThresholds:
    n_min: int = 100
    theta_psi: float = 0.2
    theta_tv: float = 0.1
    theta_acc: float = 0.05
    theta_kpi: float = 0.05

    def to_dict(self) -> dict:
        return {
            "n_min": self.n_min,
            "theta_psi": self.theta_psi,
            "theta_tv": self.theta_tv,
            "theta_acc": self.theta_acc,
            "theta_kpi": self.theta_kpi,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MonitorThresholds":
        return cls(**payload)


@dataclass
class ReferenceProfile:
    """Baseline captured at gate time; every monitored window is judged against it."""

    feature_histograms: list[FeatureHistogram]
    class_distribution: tuple[float, ...]
    reference_accuracy: float
    kpi_means: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        total = sum(self.class_distribution)
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"class distribution sums to {total!r}, not 1")
        if not 0.0 <= self.reference_accuracy <= 1.0:
            raise ValidationError("reference accuracy must lie in [0,1]")

    def to_dict(self) -> dict:
        return {
            "feature_histograms": [
                {"edges": list(h.edges), "mass": list(h.mass)} for h in self.feature_histograms
            ],
            "class_distribution": list(self.class_distribution),
            "reference_accuracy": self.reference_accuracy,
            "kpi_means": dict(sorted(self.kpi_means.items())),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ReferenceProfile":
        return cls(
            feature_histograms=[
                FeatureHistogram(edges=tuple(h["edges"]), mass=tuple(h["mass"]))
                for h in payload["feature_histograms"]
            ],
            class_distribution=tuple(payload["class_distribution"]),
            reference_accuracy=float(payload["reference_accuracy"]),
            kpi_means={k: float(v) for k, v in payload["kpi_means"].items()},
        )


def build_reference_profile(
    train_features: np.ndarray,
    reference_features: np.ndarray,
    predicted_labels: np.ndarray,
    class_count: int,
    reference_accuracy: float,
    kpi_means: dict[str, float] | None = None,
) -> ReferenceProfile:
    """Edges come from the training set; masses from the reference window."""
    train_features = np.asarray(train_features, dtype=float)
    reference_features = np.asarray(reference_features, dtype=float)
    if train_features.shape[1] != reference_features.shape[1]:
        raise ValidationError("train and reference feature counts differ")
    histograms = []
    for d in range(train_features.shape[1]):
        edges = feature_edges(train_features[:, d])
        histograms.append(
            FeatureHistogram(edges=edges, mass=histogram_mass(reference_features[:, d], edges))
        )
    counts = np.bincount(np.asarray(predicted_labels, dtype=int), minlength=class_count)
    if counts.sum() == 0:
        raise ValidationError("reference window has no predictions")
    return ReferenceProfile(
        feature_histograms=histograms,
        class_distribution=tuple((counts / counts.sum()).tolist()),
        reference_accuracy=float(reference_accuracy),
        kpi_means=dict(kpi_means or {}),
    )


@dataclass
class DriftReport:
    window: Window
    feature_psi: dict[str, float]
    prior_tv: float
    predicted_accuracy: PredictedAccuracy
    kpi_deltas: dict[str, float]
    flags: dict[str, bool]
    thresholds: MonitorThresholds

    @property
    def max_psi(self) -> float:
        return max(self.feature_psi.values()) if self.feature_psi else 0.0

    def to_dict(self) -> dict:
        return {
            "window": self.window.to_dict(),
            "feature_psi": dict(sorted(self.feature_psi.items())),
            "prior_tv": self.prior_tv,
            "predicted_accuracy": self.predicted_accuracy.to_dict(),
            "kpi_deltas": dict(sorted(self.kpi_deltas.items())),
            "flags": dict(sorted(self.flags.items())),
            "thresholds": self.thresholds.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DriftReport":
        return cls(
            window=Window.from_dict(payload["window"]),
            feature_psi={k: float(v) for k, v in payload["feature_psi"].items()},
            prior_tv=float(payload["prior_tv"]),
            predicted_accuracy=PredictedAccuracy.from_dict(payload["predicted_accuracy"]),
            kpi_deltas={k: float(v) for k, v in payload["kpi_deltas"].items()},
            flags={k: bool(v) for k, v in payload["flags"].items()},
            thresholds=MonitorThresholds.from_dict(payload["thresholds"]),
        )


@dataclass
class Alert:
    id: str
    window: Window
    kind: str  # performance | kpi
    severity: str  # warning | critical
    evidence: DriftReport
    annotations: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not (self.evidence.flags.get("performance_drift") or self.evidence.flags.get("kpi_drop")):
            raise ValidationError("alerts require performance_drift or kpi_drop")
        if self.kind not in ("performance", "kpi"):
            raise ValidationError(f"unknown alert kind {self.kind!r}")
        if self.severity not in ("warning", "critical"):
            raise ValidationError(f"unknown severity {self.severity!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "window": self.window.to_dict(),
            "kind": self.kind,
            "severity": self.severity,
            "evidence": self.evidence.to_dict(),
            "annotations": list(self.annotations),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Alert":
        return cls(
            id=payload["id"],
            window=Window.from_dict(payload["window"]),
            kind=payload["kind"],
            severity=payload["severity"],
            evidence=DriftReport.from_dict(payload["evidence"]),
            annotations=list(payload.get("annotations", [])),
        )


@dataclass
class MonitorOutcome:
    window: Window
    report: DriftReport | None
    alert: Alert | None
    inconclusive_reason: str | None = None


def evaluate_window(
    profile: ReferenceProfile,
    window: Window,
    features: np.ndarray,
    events: list[ScoredEvent],
    kpi_means: dict[str, float],
    predictor,
    thresholds: MonitorThresholds,
    seed: int = 0,
) -> MonitorOutcome:
    """Score one production window against the reference profile.

    `features` are the raw inputs for the windowed events (row-aligned with
    `events`); `kpi_means` are the window's per-KPI means among joined
    transactions; `predictor` is a perf_predict predictor for the serving
    model. Fewer than n_min events yields an inconclusive outcome, no report.
    """
    n = len(events)
    if n < thresholds.n_min:
        return MonitorOutcome(
            window=window,
            report=None,
            alert=None,
            inconclusive_reason=f"window has {n} model events, below n_min={thresholds.n_min}",
        )
    features = np.asarray(features, dtype=float)
    if features.shape[0] != n:
        raise ValidationError("feature rows do not match event count")

    feature_psi = {}
    for d, ref_hist in enumerate(profile.feature_histograms):
        cur = FeatureHistogram(
            edges=ref_hist.edges, mass=histogram_mass(features[:, d], ref_hist.edges)
        )
        feature_psi[f"f{d}"] = psi(ref_hist, cur)

    class_count = len(profile.class_distribution)
    counts = np.bincount([e.predicted_label for e in events], minlength=class_count)
    current_dist = counts / counts.sum()
    tv = prior_shift_tv(profile.class_distribution, current_dist)

    predicted = predictor.predict(features, seed=seed)

    kpi_deltas = {
        name: kpi_means[name] - ref_mean
        for name, ref_mean in profile.kpi_means.items()
        if name in kpi_means
    }

    drop = profile.reference_accuracy - predicted.point
    flags = {
        "feature_drift": max(feature_psi.values()) > thresholds.theta_psi,
        "prior_shift": tv > thresholds.theta_tv,
        "performance_drift": drop > thresholds.theta_acc
        and profile.reference_accuracy > predicted.interval_high,
        "kpi_drop": any(delta < -thresholds.theta_kpi for delta in kpi_deltas.values()),
    }
    report = DriftReport(
        window=window,
        feature_psi=feature_psi,
        prior_tv=tv,
        predicted_accuracy=predicted,
        kpi_deltas=kpi_deltas,
        flags=flags,
        thresholds=thresholds,
    )

    alert = None
    if flags["performance_drift"] or flags["kpi_drop"]:
        kind = "performance" if flags["performance_drift"] else "kpi"
        worst_kpi_drop = max((-d for d in kpi_deltas.values()), default=0.0)
        critical = (flags["performance_drift"] and drop > 2 * thresholds.theta_acc) or (
            flags["kpi_drop"] and worst_kpi_drop > 2 * thresholds.theta_kpi
        )
        annotations = []
        if flags["feature_drift"]:
            worst = max(feature_psi, key=lambda k: feature_psi[k])
            annotations.append(f"feature_drift: max psi {feature_psi[worst]:.4f} on {worst}")
        if flags["prior_shift"]:
            annotations.append(f"prior_shift: tv {tv:.4f}")
        alert = Alert(
            id=f"alert_{window.start_tick}_{window.end_tick}",
            window=window,
            kind=kind,
            severity="critical" if critical else "warning",
            evidence=report,
            annotations=annotations,
        )
    return MonitorOutcome(window=window, report=report, alert=alert)
