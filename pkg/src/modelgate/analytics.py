"""KPI aggregation, metric/KPI correlation, and good-vs-bad contrast.

Works over joined transactions (one model event plus its KPI readings). The
contrast operation splits transactions into good and bad groups by KPI value
and ranks every candidate model metric by how differently it is distributed
across the groups, pointing a human at the most suspect model behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .drift import ks_statistic
from .errors import InsufficientDataError, ValidationError
from .events import JoinedTransaction, Window
from .perf import META_FEATURE_NAMES

Z_95 = 1.96


@dataclass(frozen=True)
class KpiAggregate:
    kpi_name: str
    window: Window
    n: int
    mean: float
    interval_low: float
    interval_high: float

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("aggregate needs n >= 1")
        if not self.interval_low <= self.mean <= self.interval_high:
            raise ValidationError("aggregate interval must contain the mean")

    def to_dict(self) -> dict:
        return {
            "kpi_name": self.kpi_name,
            "window": self.window.to_dict(),
            "n": self.n,
            "mean": self.mean,
            "interval_low": self.interval_low,
            "interval_high": self.interval_high,
        }


def wilson_interval(successes: int, n: int, z: float = Z_95) -> tuple[float, float]:
    if n < 1:
        raise ValidationError("wilson interval needs n >= 1")
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return max(0.0, center - half), min(1.0, center + half)


def _is_binary(values: np.ndarray) -> bool:
    return bool(np.all((values == 0.0) | (values == 1.0)))


def kpi_values(transactions: list[JoinedTransaction], kpi_name: str) -> np.ndarray:
    return np.array(
        [t.kpi_values[kpi_name] for t in transactions if kpi_name in t.kpi_values], dtype=float
    )


def kpi_aggregate(
    transactions: list[JoinedTransaction], kpi_name: str, window: Window
) -> KpiAggregate:
    values = kpi_values(transactions, kpi_name)
    if values.size == 0:
        raise InsufficientDataError(f"no transaction carries KPI {kpi_name!r}")
    mean = float(values.mean())
    if _is_binary(values):
        low, high = wilson_interval(int(values.sum()), values.size)
        # Wilson bounds always bracket the sample mean for z > 0
        low, high = min(low, mean), max(high, mean)
    else:
        stderr = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
        low, high = mean - Z_95 * stderr, mean + Z_95 * stderr
    return KpiAggregate(
        kpi_name=kpi_name,
        window=window,
        n=int(values.size),
        mean=mean,
        interval_low=low,
        interval_high=high,
    )


def metric_value(transaction: JoinedTransaction, metric_name: str) -> float:
    """Candidate metrics: the four confidence features, or a predicted-class indicator."""
    if metric_name in META_FEATURE_NAMES:
        return getattr(transaction.model_event.confidence_features, metric_name)
    if metric_name.startswith("predicted_label_"):
        target = int(metric_name.rsplit("_", 1)[1])
        return 1.0 if transaction.model_event.predicted_label == target else 0.0
    raise ValidationError(f"unknown metric {metric_name!r}")


def candidate_metrics(transactions: list[JoinedTransaction], class_count: int) -> list[str]:
    return list(META_FEATURE_NAMES) + [f"predicted_label_{k}" for k in range(class_count)]


def correlate(
    transactions: list[JoinedTransaction], metric_name: str, kpi_name: str
) -> dict[str, float]:
    """Pearson correlation between a model metric and a KPI across transactions."""
    pairs = [
        (metric_value(t, metric_name), t.kpi_values[kpi_name])
        for t in transactions
        if kpi_name in t.kpi_values
    ]
    if len(pairs) < 3:
        raise InsufficientDataError(
            f"correlate needs >= 3 transactions with {kpi_name!r}, got {len(pairs)}"
        )
    x = np.array([p[0] for p in pairs], dtype=float)
    y = np.array([p[1] for p in pairs], dtype=float)
    if np.ptp(x) == 0.0:
        raise InsufficientDataError(f"metric {metric_name!r} is constant; correlation undefined")
    if np.ptp(y) == 0.0:
        raise InsufficientDataError(f"KPI {kpi_name!r} is constant; correlation undefined")
    xc = x - x.mean()
    yc = y - y.mean()
    r = float(np.dot(xc, yc) / math.sqrt(np.dot(xc, xc) * np.dot(yc, yc)))
    return {"r": max(-1.0, min(1.0, r)), "n": float(len(pairs))}


@dataclass(frozen=True)
class SplitRule:
    """Binary KPIs split on value 1 vs 0; continuous KPIs split at a threshold."""

    kind: str  # binary | threshold
    threshold: float | None = None

    def __post_init__(self):
        if self.kind not in ("binary", "threshold"):
            raise ValidationError(f"unknown split kind {self.kind!r}")
        if self.kind == "threshold" and self.threshold is None:
            raise ValidationError("threshold split requires a threshold value")

    def is_bad(self, value: float) -> bool:
        if self.kind == "binary":
            return value == 0.0
        return value < self.threshold


@dataclass
class SuspectMetric:
    metric_name: str
    correlation: float
    ks_contrast: float
    direction: str  # higher_in_bad | lower_in_bad
    annotation: str = ""

    def to_dict(self) -> dict:
        payload = {
            "metric_name": self.metric_name,
            "correlation": self.correlation,
            "ks_contrast": self.ks_contrast,
            "direction": self.direction,
        }
        if self.annotation:
            payload["annotation"] = self.annotation
        return payload


@dataclass
class SuspectReport:
    window: Window
    kpi_name: str
    ranked: list[SuspectMetric]
    n_good: int
    n_bad: int
    group_summaries: dict[str, dict[str, dict[str, float]]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "window": self.window.to_dict(),
            "kpi_name": self.kpi_name,
            "ranked": [m.to_dict() for m in self.ranked],
            "n_good": self.n_good,
            "n_bad": self.n_bad,
            "group_summaries": self.group_summaries,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SuspectReport":
        return cls(
            window=Window.from_dict(payload["window"]),
            kpi_name=payload["kpi_name"],
            ranked=[
                SuspectMetric(
                    metric_name=m["metric_name"],
                    correlation=float(m["correlation"]),
                    ks_contrast=float(m["ks_contrast"]),
                    direction=m["direction"],
                    annotation=m.get("annotation", ""),
                )
                for m in payload["ranked"]
            ],
            n_good=int(payload["n_good"]),
            n_bad=int(payload["n_bad"]),
            group_summaries=payload.get("group_summaries", {}),
        )


def split_good_bad(
    transactions: list[JoinedTransaction], kpi_name: str, split: SplitRule
) -> tuple[list[JoinedTransaction], list[JoinedTransaction]]:
    carrying = [t for t in transactions if kpi_name in t.kpi_values]
    good = [t for t in carrying if not split.is_bad(t.kpi_values[kpi_name])]
    bad = [t for t in carrying if split.is_bad(t.kpi_values[kpi_name])]
    return good, bad


def low_kpi_slice(
    transactions: list[JoinedTransaction], kpi_name: str, split: SplitRule
) -> list[JoinedTransaction]:
    """The bad-group transactions, in event order."""
    _, bad = split_good_bad(transactions, kpi_name, split)
    return bad


def contrast_good_bad(
    transactions: list[JoinedTransaction],
    kpi_name: str,
    split: SplitRule,
    window: Window,
    class_count: int,
) -> SuspectReport:
    good, bad = split_good_bad(transactions, kpi_name, split)
    if not good:
        raise InsufficientDataError(f"good group is empty for KPI {kpi_name!r}")
    if not bad:
        raise InsufficientDataError(f"bad group is empty for KPI {kpi_name!r}")

    suspects = []
    summaries: dict[str, dict[str, dict[str, float]]] = {}
    for name in candidate_metrics(transactions, class_count):
        good_vals = np.array([metric_value(t, name) for t in good])
        bad_vals = np.array([metric_value(t, name) for t in bad])
        ks = ks_statistic(good_vals, bad_vals)
        try:
            corr = correlate(good + bad, name, kpi_name)["r"]
            annotation = ""
        except InsufficientDataError:
            corr = 0.0
            annotation = "constant metric; correlation undefined"
        direction = "higher_in_bad" if bad_vals.mean() >= good_vals.mean() else "lower_in_bad"
        suspects.append(
            SuspectMetric(
                metric_name=name,
                correlation=corr,
                ks_contrast=ks,
                direction=direction,
                annotation=annotation,
            )
        )
        summaries[name] = {
            "good": _summary(good_vals),
            "bad": _summary(bad_vals),
        }

    suspects.sort(key=lambda s: (-s.ks_contrast, -abs(s.correlation), s.metric_name))
    return SuspectReport(
        window=window,
        kpi_name=kpi_name,
        ranked=suspects,
        n_good=len(good),
        n_bad=len(bad),
        group_summaries=summaries,
    )


def _summary(values: np.ndarray) -> dict[str, float]:
    return {
        "mean": float(values.mean()),
        "p25": float(np.percentile(values, 25)),
        "p50": float(np.percentile(values, 50)),
        "p75": float(np.percentile(values, 75)),
    }


def export_suspect_csv(report: SuspectReport, path: str | Path) -> None:
    lines = ["metric,ks,correlation,direction"]
    for m in report.ranked:
        lines.append(f"{m.metric_name},{m.ks_contrast!r},{m.correlation!r},{m.direction}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
