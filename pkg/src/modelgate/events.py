"""Append-only event logs with windowed queries and correlation-ID joins.

Two logs: model events (one per inference, with the routing arm and the
per-prediction uncertainty features) and KPI events (application outcomes
keyed by the same caller-assigned correlation ID). Each log persists as
line-delimited JSON, one file per log, so a store rebuilt from disk answers
every window query identically.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .errors import AmbiguousCorrelationError, ValidationError
from .perf import MetaFeatureVector

VALID_ARMS = ("champion", "challenger", "none")

MODEL_LOG = "model"
KPI_LOG = "kpi"
MODEL_FILE = "model_events.jsonl"
KPI_FILE = "kpi_events.jsonl"


def validate_correlation_id(value: str) -> str:
    if not isinstance(value, str) or not value:
        raise ValidationError("correlation_id must be a nonempty string")
    if len(value) > 128:
        raise ValidationError("correlation_id longer than 128 chars")
    return value


@dataclass(frozen=True)
class Window:
    start_tick: int  # inclusive
    end_tick: int  # exclusive

    def __post_init__(self):
        if self.start_tick >= self.end_tick:
            raise ValidationError(f"window [{self.start_tick},{self.end_tick}) is empty")

    def contains(self, tick: int) -> bool:
        return self.start_tick <= tick < self.end_tick

    def to_dict(self) -> dict:
        return {"start_tick": self.start_tick, "end_tick": self.end_tick}

    @classmethod
    def from_dict(cls, payload: dict) -> "Window":
        return cls(start_tick=payload["start_tick"], end_tick=payload["end_tick"])


@dataclass(frozen=True)
class ScoredEvent:
    correlation_id: str
    model_id: str
    timestamp: int
    arm: str
    predicted_label: int
    confidence_features: MetaFeatureVector
    zone: str = "default"

    def validate(self) -> None:
        validate_correlation_id(self.correlation_id)
        if not self.model_id:
            raise ValidationError("model_id must be nonempty")
        if self.timestamp < 0:
            raise ValidationError("timestamp must be >= 0")
        if self.arm not in VALID_ARMS:
            raise ValidationError(f"arm must be one of {VALID_ARMS}")
        if self.predicted_label < 0:
            raise ValidationError("predicted_label must be >= 0")

    def to_dict(self) -> dict:
        return {
            "correlation_id": self.correlation_id,
            "model_id": self.model_id,
            "timestamp": self.timestamp,
            "arm": self.arm,
            "predicted_label": self.predicted_label,
            "confidence_features": self.confidence_features.to_dict(),
            "zone": self.zone,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ScoredEvent":
        return cls(
            correlation_id=payload["correlation_id"],
            model_id=payload["model_id"],
            timestamp=int(payload["timestamp"]),
            arm=payload["arm"],
            predicted_label=int(payload["predicted_label"]),
            confidence_features=MetaFeatureVector.from_dict(payload["confidence_features"]),
            zone=payload.get("zone", "default"),
        )


@dataclass(frozen=True)
class KpiEvent:
    correlation_id: str
    kpi_name: str
    value: float
    timestamp: int

    def validate(self) -> None:
        validate_correlation_id(self.correlation_id)
        if not self.kpi_name:
            raise ValidationError("kpi_name must be nonempty")
        if self.timestamp < 0:
            raise ValidationError("timestamp must be >= 0")
        if not isinstance(self.value, (int, float)):
            raise ValidationError("kpi value must be numeric")

    def to_dict(self) -> dict:
        return {
            "correlation_id": self.correlation_id,
            "kpi_name": self.kpi_name,
            "value": self.value,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "KpiEvent":
        return cls(
            correlation_id=payload["correlation_id"],
            kpi_name=payload["kpi_name"],
            value=float(payload["value"]),
            timestamp=int(payload["timestamp"]),
        )


@dataclass
class JoinedTransaction:
    correlation_id: str
    model_event: ScoredEvent
    kpi_values: dict[str, float]


@dataclass(frozen=True)
class UnmatchedCounts:
    model_events: int
    kpi_events: int


@dataclass
class EventStore:
    """Two append-only logs. Single writer; reads see a point-in-time snapshot."""

    directory: Path | None = None
    _model_log: list[ScoredEvent] = field(default_factory=list)
    _kpi_log: list[KpiEvent] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.directory is not None:
            self.directory = Path(self.directory)
            self.directory.mkdir(parents=True, exist_ok=True)

    @classmethod
    def open(cls, directory: str | Path) -> "EventStore":
        """Rebuild a store from its on-disk logs."""
        store = cls(directory=Path(directory))
        model_path = store.directory / MODEL_FILE
        kpi_path = store.directory / KPI_FILE
        if model_path.exists():
            with open(model_path, encoding="utf-8") as fh:
                store._model_log = [ScoredEvent.from_dict(json.loads(line)) for line in fh if line.strip()]
        if kpi_path.exists():
            with open(kpi_path, encoding="utf-8") as fh:
                store._kpi_log = [KpiEvent.from_dict(json.loads(line)) for line in fh if line.strip()]
        return store

    def append_event(self, event: ScoredEvent | KpiEvent) -> int:
        event.validate()
        with self._lock:
            if isinstance(event, ScoredEvent):
                log, fname = self._model_log, MODEL_FILE
            elif isinstance(event, KpiEvent):
                log, fname = self._kpi_log, KPI_FILE
            else:
                raise ValidationError(f"unknown event type {type(event).__name__}")
            seq = len(log)
            log.append(event)
            if self.directory is not None:
                line = json.dumps(event.to_dict(), sort_keys=True, separators=(",", ":"))
                with open(self.directory / fname, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
            return seq

    def append_many(self, events) -> None:
        """Batch append; buffers file writes so large replays stay cheap."""
        with self._lock:
            model_lines, kpi_lines = [], []
            for event in events:
                event.validate()
                if isinstance(event, ScoredEvent):
                    self._model_log.append(event)
                    model_lines.append(json.dumps(event.to_dict(), sort_keys=True, separators=(",", ":")))
                else:
                    self._kpi_log.append(event)
                    kpi_lines.append(json.dumps(event.to_dict(), sort_keys=True, separators=(",", ":")))
            if self.directory is not None:
                if model_lines:
                    with open(self.directory / MODEL_FILE, "a", encoding="utf-8") as fh:
                        fh.write("\n".join(model_lines) + "\n")
                if kpi_lines:
                    with open(self.directory / KPI_FILE, "a", encoding="utf-8") as fh:
                        fh.write("\n".join(kpi_lines) + "\n")

    def query_window(self, log: str, window: Window) -> list:
        """Events with start <= timestamp < end, in append order."""
        with self._lock:
            if log == MODEL_LOG:
                snapshot = list(self._model_log)
            elif log == KPI_LOG:
                snapshot = list(self._kpi_log)
            else:
                raise ValidationError(f"unknown log {log!r}; expected 'model' or 'kpi'")
        return [e for e in snapshot if window.contains(e.timestamp)]

    def join_by_correlation(
        self, window: Window
    ) -> tuple[list[JoinedTransaction], UnmatchedCounts]:
        """Join model and KPI events in the window on correlation ID.

        Duplicate KPI readings for one (correlation_id, kpi_name) resolve to
        the latest timestamp; duplicate model events for one ID are an error.
        """
        model_events = self.query_window(MODEL_LOG, window)
        kpi_events = self.query_window(KPI_LOG, window)

        by_id: dict[str, ScoredEvent] = {}
        for event in model_events:
            if event.correlation_id in by_id:
                raise AmbiguousCorrelationError(
                    f"two model events share correlation_id {event.correlation_id!r} in "
                    f"[{window.start_tick},{window.end_tick})"
                )
            by_id[event.correlation_id] = event

        # latest timestamp wins; ties resolve to the later append
        kpi_by_id: dict[str, dict[str, KpiEvent]] = {}
        unmatched_kpi = 0
        for event in kpi_events:
            if event.correlation_id not in by_id:
                unmatched_kpi += 1
                continue
            slot = kpi_by_id.setdefault(event.correlation_id, {})
            prev = slot.get(event.kpi_name)
            if prev is None or event.timestamp >= prev.timestamp:
                slot[event.kpi_name] = event

        joined: list[JoinedTransaction] = []
        unmatched_model = 0
        for event in model_events:
            slot = kpi_by_id.get(event.correlation_id)
            if not slot:
                unmatched_model += 1
                continue
            joined.append(
                JoinedTransaction(
                    correlation_id=event.correlation_id,
                    model_event=event,
                    kpi_values={name: e.value for name, e in slot.items()},
                )
            )
        return joined, UnmatchedCounts(model_events=unmatched_model, kpi_events=unmatched_kpi)

    def max_model_timestamp(self) -> int | None:
        with self._lock:
            if not self._model_log:
                return None
            return max(e.timestamp for e in self._model_log)

    def counts(self) -> dict[str, int]:
        with self._lock:
            return {"model": len(self._model_log), "kpi": len(self._kpi_log)}
