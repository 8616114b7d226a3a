"""HTTP/JSON service over a run directory.

Read endpoints serve persisted alerts, reports, deployments, and diagnosis;
the two mutating endpoints apply operator promote/rollback decisions through
the same force_decision path the controller uses, so the audit log and the
irreversibility rule hold no matter which side initiates the decision.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel

from . import canary, sim
from .errors import ValidationError
from .events import EventStore, KpiEvent, ScoredEvent, Window
from .perf import MetaFeatureVector
from .pipeline import RunDir, _read_json, _read_jsonl, _write_json


class ActorBody(BaseModel):
    actor: str


class ModelEventBody(BaseModel):
    correlation_id: str
    model_id: str
    timestamp: int
    arm: str = "none"
    predicted_label: int
    confidence_features: dict
    zone: str = "default"


class KpiEventBody(BaseModel):
    correlation_id: str
    kpi_name: str
    value: float
    timestamp: int


def create_app(data_dir: str | Path) -> FastAPI:
    run = RunDir(data_dir)
    store = EventStore.open(run.root)
    lock = threading.Lock()
    app = FastAPI(title="modelgate", version="0.1.0")

    def load_alerts() -> list[dict]:
        return _read_jsonl(run.alerts_file)

    def load_deployment() -> dict:
        if not run.deployment_file.exists():
            raise HTTPException(status_code=404, detail="no deployment in this run")
        return _read_json(run.deployment_file)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/alerts")
    def alerts(since_tick: int = 0) -> list[dict]:
        return [a for a in load_alerts() if a["window"]["start_tick"] >= since_tick]

    @app.get("/deployments")
    def deployments() -> list[dict]:
        if not run.deployment_file.exists():
            return []
        return [load_deployment()]

    @app.get("/deployments/{deployment_id}")
    def deployment(deployment_id: str) -> dict:
        payload = load_deployment()
        if payload["deployment_id"] != deployment_id:
            raise HTTPException(status_code=404, detail=f"unknown deployment {deployment_id!r}")
        return payload

    def force(deployment_id: str, verdict: str, actor: str) -> dict:
        if not actor:
            raise HTTPException(status_code=422, detail="actor must be nonempty")
        with lock:
            payload = load_deployment()
            if payload["deployment_id"] != deployment_id:
                raise HTTPException(
                    status_code=404, detail=f"unknown deployment {deployment_id!r}"
                )
            state = canary.CanaryState.from_dict(payload, audit_path=run.decisions_file)
            try:
                tick = store.max_model_timestamp() or 0
                canary.force_decision(state, verdict=verdict, actor=actor, tick=tick)
            except ValidationError as exc:
                # already-terminal deployments conflict with a new decision
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            updated = state.to_dict()
            _write_json(run.deployment_file, updated)
            return updated

    @app.post("/deployments/{deployment_id}/rollback")
    def rollback(deployment_id: str, body: ActorBody) -> dict:
        return force(deployment_id, "rollback", body.actor)

    @app.post("/deployments/{deployment_id}/promote")
    def promote(deployment_id: str, body: ActorBody) -> dict:
        return force(deployment_id, "promote", body.actor)

    oracle_cache: dict[str, int] | None = None

    def oracle() -> dict[str, int] | None:
        nonlocal oracle_cache
        if oracle_cache is None and run.oracle_file.exists():
            oracle_cache = sim.load_oracle(run.oracle_file)
        return oracle_cache

    @app.get("/metrics/accuracy")
    def metrics_accuracy(
        from_tick: int = Query(default=0, alias="from"),
        to_tick: int | None = Query(default=None, alias="to"),
    ) -> list[dict]:
        reports = _read_jsonl(run.reports_file)
        out = []
        for report in reports:
            if "inconclusive" in report:
                continue
            window = report["window"]
            if window["start_tick"] < from_tick:
                continue
            if to_tick is not None and window["start_tick"] >= to_tick:
                continue
            actual = None
            truth = oracle()
            if truth is not None:
                events = store.query_window(
                    "model", Window(window["start_tick"], window["end_tick"])
                )
                if events:
                    actual = sim.oracle_accuracy(
                        truth, events, Window(window["start_tick"], window["end_tick"])
                    )
            out.append(
                {
                    "window": window,
                    "predicted": report["predicted_accuracy"],
                    "actual": actual,
                }
            )
        return out

    @app.get("/diagnosis/{alert_id}")
    def diagnosis(alert_id: str) -> dict:
        for alert in load_alerts():
            if alert["id"] == alert_id:
                if not alert.get("suspect_report"):
                    raise HTTPException(
                        status_code=404, detail=f"alert {alert_id!r} has no diagnosis"
                    )
                return alert["suspect_report"]
        raise HTTPException(status_code=404, detail=f"unknown alert {alert_id!r}")

    @app.post("/events/model")
    def post_model_event(body: ModelEventBody) -> dict:
        try:
            event = ScoredEvent(
                correlation_id=body.correlation_id,
                model_id=body.model_id,
                timestamp=body.timestamp,
                arm=body.arm,
                predicted_label=body.predicted_label,
                confidence_features=MetaFeatureVector.from_dict(body.confidence_features),
                zone=body.zone,
            )
            seq = store.append_event(event)
        except (ValidationError, KeyError, TypeError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {"sequence": seq}

    @app.post("/events/kpi")
    def post_kpi_event(body: KpiEventBody) -> dict:
        try:
            event = KpiEvent(
                correlation_id=body.correlation_id,
                kpi_name=body.kpi_name,
                value=body.value,
                timestamp=body.timestamp,
            )
            seq = store.append_event(event)
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {"sequence": seq}

    return app
