"""Command-line front end.

Exit codes: 0 success, 2 validation errors (bad inputs, bad config), 3
runtime failures (missing files, degenerate data, internal errors).
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from .analytics import SplitRule, contrast_good_bad, export_suspect_csv
from .canary import BanditArm, CanaryConfig, CanaryState
from .errors import ModelgateError, ValidationError
from .events import EventStore, Window
from .models import TrainConfig, load_dataset_csv, load_model, save_model, train_classifier
from .pipeline import (
    PipelineConfig,
    RunDir,
    _read_json,
    _write_json,
    gate as run_gate,
    run_monitor_cycle,
    run_scenario,
)

EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        except (ModelgateError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_RUNTIME)

    return wrapper


@click.group()
def main() -> None:
    """Model operations: gate, deploy, monitor, diagnose."""


@main.command()
@click.argument("scenario", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False), help="run directory")
@handle_errors
def simulate(scenario: str, out: str) -> None:
    """Execute a full simulated run from a scenario file."""
    summary = run_scenario(scenario, out)
    click.echo(json.dumps(summary, sort_keys=True, indent=2))


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--model-id", default="model")
@click.option("--learning-rate", default=0.1, show_default=True)
@click.option("--epochs", default=300, show_default=True)
@click.option("--l2", default=1e-3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@handle_errors
def train(data, out, model_id, learning_rate, epochs, l2, seed) -> None:
    """Train a classifier on a labeled CSV (columns f0..fN plus label)."""
    dataset = load_dataset_csv(data)
    if dataset.labels is None:
        raise ValidationError("training data needs a label column")
    config = TrainConfig(learning_rate=learning_rate, epochs=epochs, l2=l2, seed=seed)
    model = train_classifier(dataset, config, model_id=model_id)
    save_model(model, out)
    click.echo(f"trained {model_id}: final loss {model.loss_history[-1]!r}" if model.loss_history else f"trained {model_id}")


@main.command(name="gate")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--test", "test_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--zone", "zones", multiple=True, required=True, help="name=batch.csv")
@click.option("--theta-gate", default=0.7, show_default=True)
@click.option("--method", default="meta", type=click.Choice(["meta", "calibrated_mean"]))
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@handle_errors
def gate_cmd(model_path, test_path, zones, theta_gate, method, seed, out) -> None:
    """Pre-deploy readiness check over one or more zone batches."""
    model = load_model(model_path)
    test = load_dataset_csv(test_path)
    batches = {}
    for entry in zones:
        if "=" not in entry:
            raise ValidationError(f"--zone expects name=path, got {entry!r}")
        name, _, path = entry.partition("=")
        batches[name] = load_dataset_csv(path).features
    config = PipelineConfig(
        window_size=1, theta_gate=theta_gate, predictor_method=method, seed=seed
    )
    report = run_gate(model, test, batches, config)
    payload = report.to_dict()
    if out:
        _write_json(Path(out), payload)
    click.echo(json.dumps(payload, sort_keys=True, indent=2))
    if any(z["verdict"] == "no_go" for z in payload["zones"]):
        click.echo("verdict: no_go in at least one zone", err=True)


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--champion", required=True, help="champion model id")
@click.option("--challenger", required=True, help="challenger model id")
@click.option("--reward", default="predicted_correctness", show_default=True)
@click.option("--n-min", default=100, show_default=True)
@click.option("--delta", default=0.05, show_default=True)
@click.option("--p-decide", default=0.95, show_default=True)
@click.option("--seed", default=0, show_default=True)
@handle_errors
def deploy(data, champion, challenger, reward, n_min, delta, p_decide, seed) -> None:
    """Create a fresh canary deployment record in a data directory."""
    run = RunDir(data)
    if run.deployment_file.exists():
        raise ValidationError(f"{run.deployment_file} already exists")
    state = CanaryState(
        deployment_id=f"deploy_{champion}_vs_{challenger}",
        champion=BanditArm(model_id=champion),
        challenger=BanditArm(model_id=challenger),
        reward_source=reward,
        config=CanaryConfig(n_min=n_min, delta=delta, p_decide=p_decide, seed=seed),
        audit_path=run.decisions_file,
    )
    _write_json(run.deployment_file, state.to_dict())
    click.echo(f"created {state.deployment_id} (warming)")


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--cycles", default=1, show_default=True)
@handle_errors
def monitor(data, cycles) -> None:
    """Evaluate pending completed windows against the reference profile."""
    reports, alerts = run_monitor_cycle(data, cycles=cycles)
    click.echo(f"evaluated {len(reports)} windows, {len(alerts)} alerts")
    for alert in alerts:
        click.echo(json.dumps(alert, sort_keys=True))


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--window", "window_spec", required=True, help="start:end ticks")
@click.option("--kpi", required=True, help="KPI name to contrast on")
@click.option("--threshold", default=None, type=float, help="good/bad split for continuous KPIs")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV report path")
@handle_errors
def diagnose(data, window_spec, kpi, threshold, out) -> None:
    """Rank model metrics by how differently they behave in bad transactions."""
    run = RunDir(data)
    try:
        start, _, end = window_spec.partition(":")
        window = Window(start_tick=int(start), end_tick=int(end))
    except ValueError:
        raise ValidationError(f"--window expects start:end integers, got {window_spec!r}") from None
    extras = _read_json(run.config) if run.config.exists() else {}
    class_count = extras.get("class_count", 2)
    store = EventStore.open(run.root)
    joined, _ = store.join_by_correlation(window)
    split = SplitRule(kind="binary") if threshold is None else SplitRule(kind="threshold", threshold=threshold)
    report = contrast_good_bad(joined, kpi, split, window, class_count)
    if out:
        export_suspect_csv(report, out)
    click.echo(f"n_good={report.n_good} n_bad={report.n_bad}")
    click.echo("metric,ks,correlation,direction")
    for m in report.ranked:
        click.echo(f"{m.metric_name},{m.ks_contrast:.4f},{m.correlation:.4f},{m.direction}")


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--data", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@handle_errors
def serve(port, data, host) -> None:
    """Serve the run directory over the HTTP/JSON API."""
    import uvicorn

    from .api import create_app

    uvicorn.run(create_app(data), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
