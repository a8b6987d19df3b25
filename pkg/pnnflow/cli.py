"""
Command-line front end: dataset generation, training, prediction, evaluation
and the inference service.
"""
import json
import logging
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, List, Optional

import typer

from pnnflow import __version__
from pnnflow.errors import ConfigError, PnnError
from pnnflow.experiments import (
    compare,
    format_table,
    list_recipes,
    recipe_path,
    resolve_config,
    run_eval,
    run_gen,
    run_predict,
    run_train,
)
from pnnflow.settings import configure_logging
from pnnflow.utils import io

logger = logging.getLogger(__name__)

app = typer.Typer(
    name="pnnflow",
    help="Learn flows of Poisson systems with Poisson neural networks.",
    no_args_is_help=True,
    add_completion=False,
)


@contextmanager
def exit_on_error():
    """Turn library errors into a message on stderr and the error's exit code"""
    try:
        yield
    except PnnError as e:
        logger.debug("command failed", exc_info=True)
        typer.echo(f"Error: {e.message}", err=True)
        raise typer.Exit(code=e.exit_code)


def parse_overrides(pairs: Optional[List[str]]) -> Dict[str, Any]:
    """KEY=VALUE strings to dotted-key overrides; values are parsed as JSON when possible"""
    overrides: Dict[str, Any] = {}
    for pair in pairs or []:
        key, sep, raw = pair.partition("=")
        if not sep or not key:
            raise ConfigError(f"override '{pair}' is not of the form key=value")
        try:
            overrides[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key.strip()] = raw
    return overrides


def parse_state(text: Optional[str]) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise ConfigError(f"initial state '{text}' is not a comma separated list of numbers")


ConfigOpt = typer.Option(None, "--config", "-c", help="Experiment JSON file or bundled recipe name")
SystemOpt = typer.Option(None, "--system", "-s", help="Benchmark system; selects its default recipe")
SetOpt = typer.Option(None, "--set", help="Override a config key, e.g. --set dataset.h=0.05")
OutOpt = typer.Option(None, "--out", "-o", help="Output directory")


def version_callback(value: bool):
    if value:
        typer.echo(f"pnnflow {__version__}")
        raise typer.Exit()


@app.callback()
def main(
    log_level: Optional[str] = typer.Option(None, "--log-level", help="DEBUG, INFO, WARNING or ERROR"),
    version: bool = typer.Option(False, "--version", callback=version_callback, is_eager=True),
):
    configure_logging(log_level)


@app.command()
def gen(
    config: Optional[str] = ConfigOpt,
    system: Optional[str] = SystemOpt,
    out: Optional[Path] = OutOpt,
    fmt: str = typer.Option("csv", "--format", help="Trajectory file format: csv or jsonl"),
    h: Optional[float] = typer.Option(None, "--h", help="Observation step"),
    train_steps: Optional[int] = typer.Option(None, "--train-steps"),
    test_steps: Optional[int] = typer.Option(None, "--test-steps"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    overrides: Optional[List[str]] = SetOpt,
):
    """Integrate the ground-truth trajectories and write them with a manifest."""
    with exit_on_error():
        flags = {
            "dataset.h": h,
            "dataset.train_steps": train_steps,
            "dataset.test_steps": test_steps,
            "train.seed": seed,
            **parse_overrides(overrides),
        }
        cfg = resolve_config(config, system, flags)
        manifest = run_gen(cfg, out, fmt)
        typer.echo(f"Dataset written: {manifest}")


@app.command()
def train(
    config: Optional[str] = ConfigOpt,
    system: Optional[str] = SystemOpt,
    dataset: Optional[Path] = typer.Option(None, "--dataset", "-d", help="Directory written by gen"),
    out: Optional[Path] = OutOpt,
    model: Optional[str] = typer.Option(None, "--model", "-m", help="pnn, sympnet or vpnn"),
    iterations: Optional[int] = typer.Option(None, "--iterations", "-n"),
    lr: Optional[float] = typer.Option(None, "--lr"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    overrides: Optional[List[str]] = SetOpt,
):
    """Fit a model and write its checkpoint, metrics and loss curve."""
    with exit_on_error():
        flags = {
            "model.architecture": model,
            "train.iterations": iterations,
            "train.lr": lr,
            "train.seed": seed,
            **parse_overrides(overrides),
        }
        cfg = resolve_config(config, system, flags)
        outcome = run_train(cfg, dataset, out)
        typer.echo(f"Checkpoint: {outcome.checkpoint}")
        typer.echo(f"Final loss: {outcome.final_loss:.6e}")
        typer.echo(f"Training MSE: {outcome.report.train_mse:.6e}")
        if outcome.report.test_mse is not None:
            typer.echo(f"Test MSE: {outcome.report.test_mse:.6e}")


@app.command()
def predict(
    checkpoint: Path = typer.Argument(..., help="Checkpoint written by train"),
    steps: int = typer.Option(1000, "--steps", "-k", help="Number of observed steps"),
    x0: Optional[str] = typer.Option(None, "--x0", help="Initial state, comma separated"),
    dataset: Optional[Path] = typer.Option(None, "--dataset", "-d"),
    emit_substeps: bool = typer.Option(False, "--emit-substeps", help="Decode every latent step (h/m spacing)"),
    out: Optional[Path] = OutOpt,
):
    """Roll a trained model forward from x0 or from the ends of the training trajectories."""
    with exit_on_error():
        if steps < 1:
            raise ConfigError(f"--steps must be at least 1, got {steps}")
        written = run_predict(checkpoint, steps, parse_state(x0), dataset, emit_substeps, out)
        for path in written:
            typer.echo(str(path))


@app.command("eval")
def evaluate(
    checkpoints: List[Path] = typer.Argument(..., help="One checkpoint, or several to compare"),
    dataset: Optional[Path] = typer.Option(None, "--dataset", "-d"),
    epsilon: Optional[float] = typer.Option(None, "--epsilon", help="VPT error threshold"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Write the report JSON here"),
):
    """Report training, test and rollout errors plus the valid prediction time."""
    with exit_on_error():
        if len(checkpoints) > 1:
            rows = compare(checkpoints, dataset, epsilon)
            typer.echo(format_table(rows))
            if out is not None:
                io.write_json(out, [r.model_dump(mode="json") for r in rows])
            return
        report = run_eval(checkpoints[0], dataset, epsilon)
        payload = report.model_dump(mode="json")
        if out is not None:
            io.write_json(out, payload)
        summary = {k: v for k, v in payload.items() if k not in ("rmse_times", "rmse_series")}
        typer.echo(json.dumps(summary, indent=2))


@app.command()
def recipes():
    """List the bundled experiment recipes."""
    with exit_on_error():
        for name in list_recipes():
            description = io.read_json(recipe_path(name)).get("description", "")
            typer.echo(f"{name:<14} {description}")


@app.command()
def serve(
    host: str = typer.Option("127.0.0.1", "--host"),
    port: int = typer.Option(8000, "--port"),
    checkpoint_dir: Optional[Path] = typer.Option(None, "--checkpoint-dir", help="Directory searched for checkpoints"),
):
    """Serve trained checkpoints over HTTP."""
    import uvicorn

    if checkpoint_dir is not None:
        os.environ["PNNFLOW_CHECKPOINT_DIR"] = str(checkpoint_dir)
    logger.info(f"Serving checkpoints on http://{host}:{port}")
    uvicorn.run("pnnflow.main:app", host=host, port=port)


if __name__ == "__main__":
    app()
