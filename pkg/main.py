"""
Sepsis Control Toolkit CLI.

Commands:
  simulate       Integrate a subsystem, optionally under a fixed control file
  bifurcate      Bifurcation diagram, limit-cycle check and phase exports
  optimize       Improved BO vs standard BO vs random search on one scenario
  compare        Improved BO vs random search over consecutive seeds
  generate-data  Receding-horizon control dataset (JSONL)
  train          Train the recurrent control predictor on a dataset
  predict        Roll the predictor out on held-out settings

Global flags:
  --config PATH   Pipeline config JSON, or a previous run's manifest.json
  --seed N        Top-level seed for every random stream
  --out DIR       Output directory (default: $SEPSIS_OUTPUT_DIR/<command>)
  --workers N     Worker pool size
  --preset NAME   Scenario preset (pathogen-high | tnf-persistent)
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional

import click
from pydantic import ValidationError

from config import EXIT_CONFIG_ERROR, EXIT_NUMERIC_ERROR, LOG_FORMAT, LOG_LEVEL, settings
from modules.errors import (
    ConfigError,
    DatasetError,
    DomainError,
    GpFitError,
    IntegrationError,
    ModelFileError,
    StabilityError,
    TrainingDivergedError,
)
from modules.pipeline.commands import COMMANDS
from modules.pipeline.config import PRESETS
from modules.pipeline.manifest import load_config_data
from modules.pipeline.models import Command, PipelineConfig

# ---------------------------------------------------------------------------
# Logging setup
# ---------------------------------------------------------------------------

logging.basicConfig(
    level=LOG_LEVEL,
    format=LOG_FORMAT,
    stream=sys.stderr,
)
logger = logging.getLogger("sepsis-control")

CONFIG_ERRORS = (ValidationError, ConfigError, DomainError, ModelFileError, DatasetError, FileNotFoundError)
NUMERIC_ERRORS = (IntegrationError, StabilityError, GpFitError, TrainingDivergedError)


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------

def build_config(
    command: Command,
    config_path: Optional[str],
    seed: Optional[int],
    preset: Optional[str],
    section_updates: Optional[Dict[str, Dict[str, Any]]] = None,
) -> PipelineConfig:
    """Defaults, then the config file (or replayed manifest), then flags."""
    data: Dict[str, Any] = {}
    if config_path:
        data, recorded = load_config_data(config_path)
        if recorded is not None and recorded != command.value:
            raise ConfigError(f"Manifest {config_path} records a {recorded} run, not {command.value}")
    if seed is not None:
        data["seed"] = seed
    elif "seed" not in data:
        data["seed"] = settings.SEED
    if preset is not None:
        data["preset"] = preset
    for section, values in (section_updates or {}).items():
        data[section] = {**data.get(section, {}), **values}
    return PipelineConfig.model_validate(data)


def _fail(ctx: click.Context, exc: Exception, code: int) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    diagnostics = getattr(exc, "diagnostics", None)
    if diagnostics:
        payload["diagnostics"] = diagnostics
    click.echo(json.dumps(payload, default=str), err=True)
    ctx.exit(code)


def run_command(
    ctx: click.Context,
    command: Command,
    section_updates: Optional[Dict[str, Dict[str, Any]]] = None,
) -> None:
    opts = ctx.obj
    try:
        cfg = build_config(command, opts["config"], opts["seed"], opts["preset"], section_updates)
        out_dir = Path(opts["out"]) if opts["out"] else settings.OUTPUT_DIR / command.value
        click.echo(f"  {command.value}: seed {cfg.seed}, workers {opts['workers']}, output {out_dir}")
        manifest = COMMANDS[command](cfg, out_dir, opts["workers"])
    except CONFIG_ERRORS as exc:
        logger.error("%s failed: %s", command.value, exc)
        _fail(ctx, exc, EXIT_CONFIG_ERROR)
        return
    except NUMERIC_ERRORS as exc:
        logger.error("%s failed: %s", command.value, exc)
        _fail(ctx, exc, EXIT_NUMERIC_ERROR)
        return

    for name in sorted(manifest.outputs):
        click.echo(f"    {name}")
    summary = manifest.metrics.get("summary")
    if summary:
        click.echo(json.dumps(summary, indent=2, sort_keys=True, default=str))
    click.echo(f"  Wrote {len(manifest.outputs)} outputs and manifest.json to {out_dir}")


# ---------------------------------------------------------------------------
# CLI group
# ---------------------------------------------------------------------------

@click.group()
@click.option("--config", "config_path", default=None, type=click.Path(dir_okay=False),
              help="Pipeline config JSON or a previous manifest.json.")
@click.option("--seed", default=None, type=click.IntRange(min=0), help="Top-level seed.")
@click.option("--out", default=None, type=click.Path(file_okay=False), help="Output directory.")
@click.option("--workers", default=None, type=click.IntRange(min=1), help="Worker pool size.")
@click.option("--preset", default=None, type=click.Choice(sorted(PRESETS)), help="Scenario preset.")
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[str], seed: Optional[int], out: Optional[str],
        workers: Optional[int], preset: Optional[str]) -> None:
    """Sepsis Control Toolkit."""
    ctx.ensure_object(dict)
    ctx.obj["config"] = config_path
    ctx.obj["seed"] = seed
    ctx.obj["out"] = out
    ctx.obj["workers"] = workers or settings.WORKERS
    ctx.obj["preset"] = preset


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--control", "control_file", default=None, help="(time, u_p, u_T) control CSV.")
@click.pass_context
def simulate(ctx: click.Context, control_file: Optional[str]) -> None:
    """Integrate a subsystem and export its trajectory."""
    updates = {"simulate": {"control_file": control_file}} if control_file else None
    run_command(ctx, Command.SIMULATE, updates)


@cli.command()
@click.option("--selftest", is_flag=True, default=False, help="Pitchfork and Van der Pol self-test.")
@click.pass_context
def bifurcate(ctx: click.Context, selftest: bool) -> None:
    """Sweep a parameter and classify the equilibria."""
    updates = {"bifurcate": {"selftest": True}} if selftest else None
    run_command(ctx, Command.BIFURCATE, updates)


@cli.command()
@click.pass_context
def optimize(ctx: click.Context) -> None:
    """Compare window optimizers against the uncontrolled run."""
    run_command(ctx, Command.OPTIMIZE)


@cli.command()
@click.option("--n-seeds", default=None, type=click.IntRange(min=1), help="Number of consecutive seeds.")
@click.pass_context
def compare(ctx: click.Context, n_seeds: Optional[int]) -> None:
    """Improved BO against random search over several seeds."""
    updates = {"compare": {"n_seeds": n_seeds}} if n_seeds else None
    run_command(ctx, Command.COMPARE, updates)


@cli.command("generate-data")
@click.option("--toy-feedback", is_flag=True, default=False, help="Toy-plant feedback-law dataset.")
@click.pass_context
def generate_data(ctx: click.Context, toy_feedback: bool) -> None:
    """Generate a receding-horizon control dataset."""
    updates = {"dataset": {"toy_feedback": True}} if toy_feedback else None
    run_command(ctx, Command.GENERATE_DATA, updates)


@cli.command()
@click.option("--dataset", "dataset_path", default=None, help="Dataset JSONL.")
@click.option("--sha256", default=None, help="Expected dataset hash.")
@click.pass_context
def train(ctx: click.Context, dataset_path: Optional[str], sha256: Optional[str]) -> None:
    """Train the control predictor."""
    updates = {"train": {"dataset": {"path": dataset_path, "sha256": sha256}}} if dataset_path else None
    run_command(ctx, Command.TRAIN, updates)


@cli.command()
@click.option("--model", "model_path", default=None, help="Model JSON file.")
@click.option("--sha256", default=None, help="Expected model hash.")
@click.option("--mode", default=None, type=click.Choice(["closed", "open"]), help="Rollout mode.")
@click.pass_context
def predict(ctx: click.Context, model_path: Optional[str], sha256: Optional[str], mode: Optional[str]) -> None:
    """Roll the predictor out on held-out settings."""
    section: Dict[str, Any] = {}
    if model_path:
        section["model"] = {"path": model_path, "sha256": sha256}
    if mode:
        section["mode"] = mode
    run_command(ctx, Command.PREDICT, {"predict": section} if section else None)


if __name__ == "__main__":
    cli()
