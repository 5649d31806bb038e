"""Command-line entry points: run, compare-stealth, serve, presets."""

from __future__ import annotations

import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .engine import CommandSpec, SimConfig, run
from .errors import ScenarioError
from .presets import PRESETS, get_preset
from .scenario import dump_scenario, load_scenario
from .service import serve as serve_service

log = logging.getLogger("swarmcover")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    level = os.environ.get("SWARM_LOG_LEVEL", "warn").lower()
    if level not in _LOG_LEVELS:
        click.echo(f"ignoring unknown SWARM_LOG_LEVEL={level!r}", err=True)
        level = "warn"
    logging.basicConfig(level=_LOG_LEVELS[level], format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _load_config(scenario, preset) -> SimConfig:
    if (scenario is None) == (preset is None):
        raise click.UsageError("provide exactly one of --scenario or --preset")
    if scenario is not None:
        return load_scenario(scenario)
    try:
        return get_preset(preset)
    except KeyError as exc:
        raise click.UsageError(str(exc)) from exc


def _apply_overrides(config: SimConfig, dt, duration, stealth_mode, seed) -> SimConfig:
    updates = {}
    if dt is not None:
        updates["dt"] = dt
    if duration is not None:
        updates["duration"] = duration
    if stealth_mode is not None:
        updates["stealth_mode"] = stealth_mode
    if seed is not None:
        updates["seed"] = seed
    return replace(config, **updates) if updates else config


def run_to_dir(config: SimConfig, out_dir) -> dict:
    """Execute a scenario and write telemetry.csv plus summary.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    telemetry = run(config)
    telemetry.to_csv(out / "telemetry.csv")
    summary = telemetry.summary()
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def compare_stealth(config: SimConfig) -> dict:
    """Run the scenario under off / stealthy / per_drone with the scripted
    circular command and report average-state deviations from the off
    (reference) run, direction drift from its initial value, and the
    accumulated coverage effort per mode."""
    circle = CommandSpec(source="circle", omega=config.command.omega)
    base = replace(config, command=circle)
    results = {}
    reference = None
    for mode in ("off", "stealthy", "per_drone"):
        telemetry = run(replace(base, stealth_mode=mode))
        positions = telemetry.avg_positions()
        directions = telemetry.avg_directions()
        if mode == "off":
            reference = positions
        dev_pos = float(np.linalg.norm(positions - reference, axis=1).max())
        dev_dir = float(np.linalg.norm(directions - directions[0], axis=1).max())
        results[mode] = {
            "max_avg_position_deviation_m": dev_pos,
            "max_avg_direction_deviation": dev_dir,
            "integral_uc": telemetry.integral_uc(),
            "events": telemetry.summary()["events"],
            "final_J": telemetry.final_J,
        }
    return results


@click.group()
def main() -> None:
    """Multi-drone coverage simulator with stealthy shared teleoperation."""
    _setup_logging()


@main.command("run")
@click.option("--scenario", type=click.Path(), default=None, help="Scenario JSON file.")
@click.option("--preset", type=str, default=None, help="Named preset scenario.")
@click.option("--out", type=click.Path(), required=True, help="Output directory.")
@click.option("--dt", type=float, default=None)
@click.option("--duration", type=float, default=None)
@click.option("--stealth-mode", type=click.Choice(["stealthy", "per_drone", "off"]), default=None)
@click.option("--seed", type=int, default=None)
def cmd_run(scenario, preset, out, dt, duration, stealth_mode, seed) -> None:
    """Run a scenario and write telemetry CSV + summary JSON."""
    try:
        config = _apply_overrides(_load_config(scenario, preset), dt, duration, stealth_mode, seed)
        summary = run_to_dir(config, out)
    except ScenarioError as exc:
        click.echo(f"scenario error: {exc}", err=True)
        sys.exit(2)
    click.echo(json.dumps(summary, indent=2))


@main.command("compare-stealth")
@click.option("--scenario", type=click.Path(), default=None)
@click.option("--preset", type=str, default=None)
@click.option("--out", type=click.Path(), default=None, help="Write report.json here.")
@click.option("--dt", type=float, default=None)
@click.option("--duration", type=float, default=None)
def cmd_compare(scenario, preset, out, dt, duration) -> None:
    """Run off / stealthy / per_drone and report average-state deviations."""
    try:
        config = _apply_overrides(_load_config(scenario, preset), dt, duration, None, None)
        report = compare_stealth(config)
    except ScenarioError as exc:
        click.echo(f"scenario error: {exc}", err=True)
        sys.exit(2)
    for mode, row in report.items():
        click.echo(
            f"{mode:10s} dev_pos={row['max_avg_position_deviation_m']:.3e} m  "
            f"dev_dir={row['max_avg_direction_deviation']:.3e}  "
            f"int_uc={row['integral_uc']:.4f}"
        )
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "report.json", "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")


@main.command("serve")
@click.option("--scenario", type=click.Path(), default=None)
@click.option("--preset", type=str, default="desk-live")
@click.option("--port", type=int, default=8000)
@click.option("--host", type=str, default="127.0.0.1")
@click.option("--static-dir", type=click.Path(), default=None,
              help="Built web UI directory (default: ./frontend/dist if present).")
def cmd_serve(scenario, preset, port, host, static_dir) -> None:
    """Serve the live teleoperation session (state stream + web UI)."""
    try:
        config = load_scenario(scenario) if scenario else get_preset(preset)
    except (ScenarioError, KeyError) as exc:
        click.echo(f"scenario error: {exc}", err=True)
        sys.exit(2)
    if static_dir is None:
        candidate = Path.cwd() / "frontend" / "dist"
        static_dir = str(candidate) if candidate.is_dir() else None
    click.echo(f"serving on http://{host}:{port} (ui: {static_dir or 'none'})")
    serve_service(config, port=port, host=host, static_dir=static_dir)


@main.command("presets")
@click.argument("name", required=False)
def cmd_presets(name) -> None:
    """List presets, or dump one as a scenario JSON document."""
    if name is None:
        for key in sorted(PRESETS):
            click.echo(key)
        return
    try:
        config = get_preset(name)
    except KeyError as exc:
        click.echo(str(exc), err=True)
        sys.exit(2)
    click.echo(json.dumps(dump_scenario(config), indent=2))


if __name__ == "__main__":
    main()
