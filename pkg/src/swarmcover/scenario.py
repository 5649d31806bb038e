"""Scenario documents: strict JSON <-> SimConfig conversion.

Every level rejects unknown keys so a typo never silently falls back to a
default.  The document mirrors SimConfig one-to-one; see README for the
full schema.
"""

from __future__ import annotations

import json

from .engine import CommandSpec, SimConfig
from .errors import ScenarioError
from .field import GridSpec
from .sensing import CoverageParams, SensingParams

_GRID_KEYS = {"q_bounds", "phi_h_range", "phi_v_range", "cell_size", "phi_init", "max_cells"}
_PARAM_KEYS = {
    "D", "sigma1", "sigma2", "sigma3", "sigma1_bar", "sigma2_bar", "eps_range",
    "delta", "gamma", "alpha_gain", "u_c_bound", "kmax_mode",
}
_COMMAND_KEYS = {"source", "omega", "path", "staleness_timeout"}
_TOP_KEYS = {
    "n", "dt", "duration", "seed", "stealth_mode", "flight_box", "pitch_bounds",
    "grid", "params", "command", "initial_poses", "ring_radius", "ring_pitch", "eps_dir",
}


def _check_keys(doc: dict, allowed: set, where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ScenarioError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _parse_grid(doc: dict) -> GridSpec:
    _check_keys(doc, _GRID_KEYS, "grid")
    try:
        return GridSpec(
            q_bounds=tuple(tuple(b) for b in doc["q_bounds"]),
            phi_h_range=tuple(doc["phi_h_range"]),
            phi_v_range=tuple(doc["phi_v_range"]),
            cell_size=tuple(doc["cell_size"]),
            phi_init=doc.get("phi_init", 1.0),
            max_cells=doc.get("max_cells", 2_000_000),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad grid section: {exc}") from exc


def _parse_params(doc: dict) -> CoverageParams:
    _check_keys(doc, _PARAM_KEYS, "params")
    sensing_kwargs = {
        k: doc[k]
        for k in ("D", "sigma1", "sigma2", "sigma3", "sigma1_bar", "sigma2_bar", "eps_range")
        if k in doc
    }
    cover_kwargs = {
        k: doc[k]
        for k in ("delta", "gamma", "alpha_gain", "u_c_bound", "kmax_mode")
        if k in doc
    }
    try:
        return CoverageParams(sensing=SensingParams(**sensing_kwargs), **cover_kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad params section: {exc}") from exc


def _parse_command(doc: dict) -> CommandSpec:
    _check_keys(doc, _COMMAND_KEYS, "command")
    try:
        return CommandSpec(**doc)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad command section: {exc}") from exc


def parse_scenario(doc: dict) -> SimConfig:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    _check_keys(doc, _TOP_KEYS, "scenario")
    if "grid" not in doc:
        raise ScenarioError("scenario needs a grid section")
    kwargs = {"grid": _parse_grid(doc["grid"])}
    if "params" in doc:
        kwargs["params"] = _parse_params(doc["params"])
    if "command" in doc:
        kwargs["command"] = _parse_command(doc["command"])
    for key in ("n", "dt", "duration", "seed", "stealth_mode", "ring_radius", "ring_pitch", "eps_dir"):
        if key in doc:
            kwargs[key] = doc[key]
    if "flight_box" in doc:
        kwargs["flight_box"] = tuple(tuple(b) for b in doc["flight_box"])
    if "pitch_bounds" in doc:
        kwargs["pitch_bounds"] = tuple(doc["pitch_bounds"])
    if "initial_poses" in doc:
        poses = doc["initial_poses"]
        kwargs["initial_poses"] = tuple(tuple(r) for r in poses) if isinstance(poses, list) else poses
    try:
        return SimConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad scenario: {exc}") from exc


def dump_scenario(config: SimConfig) -> dict:
    """Inverse of parse_scenario (round-trips through JSON)."""
    sp = config.params.sensing
    return {
        "n": config.n,
        "dt": config.dt,
        "duration": config.duration,
        "seed": config.seed,
        "stealth_mode": config.stealth_mode,
        "flight_box": [list(b) for b in config.flight_box],
        "pitch_bounds": list(config.pitch_bounds),
        "grid": {
            "q_bounds": [list(b) for b in config.grid.q_bounds],
            "phi_h_range": list(config.grid.phi_h_range),
            "phi_v_range": list(config.grid.phi_v_range),
            "cell_size": list(config.grid.cell_size),
            "phi_init": config.grid.phi_init,
            "max_cells": config.grid.max_cells,
        },
        "params": {
            "D": sp.D, "sigma1": sp.sigma1, "sigma2": sp.sigma2, "sigma3": sp.sigma3,
            "sigma1_bar": sp.sigma1_bar, "sigma2_bar": sp.sigma2_bar, "eps_range": sp.eps_range,
            "delta": config.params.delta, "gamma": config.params.gamma,
            "alpha_gain": config.params.alpha_gain, "u_c_bound": config.params.u_c_bound,
            "kmax_mode": config.params.kmax_mode,
        },
        "command": {
            "source": config.command.source,
            "omega": config.command.omega,
            "path": config.command.path,
            "staleness_timeout": config.command.staleness_timeout,
        },
        "initial_poses": (
            [list(r) for r in config.initial_poses]
            if isinstance(config.initial_poses, tuple)
            else config.initial_poses
        ),
        "ring_radius": config.ring_radius,
        "ring_pitch": config.ring_pitch,
        "eps_dir": config.eps_dir,
    }


def load_scenario(path) -> SimConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario {path} is not valid JSON: {exc}") from exc
    return parse_scenario(doc)


def save_scenario(config: SimConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(dump_scenario(config), fh, indent=2)
        fh.write("\n")
