"""Wire protocol for the live operator link.

Messages are JSON objects carried one-per-text-frame on the stream, each
tagged with a "type" field ("hello", "state", "command") and protocol
version "v".  Field names here are normative for clients.

The server never trusts client numbers: command frames are re-clamped to
the velocity bounds on decode regardless of what the client claims.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ProtocolError
from .field import ImportanceGrid

PROTOCOL_VERSION = 1
V_MAX = 0.5   # m/s per axis
W_MAX = 0.15  # rad/s per axis
HEATMAP_MAX_DIM = 48


@dataclass(frozen=True)
class CommandFrame:
    """Operator command as it crosses the wire (w is (pitch, yaw) rate)."""

    engaged: bool
    v: tuple
    w: tuple
    client_time: float = 0.0


@dataclass(frozen=True)
class StateFrame:
    """One decimated snapshot of the run for the cockpit."""

    t: float
    drones: tuple          # ((x, y, z, yaw, pitch), ...)
    p_bar: tuple
    dir_bar: tuple
    J: float
    heatmap: dict          # {"nx", "ny", "x0", "x1", "y0", "y1", "values"}
    events: tuple = ()


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ProtocolError(msg)


def _finite_list(doc, key, length) -> tuple:
    val = doc.get(key)
    _require(isinstance(val, (list, tuple)) and len(val) == length, f"{key} must be a {length}-list")
    out = []
    for x in val:
        _require(isinstance(x, (int, float)) and math.isfinite(x), f"{key} entries must be finite numbers")
        out.append(float(x))
    return tuple(out)


def decode_command(text: str) -> CommandFrame:
    """Parse and clamp a command frame; raises ProtocolError on junk."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"not valid JSON: {exc}") from exc
    _require(isinstance(doc, dict), "frame must be a JSON object")
    _require(doc.get("type") == "command", f"expected type 'command', got {doc.get('type')!r}")
    _require(doc.get("v_proto", PROTOCOL_VERSION) == PROTOCOL_VERSION, "unsupported protocol version")
    engaged = doc.get("engaged")
    _require(isinstance(engaged, bool), "engaged must be a boolean")
    v = _finite_list(doc, "v", 3)
    w = _finite_list(doc, "w", 2)
    client_time = doc.get("client_time", 0.0)
    _require(isinstance(client_time, (int, float)) and math.isfinite(client_time),
             "client_time must be a finite number")
    if not engaged:
        v, w = (0.0, 0.0, 0.0), (0.0, 0.0)
    else:
        v = tuple(min(V_MAX, max(-V_MAX, x)) for x in v)
        w = tuple(min(W_MAX, max(-W_MAX, x)) for x in w)
    return CommandFrame(engaged=engaged, v=v, w=w, client_time=float(client_time))


def encode_command(frame: CommandFrame) -> str:
    return json.dumps(
        {
            "type": "command",
            "v_proto": PROTOCOL_VERSION,
            "engaged": frame.engaged,
            "v": list(frame.v),
            "w": list(frame.w),
            "client_time": frame.client_time,
        }
    )


def encode_state(frame: StateFrame) -> str:
    return json.dumps(
        {
            "type": "state",
            "v_proto": PROTOCOL_VERSION,
            "t": frame.t,
            "drones": [list(d) for d in frame.drones],
            "p_bar": list(frame.p_bar),
            "dir_bar": list(frame.dir_bar),
            "J": frame.J,
            "heatmap": frame.heatmap,
            "events": list(frame.events),
        }
    )


def decode_state(text: str) -> StateFrame:
    """Client-side mirror of encode_state (used by tests and fixtures)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"not valid JSON: {exc}") from exc
    _require(doc.get("type") == "state", f"expected type 'state', got {doc.get('type')!r}")
    drones = doc.get("drones")
    _require(isinstance(drones, list), "drones must be a list")
    return StateFrame(
        t=float(doc["t"]),
        drones=tuple(tuple(float(x) for x in d) for d in drones),
        p_bar=tuple(float(x) for x in doc["p_bar"]),
        dir_bar=tuple(float(x) for x in doc["dir_bar"]),
        J=float(doc["J"]),
        heatmap=doc.get("heatmap", {}),
        events=tuple(doc.get("events", [])),
    )


def encode_hello(config) -> str:
    counts = config.grid.axis_counts()
    return json.dumps(
        {
            "type": "hello",
            "v_proto": PROTOCOL_VERSION,
            "n": config.n,
            "dt": config.dt,
            "duration": config.duration,
            "stealth_mode": config.stealth_mode,
            "flight_box": [list(b) for b in config.flight_box],
            "target_bounds": [list(b) for b in config.grid.q_bounds],
            "grid_counts": list(counts),
        }
    )


def build_heatmap(grid: ImportanceGrid, max_dim: int = HEATMAP_MAX_DIM) -> dict:
    """Top-down importance map: per-(x, y) column max of phi, downsampled
    by block maxima to at most max_dim cells per axis."""
    nx, ny, nz, nh, nv = grid.spec.axis_counts()
    cols = grid.phi.reshape(nv, nh, nz, ny, nx).max(axis=(0, 1, 2))  # (ny, nx)
    fy = max(1, math.ceil(ny / max_dim))
    fx = max(1, math.ceil(nx / max_dim))
    if fy > 1 or fx > 1:
        py = (-ny) % fy
        px = (-nx) % fx
        padded = np.pad(cols, ((0, py), (0, px)), mode="edge")
        cols = padded.reshape(padded.shape[0] // fy, fy, padded.shape[1] // fx, fx).max(axis=(1, 3))
    (x0, x1), (y0, y1), _ = grid.spec.q_bounds
    return {
        "nx": cols.shape[1],
        "ny": cols.shape[0],
        "x0": x0, "x1": x1, "y0": y0, "y1": y1,
        "values": [[float(v) for v in row] for row in cols],
    }


def state_frame_from_record(rec, grid: ImportanceGrid) -> StateFrame:
    """Build the cockpit snapshot from one telemetry record."""
    events = []
    if rec.saturated:
        events.append("saturated")
    if rec.boundary:
        events.append("boundary")
    if rec.branch_switch:
        events.append("branch_switch")
    if rec.relaxed:
        events.append("qp_" + rec.qp_status)
    if rec.rank_deficient:
        events.append("rank_deficient")
    return StateFrame(
        t=rec.t,
        drones=tuple(tuple(float(x) for x in row) for row in rec.poses),
        p_bar=tuple(float(x) for x in rec.p_bar),
        dir_bar=tuple(float(x) for x in rec.dir_bar),
        J=rec.J,
        heatmap=build_heatmap(grid),
        events=tuple(events),
    )
