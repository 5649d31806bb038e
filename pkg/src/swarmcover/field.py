"""Discretized 5D view grid, importance dynamics, partition, and objective.

The view space is (target position in R^3) x (horizontal view angle) x
(vertical view angle), discretized into m equal cells.  Each cell carries
an importance index phi in [0, 1]; the coverage objective J is the mean
importance.  Cell ordering is fixed: x varies fastest, then y, z, phi_h,
phi_v — snapshots and telemetry are bit-comparable across runs.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import GridTooLarge
from .geometry import AverageState, SwarmState, unit_direction
from .sensing import CoverageParams, SensingParams, f1_kernel, f2_kernel

SNAPSHOT_MAGIC = b"SWARMGRID1"

# Cells are dropped from the rate pass when every drone's range error alone
# puts the f1 exponent below -CULL_EXPONENT and f2 is below CULL_F2_FLOOR;
# both scores are then < 1e-13 and the discarded rate is < delta * 4e-26.
CULL_EXPONENT = 30.0
CULL_F2_FLOOR = 1e-13


@dataclass(frozen=True)
class GridSpec:
    """Geometry of the view grid: axis bounds and the 5 cell edge lengths."""

    q_bounds: tuple
    phi_h_range: tuple
    phi_v_range: tuple
    cell_size: tuple
    phi_init: float = 1.0
    max_cells: int = 2_000_000

    def __post_init__(self):
        qb = tuple((float(lo), float(hi)) for lo, hi in self.q_bounds)
        if len(qb) != 3:
            raise ValueError("q_bounds must hold three (lo, hi) intervals")
        object.__setattr__(self, "q_bounds", qb)
        object.__setattr__(self, "phi_h_range", (float(self.phi_h_range[0]), float(self.phi_h_range[1])))
        object.__setattr__(self, "phi_v_range", (float(self.phi_v_range[0]), float(self.phi_v_range[1])))
        cs = tuple(float(s) for s in self.cell_size)
        if len(cs) != 5:
            raise ValueError("cell_size must hold 5 entries (3 lengths, 2 angles)")
        object.__setattr__(self, "cell_size", cs)
        for lo, hi in self.intervals():
            if not hi > lo:
                raise ValueError(f"empty interval ({lo}, {hi})")
        if any(s <= 0 for s in cs):
            raise ValueError("cell sizes must be positive")
        if not 0.0 <= self.phi_init <= 1.0:
            raise ValueError("phi_init must lie in [0, 1]")

    def intervals(self) -> tuple:
        return (*self.q_bounds, self.phi_h_range, self.phi_v_range)

    def axis_counts(self) -> tuple:
        """Cells per axis: ceil(range / size), guarded against float fuzz."""
        counts = []
        for (lo, hi), size in zip(self.intervals(), self.cell_size):
            counts.append(int(math.ceil(round((hi - lo) / size, 9))))
        return tuple(counts)

    @property
    def m(self) -> int:
        return int(np.prod(self.axis_counts()))


class ImportanceGrid:
    """Materialized grid: cell centers, importance values, and ownership.

    Cell arrays (q, phi_h, phi_v, tdir) are fixed for the grid's lifetime;
    phi and owner are replaced functionally via with_updates().
    """

    def __init__(self, spec, q, phi_h, phi_v, tdir, phi, owner):
        self.spec = spec
        self.q = q
        self.phi_h = phi_h
        self.phi_v = phi_v
        self.tdir = tdir
        self.phi = phi
        self.owner = owner

    @property
    def m(self) -> int:
        return self.phi.shape[0]

    def with_updates(self, phi=None, owner=None) -> "ImportanceGrid":
        return ImportanceGrid(
            self.spec,
            self.q,
            self.phi_h,
            self.phi_v,
            self.tdir,
            self.phi if phi is None else phi,
            self.owner if owner is None else owner,
        )


def build_grid(spec: GridSpec) -> ImportanceGrid:
    """Materialize the cell lattice described by a GridSpec.

    Cell centers sit at lo + (i + 1/2) * size along each axis; the lattice
    covers [lo, lo + count * size), which contains the requested range.
    """
    counts = spec.axis_counts()
    m = int(np.prod(counts))
    if m > spec.max_cells:
        raise GridTooLarge(f"grid would need {m} cells, cap is {spec.max_cells}")
    axes = []
    for (lo, _), size, count in zip(spec.intervals(), spec.cell_size, counts):
        axes.append(lo + (np.arange(count) + 0.5) * size)
    xs, ys, zs, hs, vs = axes
    # 'ij' mesh with axis order (v, h, z, y, x): C-order ravel makes x fastest.
    V, H, Z, Y, X = np.meshgrid(vs, hs, zs, ys, xs, indexing="ij")
    q = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    phi_h = H.ravel()
    phi_v = V.ravel()
    tdir = unit_direction(phi_h, phi_v)
    phi = np.full(m, spec.phi_init, dtype=float)
    owner = np.zeros(m, dtype=np.int64)
    return ImportanceGrid(spec, q, phi_h, phi_v, tdir, phi, owner)


def rate_kernel(k_max, phi, delta):
    """Importance rate: delta * k_max^2 * ((k_max + 1)/2 - phi).

    The equilibrium (k_max + 1)/2 lies in [0, 1] for k_max in [-1, 1], so
    trajectories started inside [0, 1] stay there.
    """
    k = np.asarray(k_max, dtype=float)
    return delta * k * k * (0.5 * (k + 1.0) - np.asarray(phi))


@dataclass
class FieldEval:
    """One fused evaluation pass over all cells at a fixed swarm state."""

    f1: np.ndarray      # (n, m) sensing scores, zero on skipped/culled cells
    f2: np.ndarray      # (m,) virtual-drone scores
    owner: np.ndarray   # (m,) partition assignment (argmax f1, lowest-index ties)
    k_max: np.ndarray   # (m,) rate drive, zero on skipped/culled cells
    arg_k: np.ndarray   # (m,) drone index achieving k_max
    phi_dot: np.ndarray  # (m,) importance rates
    active: np.ndarray  # (m,) cells that entered the rate computation
    skipped: int        # cells dropped because some distance < eps_range
    culled: int         # cells dropped by the distance/f2 cull


def _sensing(params) -> SensingParams:
    return params.sensing if isinstance(params, CoverageParams) else params


def evaluate_field(
    grid: ImportanceGrid,
    swarm: SwarmState,
    avg: AverageState,
    params: CoverageParams,
    cull: bool = True,
) -> FieldEval:
    """Compute scores, partition, k_max, and importance rates in one pass."""
    sp = params.sensing
    n, m = swarm.n, grid.m
    p = swarm.positions()
    dirs = unit_direction(swarm.yaws(), swarm.pitches())

    diff = grid.q[None, :, :] - p[:, None, :]          # (n, m, 3)
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    too_close = (dist < sp.eps_range).any(axis=0)

    r_bar = grid.q - avg.p_bar
    dist_bar = np.sqrt(np.einsum("ij,ij->i", r_bar, r_bar))
    too_close |= dist_bar < sp.eps_range
    safe_bar = np.maximum(dist_bar, sp.eps_range)
    rhat_bar = r_bar / safe_bar[:, None]
    f2 = f2_kernel(rhat_bar @ avg.dir_bar, -np.einsum("ij,ij->i", grid.tdir, rhat_bar), sp)

    if cull:
        cull_radius = sp.sigma3 * math.sqrt(2.0 * CULL_EXPONENT)
        culled = (np.abs(dist - sp.D) > cull_radius).all(axis=0) & (f2 < CULL_F2_FLOOR)
    else:
        culled = np.zeros(m, dtype=bool)
    active = ~(culled | too_close)
    idx = np.flatnonzero(active)

    f1 = np.zeros((n, m))
    if idx.size:
        d_a = dist[:, idx]
        rhat = diff[:, idx, :] / d_a[:, :, None]
        cos1 = np.einsum("ik,ijk->ij", dirs, rhat)
        cos2 = -np.einsum("jk,ijk->ij", grid.tdir[idx], rhat)
        f1[:, idx] = f1_kernel(cos1, cos2, d_a - sp.D, sp)

    owner = f1.argmax(axis=0)
    if params.kmax_mode == "literal":
        k_max = f2 - f1.min(axis=0)
        arg_k = f1.argmin(axis=0)
    else:
        k_max = f2 - f1.max(axis=0)
        arg_k = owner.copy()
    k_max = np.where(active, k_max, 0.0)
    arg_k = np.where(active, arg_k, 0)
    phi_dot = np.where(active, rate_kernel(k_max, grid.phi, params.delta), 0.0)

    return FieldEval(
        f1=f1,
        f2=f2,
        owner=owner,
        k_max=k_max,
        arg_k=arg_k,
        phi_dot=phi_dot,
        active=active,
        skipped=int(too_close.sum()),
        culled=int(culled.sum()),
    )


def partition(grid: ImportanceGrid, swarm: SwarmState, params) -> np.ndarray:
    """Assign each cell to the drone with the best f1 (ties: lowest index).

    Returns the (m,) owner array; culling is not applied here, so owners
    among far cells follow the exact (tiny) scores.
    """
    sp = _sensing(params)
    p = swarm.positions()
    dirs = unit_direction(swarm.yaws(), swarm.pitches())
    diff = grid.q[None, :, :] - p[:, None, :]
    dist = np.linalg.norm(diff, axis=2)
    safe = np.maximum(dist, sp.eps_range)
    rhat = diff / safe[:, :, None]
    cos1 = np.einsum("ik,ijk->ij", dirs, rhat)
    cos2 = -np.einsum("jk,ijk->ij", grid.tdir, rhat)
    f1 = f1_kernel(cos1, cos2, dist - sp.D, sp)
    return f1.argmax(axis=0)


def importance_rate(
    grid: ImportanceGrid,
    swarm: SwarmState,
    avg: AverageState,
    params: CoverageParams,
    cull: bool = True,
):
    """Importance rates plus the per-cell k_max and its achieving drone.

    Cells with an ill-conditioned line of sight are skipped (rate 0) and
    counted in the returned FieldEval.skipped.
    """
    return evaluate_field(grid, swarm, avg, params, cull=cull)


def step_importance(grid: ImportanceGrid, rates, dt: float) -> ImportanceGrid:
    """Explicit Euler update of phi with a [0, 1] safety clamp."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    phi_dot = rates.phi_dot if isinstance(rates, FieldEval) else np.asarray(rates)
    phi = np.clip(grid.phi + dt * phi_dot, 0.0, 1.0)
    return grid.with_updates(phi=phi)


def objective(grid: ImportanceGrid) -> float:
    """Coverage objective J: mean importance over all cells."""
    return float(grid.phi.sum() / grid.m)


def objective_local(grid: ImportanceGrid, i: int) -> float:
    """Drone i's share of J: sum of phi over its cells, divided by m.

    Requires grid.owner to be current (see partition / evaluate_field).
    """
    return float(grid.phi[grid.owner == i].sum() / grid.m)


def save_snapshot(grid: ImportanceGrid, path) -> None:
    """Dump (spec, phi) to a binary snapshot with a versioned magic header."""
    header = {
        "version": 1,
        "q_bounds": [list(b) for b in grid.spec.q_bounds],
        "phi_h_range": list(grid.spec.phi_h_range),
        "phi_v_range": list(grid.spec.phi_v_range),
        "cell_size": list(grid.spec.cell_size),
        "phi_init": grid.spec.phi_init,
        "max_cells": grid.spec.max_cells,
        "m": grid.m,
        "dtype": "<f8",
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(grid.phi.astype("<f8").tobytes())


def load_snapshot(path) -> ImportanceGrid:
    """Rebuild a grid from a snapshot written by save_snapshot."""
    with open(path, "rb") as fh:
        magic = fh.read(len(SNAPSHOT_MAGIC))
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"not a grid snapshot (magic {magic!r})")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode())
        if header.get("version") != 1:
            raise ValueError(f"unsupported snapshot version {header.get('version')}")
        spec = GridSpec(
            q_bounds=tuple(tuple(b) for b in header["q_bounds"]),
            phi_h_range=tuple(header["phi_h_range"]),
            phi_v_range=tuple(header["phi_v_range"]),
            cell_size=tuple(header["cell_size"]),
            phi_init=header["phi_init"],
            max_cells=header["max_cells"],
        )
        grid = build_grid(spec)
        phi = np.frombuffer(fh.read(8 * header["m"]), dtype="<f8").astype(float)
    if phi.shape[0] != grid.m:
        raise ValueError(f"snapshot has {phi.shape[0]} phi values for {grid.m} cells")
    return grid.with_updates(phi=phi)
