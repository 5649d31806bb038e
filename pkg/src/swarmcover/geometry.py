"""Pose types, camera-direction mappings, swarm averages, and their Jacobians.

Conventions shared by the whole package (this module is the single source
of truth for them):

* World frame is right-handed, z up.
* A drone pose is (p, yaw, pitch) with yaw kept in (-pi, pi] and pitch in
  (0, pi/2].  The camera direction of a pose is

      Dir(yaw, pitch) = [cos(pitch) cos(yaw), cos(pitch) sin(yaw), sin(pitch)]

  and the same mapping applies to a view target's (phi_h, phi_v).
* Stacked collective vectors are position-block-first:

      G = [p_1 .. p_n | theta_1 .. theta_n],   theta_i = [yaw_i, pitch_i]

  so G has length 5n with a 3n position block followed by a 2n angle
  block.  Every matrix in the package (constraint Jacobians, projectors,
  input vectors) uses this one ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDirectionSum

EPS_DIR_DEFAULT = 1e-9


def wrap_angle(a):
    """Wrap an angle (scalar or array) to the (-pi, pi] representative."""
    return np.pi - np.mod(np.pi - np.asarray(a), 2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class DroneState:
    """Pose of one drone: position [m], yaw and gimbal pitch [rad]."""

    p: np.ndarray
    yaw: float
    pitch: float

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.shape != (3,):
            raise ValueError(f"position must be a 3-vector, got shape {p.shape}")
        if not 0.0 < self.pitch <= math.pi / 2:
            raise ValueError(f"pitch must lie in (0, pi/2], got {self.pitch}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "yaw", float(wrap_angle(self.yaw)))
        object.__setattr__(self, "pitch", float(self.pitch))


@dataclass(frozen=True, eq=False)
class SwarmState:
    """Ordered collection of drone poses at a common time.

    The stacked pose arrays are built once at construction; callers must
    treat the returned arrays as read-only.
    """

    drones: tuple
    time: float = 0.0

    def __post_init__(self):
        drones = tuple(self.drones)
        if len(drones) < 1:
            raise ValueError("a swarm needs at least one drone")
        object.__setattr__(self, "drones", drones)
        object.__setattr__(self, "_pos", np.array([d.p for d in drones]))
        object.__setattr__(self, "_yaw", np.array([d.yaw for d in drones]))
        object.__setattr__(self, "_pitch", np.array([d.pitch for d in drones]))

    @property
    def n(self) -> int:
        return len(self.drones)

    def positions(self) -> np.ndarray:
        """(n, 3) array of positions."""
        return self._pos

    def yaws(self) -> np.ndarray:
        return self._yaw

    def pitches(self) -> np.ndarray:
        return self._pitch

    def stacked(self) -> np.ndarray:
        """Collective state G = [p_1..p_n | theta_1..theta_n] of length 5n."""
        ang = np.column_stack([self.yaws(), self.pitches()])
        return np.concatenate([self.positions().ravel(), ang.ravel()])


@dataclass(frozen=True, eq=False)
class AverageState:
    """Mean position and normalized mean camera direction of the swarm."""

    p_bar: np.ndarray
    dir_bar: np.ndarray


@dataclass(frozen=True, eq=False)
class ViewTarget:
    """A view-space point: target position plus desired viewing angles."""

    q: np.ndarray
    phi_h: float
    phi_v: float

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.shape != (3,):
            raise ValueError(f"target position must be a 3-vector, got {q.shape}")
        object.__setattr__(self, "q", q)


def unit_direction(yaw, pitch) -> np.ndarray:
    """Direction vector(s) for yaw/pitch angle pairs (broadcasting).

    Returns shape (..., 3); unit norm by construction.
    """
    yaw = np.asarray(yaw, dtype=float)
    pitch = np.asarray(pitch, dtype=float)
    cv, sv = np.cos(pitch), np.sin(pitch)
    return np.stack([cv * np.cos(yaw), cv * np.sin(yaw), sv], axis=-1)


def dir_of_drone(state: DroneState) -> np.ndarray:
    """Camera direction of a drone pose (unit 3-vector)."""
    return unit_direction(state.yaw, state.pitch)


def dir_of_target(target: ViewTarget) -> np.ndarray:
    """Desired viewing direction of a view target (unit 3-vector)."""
    return unit_direction(target.phi_h, target.phi_v)


def direction_jacobian(yaw, pitch) -> np.ndarray:
    """Derivative of unit_direction w.r.t. (yaw, pitch), shape (..., 3, 2).

    Column 0 is d/d(yaw), column 1 is d/d(pitch).
    """
    yaw = np.asarray(yaw, dtype=float)
    pitch = np.asarray(pitch, dtype=float)
    ch, sh = np.cos(yaw), np.sin(yaw)
    cv, sv = np.cos(pitch), np.sin(pitch)
    zero = np.zeros_like(ch)
    col_yaw = np.stack([-cv * sh, cv * ch, zero], axis=-1)
    col_pitch = np.stack([-sv * ch, -sv * sh, cv], axis=-1)
    return np.stack([col_yaw, col_pitch], axis=-1)


def dir_jacobian(state: DroneState) -> np.ndarray:
    """3x2 Jacobian of the camera direction w.r.t. [yaw, pitch]."""
    return direction_jacobian(state.yaw, state.pitch)


def average_state(swarm: SwarmState, eps_dir: float = EPS_DIR_DEFAULT) -> AverageState:
    """Average position and normalized direction sum of the swarm.

    The position mean is computed centered on the first drone, which keeps
    it exact when all drones coincide and well-conditioned when clustered.
    Raises DegenerateDirectionSum when the direction sum has norm <= eps_dir
    (camera directions cancel; the average orientation is undefined).
    """
    pos = swarm.positions()
    p_bar = pos[0] + (pos - pos[0]).mean(axis=0)
    dirs = unit_direction(swarm.yaws(), swarm.pitches())
    s = dirs.sum(axis=0)
    norm = np.linalg.norm(s)
    if norm <= eps_dir:
        raise DegenerateDirectionSum(
            f"direction sum norm {norm:.3e} <= eps_dir {eps_dir:.3e}"
        )
    return AverageState(p_bar=p_bar, dir_bar=s / norm)


def avg_dir_jacobian(swarm: SwarmState, eps_dir: float = EPS_DIR_DEFAULT) -> np.ndarray:
    """Jacobian of the normalized average direction w.r.t. the stacked
    angle block [yaw_1, pitch_1, ..., yaw_n, pitch_n]; shape (3, 2n).

    Equals (I - d d^T)/||s|| applied columnwise to the per-drone direction
    Jacobians, where s is the direction sum and d = s/||s||.  Its rows are
    orthogonal to the average direction.
    """
    dirs = unit_direction(swarm.yaws(), swarm.pitches())
    s = dirs.sum(axis=0)
    norm = np.linalg.norm(s)
    if norm <= eps_dir:
        raise DegenerateDirectionSum(
            f"direction sum norm {norm:.3e} <= eps_dir {eps_dir:.3e}"
        )
    d = s / norm
    proj = (np.eye(3) - np.outer(d, d)) / norm
    blocks = direction_jacobian(swarm.yaws(), swarm.pitches())  # (n, 3, 2)
    full = np.concatenate([proj @ blocks[i] for i in range(swarm.n)], axis=1)
    return full


def stack_blocks(pos: np.ndarray, ang: np.ndarray) -> np.ndarray:
    """Assemble a 5n collective vector from (n,3) positions and (n,2) angles."""
    return np.concatenate([np.asarray(pos).ravel(), np.asarray(ang).ravel()])


def unstack_blocks(vec: np.ndarray, n: int):
    """Split a 5n collective vector into (n,3) position and (n,2) angle parts."""
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (5 * n,):
        raise ValueError(f"expected a {5 * n}-vector, got shape {vec.shape}")
    return vec[: 3 * n].reshape(n, 3), vec[3 * n :].reshape(n, 2)
