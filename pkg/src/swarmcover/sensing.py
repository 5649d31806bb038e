"""Sensing performance scores for drone/target pairs and their gradients.

Two scores are used throughout:

* ``f1(pose, target)`` scores how well one drone observes a view cell:
  alignment of its optical axis with the line of sight, alignment of the
  line of sight with the cell's desired viewing direction, and range close
  to the optimal distance D.
* ``f2(average, target)`` scores the same alignment terms for the virtual
  average drone; it has no range term.

Both are Gaussians in (1 - cos) of the two alignment angles (and in the
range error for f1), so they live in (0, 1].  All code here works with the
cosines directly; arccos is never evaluated because the exponent depends
only on (1 - cos) and the inverse map is singular at perfect alignment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TargetTooClose
from .geometry import (
    AverageState,
    DroneState,
    ViewTarget,
    dir_of_drone,
    dir_of_target,
    dir_jacobian,
    direction_jacobian,
    unit_direction,
)


@dataclass(frozen=True)
class SensingParams:
    """Scalar parameters of the sensing scores.

    D is the optimal viewing distance; sigma1/sigma2/sigma3 set the f1
    sensitivities (axis alignment, view-direction alignment, range) and
    sigma1_bar/sigma2_bar the two f2 sensitivities.  eps_range guards the
    minimum drone-to-target distance.
    """

    D: float = 1.4
    sigma1: float = 0.15
    sigma2: float = 0.15
    sigma3: float = 0.3
    sigma1_bar: float = 0.12
    sigma2_bar: float = 0.12
    eps_range: float = 1e-3

    def __post_init__(self):
        for name in ("D", "sigma1", "sigma2", "sigma3", "sigma1_bar", "sigma2_bar", "eps_range"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class CoverageParams:
    """All scalars of the coverage stack: sensing scores, the importance
    ODE gain delta, the decay floor gamma, the barrier gain a (linear
    class-K), the per-component coverage input bound, and the k_max
    reading mode ('literal' keeps the max over drones of f2 - f1 exactly
    as written; 'best_observer' uses f2 minus the best f1)."""

    sensing: SensingParams = SensingParams()
    delta: float = 0.5
    gamma: float = 0.0004
    alpha_gain: float = 1.0
    u_c_bound: float = 0.05
    kmax_mode: str = "literal"

    def __post_init__(self):
        if self.delta <= 0 or self.gamma < 0 or self.alpha_gain <= 0 or self.u_c_bound <= 0:
            raise ValueError("delta, alpha_gain, u_c_bound must be positive; gamma nonnegative")
        if self.kmax_mode not in ("literal", "best_observer"):
            raise ValueError(f"unknown kmax_mode {self.kmax_mode!r}")


def f1_kernel(cos1, cos2, rho, params: SensingParams):
    """The f1 exponential in terms of its three scalar ingredients.

    Broadcasts over array inputs; exposed so tests can probe the kernel
    identity without constructing a geometric configuration.
    """
    e = (
        -((1.0 - np.asarray(cos1)) ** 2) / (2.0 * params.sigma1**2)
        - ((1.0 - np.asarray(cos2)) ** 2) / (2.0 * params.sigma2**2)
        - np.asarray(rho) ** 2 / (2.0 * params.sigma3**2)
    )
    return np.exp(e)


def f2_kernel(cos1, cos2, params: SensingParams):
    """The f2 exponential (no range term) in terms of its two cosines."""
    e = (
        -((1.0 - np.asarray(cos1)) ** 2) / (2.0 * params.sigma1_bar**2)
        - ((1.0 - np.asarray(cos2)) ** 2) / (2.0 * params.sigma2_bar**2)
    )
    return np.exp(e)


def _line_of_sight(p: np.ndarray, q: np.ndarray, eps_range: float):
    r = q - p
    dist = float(np.linalg.norm(r))
    if dist < eps_range:
        raise TargetTooClose(f"distance {dist:.3e} < eps_range {eps_range:.3e}")
    return r / dist, dist


def f1_eval(state: DroneState, target: ViewTarget, params: SensingParams) -> float:
    """Sensing performance of one drone for one view cell, in (0, 1]."""
    rhat, dist = _line_of_sight(state.p, target.q, params.eps_range)
    cos1 = float(dir_of_drone(state) @ rhat)
    cos2 = float(-dir_of_target(target) @ rhat)
    return float(f1_kernel(cos1, cos2, dist - params.D, params))


def f1_grad(state: DroneState, target: ViewTarget, params: SensingParams) -> np.ndarray:
    """Gradient of f1 w.r.t. the drone's [p_x, p_y, p_z, yaw, pitch]."""
    rhat, dist = _line_of_sight(state.p, target.q, params.eps_range)
    d = dir_of_drone(state)
    e = dir_of_target(target)
    cos1 = float(d @ rhat)
    cos2 = float(-e @ rhat)
    rho = dist - params.D
    val = float(f1_kernel(cos1, cos2, rho, params))

    # dE/dcos1, dE/dcos2, dE/drho of the exponent E
    a1 = (1.0 - cos1) / params.sigma1**2
    a2 = (1.0 - cos2) / params.sigma2**2
    a3 = -rho / params.sigma3**2

    dcos1_dp = (cos1 * rhat - d) / dist
    dcos2_dp = (e + cos2 * rhat) / dist
    drho_dp = -rhat
    grad_p = a1 * dcos1_dp + a2 * dcos2_dp + a3 * drho_dp
    grad_ang = a1 * (dir_jacobian(state).T @ rhat)
    return val * np.concatenate([grad_p, grad_ang])


def f2_eval(avg: AverageState, target: ViewTarget, params: SensingParams) -> float:
    """Sensing performance of the virtual average drone for one view cell."""
    rhat, _ = _line_of_sight(avg.p_bar, target.q, params.eps_range)
    cos1 = float(avg.dir_bar @ rhat)
    cos2 = float(-dir_of_target(target) @ rhat)
    return float(f2_kernel(cos1, cos2, params))


def f1_grad_many(
    p: np.ndarray,
    yaw: np.ndarray,
    pitch: np.ndarray,
    q: np.ndarray,
    tdir: np.ndarray,
    params: SensingParams,
) -> np.ndarray:
    """Vectorized f1 gradient for paired pose/cell arrays.

    p, q, tdir have shape (m, 3); yaw, pitch shape (m,).  Returns (m, 5)
    gradients w.r.t. each row's own [p, yaw, pitch].  Rows closer than
    eps_range are the caller's responsibility (no guard here).
    """
    r = q - p
    dist = np.sqrt(np.einsum("ij,ij->i", r, r))
    rhat = r / dist[:, None]
    d = unit_direction(yaw, pitch)
    cos1 = np.einsum("ij,ij->i", d, rhat)
    cos2 = -np.einsum("ij,ij->i", tdir, rhat)
    rho = dist - params.D
    val = f1_kernel(cos1, cos2, rho, params)

    a1 = (1.0 - cos1) / params.sigma1**2
    a2 = (1.0 - cos2) / params.sigma2**2
    a3 = -rho / params.sigma3**2

    grad_p = (
        a1[:, None] * (cos1[:, None] * rhat - d)
        + a2[:, None] * (tdir + cos2[:, None] * rhat)
    ) / dist[:, None] - a3[:, None] * rhat
    jac = direction_jacobian(yaw, pitch)  # (m, 3, 2)
    grad_ang = a1[:, None] * np.einsum("ijk,ij->ik", jac, rhat)
    return val[:, None] * np.concatenate([grad_p, grad_ang], axis=1)
