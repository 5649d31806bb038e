"""Nullspace projectors that hide autonomous motion from the average state.

The operator steers only the swarm's average: mean position and the
normalized mean camera direction.  Autonomous coverage inputs are pushed
through a block projector A = diag(A_p, A_theta(g)) whose blocks
annihilate exactly the directions that move those averages:

* A_p = I - V (V^T V)^-1 V^T with V = ones(n) (x) I_3 — constant per n,
  removes the common (mean) translation component.
* A_theta(g) = I - W (W^T W)^-1 W^T, where W keeps two of the three
  columns of the transposed average-direction Jacobian.  The Jacobian's
  rows are orthogonal to the average direction, so its three columns span
  at most two dimensions and the dropped column is annihilated too.  The
  column to drop is chosen to maximize det(W^T W) (best conditioning; any
  choice is algebraically valid).

Any input of the form A(g) U then leaves both averages' velocities at
exactly zero, so the average-state trajectory is identical to the one
driven by the human command alone — box saturation aside, which the
engine logs as an event that voids the guarantee for that step.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import SwarmState, avg_dir_jacobian

DET_FLOOR = 1e-14
GRAM_REG = 1e-12


@dataclass(frozen=True, eq=False)
class StealthProjector:
    """Projector pair for one swarm state, with its kernel certificate."""

    A_p: np.ndarray
    A_theta: np.ndarray
    dropped_column: int
    kernel_residual: float
    rank_deficient: bool

    @property
    def n(self) -> int:
        return self.A_p.shape[0] // 3


@dataclass(frozen=True)
class StealthReport:
    """Velocity-level residuals of the average state under a projected input."""

    pos_residual: float
    dir_residual: float


@lru_cache(maxsize=64)
def projector_positions(n: int) -> np.ndarray:
    """Mean-translation annihilator I_{3n} - (1/n)(ones ones^T (x) I_3).

    Closed form of I - V (V^T V)^-1 V^T since V^T V = n I_3.  Symmetric,
    idempotent, rank 3(n-1); any uniform translation lies in its kernel.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    A = np.eye(3 * n) - np.kron(np.full((n, n), 1.0 / n), np.eye(3))
    A.setflags(write=False)
    return A


@lru_cache(maxsize=64)
def _averaging_map(n: int) -> np.ndarray:
    """V^T = (ones^T (x) I_3), the mean-translation reader; constant per n."""
    V = np.kron(np.ones((1, n)), np.eye(3))
    V.setflags(write=False)
    return V


@lru_cache(maxsize=64)
def _position_residual(n: int) -> float:
    """max |V^T A_p| — zero up to roundoff, computed once per n."""
    return float(np.abs(_averaging_map(n) @ projector_positions(n)).max())


def projector_orientations(swarm: SwarmState, eps_dir: float = 1e-9, jd: np.ndarray | None = None):
    """State-dependent annihilator of the average-direction Jacobian.

    Returns (A_theta, dropped_column, rank_deficient).  When every
    two-column choice of W is near-singular the Gram matrix is Tikhonov
    regularized and the rank_deficient flag is set; the projector is still
    returned and the engine surfaces the flag in telemetry.
    """
    J = avg_dir_jacobian(swarm, eps_dir) if jd is None else jd
    E = J.T  # (2n, 3)
    two_n = E.shape[0]
    best_det, best_drop = -1.0, 0
    for drop in range(3):
        cols = [c for c in range(3) if c != drop]
        W = E[:, cols]
        det = float(np.linalg.det(W.T @ W))
        if det > best_det:
            best_det, best_drop = det, drop
    cols = [c for c in range(3) if c != best_drop]
    W = E[:, cols]
    G = W.T @ W
    rank_deficient = best_det < DET_FLOOR
    if rank_deficient:
        G = G + GRAM_REG * np.eye(2)
    if two_n == 2 and not rank_deficient:
        # W is square and invertible: the complement is exactly empty.
        return np.zeros((2, 2)), best_drop, rank_deficient
    A = np.eye(two_n) - W @ np.linalg.solve(G, W.T)
    A = 0.5 * (A + A.T)
    return A, best_drop, rank_deficient


def build_projector(swarm: SwarmState, eps_dir: float = 1e-9, jd: np.ndarray | None = None) -> StealthProjector:
    """Assemble both blocks and evaluate their kernel certificate."""
    if jd is None:
        jd = avg_dir_jacobian(swarm, eps_dir)
    n = swarm.n
    A_p = projector_positions(n)
    A_theta, dropped, rank_deficient = projector_orientations(swarm, eps_dir, jd=jd)
    res_p = _position_residual(n)
    res_t = float(np.abs(jd @ A_theta).max())
    return StealthProjector(
        A_p=A_p,
        A_theta=A_theta,
        dropped_column=dropped,
        kernel_residual=max(res_p, res_t),
        rank_deficient=rank_deficient,
    )


def full_matrix(proj: StealthProjector) -> np.ndarray:
    """The 5n x 5n block-diagonal projector diag(A_p, A_theta)."""
    n = proj.n
    A = np.zeros((5 * n, 5 * n))
    A[: 3 * n, : 3 * n] = proj.A_p
    A[3 * n :, 3 * n :] = proj.A_theta
    return A


def apply(proj: StealthProjector, U_c: np.ndarray) -> np.ndarray:
    """Project a collective input: positions through A_p, angles through A_theta."""
    n = proj.n
    U_c = np.asarray(U_c, dtype=float)
    if U_c.shape != (5 * n,):
        raise ValueError(f"expected a {5 * n}-vector, got shape {U_c.shape}")
    out = np.empty_like(U_c)
    out[: 3 * n] = proj.A_p @ U_c[: 3 * n]
    out[3 * n :] = proj.A_theta @ U_c[3 * n :]
    return out


def stealth_certificate(swarm: SwarmState, U_c: np.ndarray, proj: StealthProjector | None = None) -> StealthReport:
    """Velocity-level check of average invariance for a projected input.

    Computes the mean translational velocity and the average-direction
    velocity that A(g) U_c would induce; both are zero up to roundoff for
    any U_c at any valid swarm state.
    """
    if proj is None:
        proj = build_projector(swarm)
    n = swarm.n
    U_a = apply(proj, U_c)
    mean_v = U_a[: 3 * n].reshape(n, 3).mean(axis=0)
    jd = avg_dir_jacobian(swarm)
    dir_v = jd @ U_a[3 * n :]
    return StealthReport(
        pos_residual=float(np.linalg.norm(mean_v)),
        dir_residual=float(np.linalg.norm(dir_v)),
    )
