"""Barrier values, collective constraint Jacobian, and right-hand side.

Each drone carries a barrier b_i = I_i - |V_i| * gamma / m, where I_i is
the decay rate of its share of the objective.  Keeping every b_i >= 0
makes the whole objective decay at rate gamma or faster.  The QP layer
consumes the stacked linear constraint  B U >= C  assembled here.

Differentiation is on the frozen branch: the partition and the per-cell
argmax of the rate drive are treated as constants within a control step,
and the virtual drone's score f2 is held fixed (its drift through the
average state is exactly cancelled under stealthy control and dropped by
convention otherwise).  Branch switches between steps are surfaced as
events by the engine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import FieldEval, ImportanceGrid, evaluate_field
from .geometry import AverageState, SwarmState
from .sensing import CoverageParams, f1_grad_many


@dataclass(frozen=True)
class ClassK:
    """Linear extended class-K function alpha(x) = gain * x."""

    gain: float = 1.0

    def __post_init__(self):
        if self.gain <= 0:
            raise ValueError("class-K gain must be positive")

    def __call__(self, x):
        return self.gain * np.asarray(x, dtype=float)


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    """Stacked barrier state for one control step.

    b: per-drone barrier values (n,)
    B: d(b)/d(G) on the frozen branch, shape (n, 5n) in the collective
       position-block-first layout
    C: right-hand side of B U >= C, shape (n,)
    feedthrough: the importance-drift terms sum_j (db_i/dphi_j) phidot_j,
       kept for diagnostics (C = -feedthrough - alpha(b))
    counts: |V_i| cell counts per drone
    """

    b: np.ndarray
    B: np.ndarray
    C: np.ndarray
    feedthrough: np.ndarray
    counts: np.ndarray

    @property
    def n(self) -> int:
        return self.b.shape[0]


def assemble(
    grid: ImportanceGrid,
    swarm: SwarmState,
    avg: AverageState,
    params: CoverageParams,
    alpha=None,
    field_eval: FieldEval | None = None,
) -> ConstraintSystem:
    """Build the full constraint system from one field evaluation.

    Passing field_eval shares the rate pass with the engine so the
    feedthrough terms use the exact same phi_dot values that advance the
    grid this step.
    """
    if alpha is None:
        alpha = ClassK(params.alpha_gain)
    fe = field_eval if field_eval is not None else evaluate_field(grid, swarm, avg, params)
    n, m = swarm.n, grid.m
    delta = params.delta

    counts = np.bincount(fe.owner, minlength=n).astype(np.int64)
    decay = np.bincount(fe.owner, weights=fe.phi_dot, minlength=n)
    b = -decay / m - counts * (params.gamma / m)

    # db_i/dphi_j = delta * k_max^2 / m for j in V_i
    feed = (delta / m) * np.bincount(
        fe.owner, weights=fe.k_max * fe.k_max * fe.phi_dot, minlength=n
    )
    C = -feed - alpha(b)

    B = np.zeros((n, 5 * n))
    sel = np.flatnonzero(fe.active)
    if sel.size:
        # Cells whose selected score has underflowed contribute gradients
        # bounded by ~1e2 * f1, far below double precision at the row scale.
        sel = sel[fe.f1[fe.arg_k[sel], sel] > 1e-14]
    if sel.size:
        l = fe.arg_k[sel]
        k = fe.k_max[sel]
        w = 2.0 * k * (0.5 * (k + 1.0) - grid.phi[sel]) + 0.5 * k * k
        grads = f1_grad_many(
            swarm.positions()[l],
            swarm.yaws()[l],
            swarm.pitches()[l],
            grid.q[sel],
            grid.tdir[sel],
            params.sensing,
        )
        coeff = (delta / m) * w
        key = fe.owner[sel] * n + l
        cols = np.arange(n)
        for c in range(3):
            acc = np.bincount(key, weights=coeff * grads[:, c], minlength=n * n)
            B[:, 3 * cols + c] = acc.reshape(n, n)
        for c in (3, 4):
            acc = np.bincount(key, weights=coeff * grads[:, c], minlength=n * n)
            B[:, 3 * n + 2 * cols + (c - 3)] = acc.reshape(n, n)

    return ConstraintSystem(b=b, B=B, C=C, feedthrough=feed, counts=counts)


def barrier_values(grid, swarm, avg, params, field_eval=None) -> np.ndarray:
    """Per-drone barrier values b_i = -J_i' - |V_i| gamma / m."""
    return assemble(grid, swarm, avg, params, field_eval=field_eval).b


def jacobian(grid, swarm, avg, params, field_eval=None) -> np.ndarray:
    """Frozen-branch derivative of the barrier vector w.r.t. G, (n, 5n)."""
    return assemble(grid, swarm, avg, params, field_eval=field_eval).B


def rhs(grid, swarm, avg, params, alpha=None, field_eval=None) -> np.ndarray:
    """Right-hand side C of the collective inequality B U >= C."""
    return assemble(grid, swarm, avg, params, alpha=alpha, field_eval=field_eval).C


def per_drone_row(system: ConstraintSystem, i: int):
    """Drone i's own constraint row: its diagonal 5-column block and c_i.

    Cross-drone couplings present in the full B are discarded; this is the
    per-drone QP mode's view of the constraint.
    """
    n = system.n
    if not 0 <= i < n:
        raise IndexError(f"drone index {i} out of range for n={n}")
    row = np.concatenate(
        [system.B[i, 3 * i : 3 * i + 3], system.B[i, 3 * n + 2 * i : 3 * n + 2 * i + 2]]
    )
    return row, float(system.C[i])
