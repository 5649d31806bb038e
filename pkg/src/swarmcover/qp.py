"""Minimum-norm quadratic programs under linear inequality constraints.

Solves  min ||x||^2  s.t.  M x >= C  for small dense instances.  The
multiplier convention absorbs the factor 2 from the gradient of the
objective: at the optimum  x = M^T lambda  with lambda >= 0.

The default method enumerates active sets exactly (2^r candidate subsets)
— transparent and easily verified at the swarm sizes this package runs.
Larger instances fall back to Hildreth dual coordinate ascent.  Instances
with no feasible point are re-solved with a heavily weighted slack and
reported with status 'relaxed' instead of aborting.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import InfeasibleRow

KKT_TOL = 1e-9
GRAM_REG = 1e-12
ENUM_MAX = 12
SLACK_WEIGHT = 1e6


@dataclass(frozen=True, eq=False)
class InequalityQP:
    """min ||x||^2 subject to M x >= C."""

    M: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        C = np.atleast_1d(np.asarray(self.C, dtype=float))
        if M.shape[0] != C.shape[0]:
            raise ValueError(f"M has {M.shape[0]} rows but C has {C.shape[0]} entries")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "C", C)

    @property
    def r(self) -> int:
        return self.M.shape[0]

    @property
    def d(self) -> int:
        return self.M.shape[1]


@dataclass(eq=False)
class QPSolution:
    x: np.ndarray
    multipliers: np.ndarray
    active_set: tuple
    status: str  # optimal | relaxed | infeasible_row


@dataclass(frozen=True)
class KKTReport:
    stationarity: float
    primal: float
    complementarity: float


def solve_halfspace(a, c: float) -> np.ndarray:
    """Closed-form minimum-norm point of a single halfspace a.x >= c.

    Zero when the origin is feasible, otherwise the projection onto the
    boundary.  A zero normal with c > 0 is unsatisfiable.
    """
    a = np.asarray(a, dtype=float)
    if c <= 0.0:
        return np.zeros_like(a)
    nn = float(a @ a)
    if nn == 0.0:
        raise InfeasibleRow(f"zero constraint normal with positive bound {c}")
    return (c / nn) * a


def _solve_gram(G, c, reg):
    """Solve the (unit-diagonal) Gram system, regularizing only when the
    plain solve is singular or blows up — clean instances keep
    machine-precision multipliers."""
    k = G.shape[0]
    if k == 1:
        return c / G[0, 0]
    if k == 2:
        det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
        if abs(det) < reg:
            G = G + reg * np.eye(2)
            det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
        return np.array(
            [
                (G[1, 1] * c[0] - G[0, 1] * c[1]) / det,
                (G[0, 0] * c[1] - G[1, 0] * c[0]) / det,
            ]
        )
    try:
        lam = np.linalg.solve(G, c)
        if np.all(np.isfinite(lam)) and np.abs(lam).max(initial=0.0) < 1e14:
            return lam
    except np.linalg.LinAlgError:
        pass
    return np.linalg.solve(G + reg * np.eye(k), c)


def _enumerate(M, C, kkt_tol, gram_reg):
    """Exact active-set enumeration; returns (x, lambda, subset) or None.

    Rows are normalized before the regularized Gram solve so the
    regularization never dominates small-magnitude constraint rows; the
    multipliers are mapped back to the original row scaling.
    """
    r, d = M.shape
    scale = np.sqrt(np.einsum("ij,ij->i", M, M))
    scale[scale == 0.0] = 1.0
    Mn = M / scale[:, None]
    Cn = C / scale
    gram = Mn @ Mn.T
    best = None
    for size in range(r + 1):
        for S in combinations(range(r), size):
            idx = list(S)
            if size == 0:
                x = np.zeros(d)
                lam_S = np.zeros(0)
            else:
                try:
                    lam_S = _solve_gram(gram[np.ix_(idx, idx)], Cn[idx], gram_reg)
                except np.linalg.LinAlgError:
                    continue
                if (lam_S < -kkt_tol).any():
                    continue
                x = Mn[idx].T @ lam_S
            if (Mn @ x >= Cn - kkt_tol).all():
                nx = float(x @ x)
                if best is None or nx < best[0] - 1e-15:
                    lam = np.zeros(r)
                    lam[idx] = lam_S
                    best = (nx, x, lam / scale, tuple(idx))
    return best


def _hildreth(M, C, kkt_tol, max_iter, tol):
    """Dual coordinate ascent; returns (x, lambda, converged)."""
    r = M.shape[0]
    G = M @ M.T
    diag = np.diag(G).copy()
    lam = np.zeros(r)
    updatable = diag > 0.0
    for _ in range(max_iter):
        delta = 0.0
        for i in range(r):
            if not updatable[i]:
                continue
            new = max(0.0, lam[i] + (C[i] - G[i] @ lam) / diag[i])
            delta = max(delta, abs(new - lam[i]))
            lam[i] = new
        if delta < tol * (1.0 + np.abs(lam).max(initial=0.0)):
            break
    else:
        return M.T @ lam, lam, False
    x = M.T @ lam
    feasible = (M @ x >= C - 10 * kkt_tol).all()
    return x, lam, bool(feasible)


def solve(
    qp: InequalityQP,
    kkt_tol: float = KKT_TOL,
    enum_max: int = ENUM_MAX,
    gram_reg: float = GRAM_REG,
    slack_weight: float = SLACK_WEIGHT,
    hildreth_max_iter: int = 20000,
    hildreth_tol: float = 1e-12,
    method: str | None = None,
) -> QPSolution:
    """Solve the minimum-norm QP; degradation is encoded in status.

    Unsatisfiable zero rows are dropped (status 'infeasible_row'); when no
    feasible point exists the violation is minimized through a single
    slack variable (status 'relaxed').
    """
    M, C = qp.M, qp.C
    r, d = M.shape
    if r == 0:
        return QPSolution(np.zeros(d), np.zeros(0), (), "optimal")
    if (C <= 0.0).all():
        # Origin feasible: the minimum-norm solution is zero.
        return QPSolution(np.zeros(d), np.zeros(r), (), "optimal")

    row_norms = np.linalg.norm(M, axis=1)
    dead = row_norms == 0.0
    bad = dead & (C > kkt_tol)
    keep = np.flatnonzero(~dead)
    status = "infeasible_row" if bad.any() else "optimal"
    Mk, Ck = M[keep], C[keep]

    def finish(x, lam_k, active_local, status):
        lam = np.zeros(r)
        lam[keep] = lam_k
        active = tuple(int(keep[i]) for i in active_local)
        return QPSolution(x, lam, active, status)

    use_enum = method == "enumerate" or (method is None and keep.size <= enum_max)
    if use_enum:
        best = _enumerate(Mk, Ck, kkt_tol, gram_reg)
        if best is not None:
            _, x, lam_k, subset = best
            return finish(x, lam_k, subset, status)
        # No feasible subset: minimize the violation via one slack column.
        scale = 1.0 / np.sqrt(slack_weight)
        Mx = np.block([[Mk, np.full((Mk.shape[0], 1), scale)], [np.zeros((1, d)), np.ones((1, 1))]])
        Cx = np.concatenate([Ck, [0.0]])
        best = _enumerate(Mx, Cx, kkt_tol, gram_reg)
        if best is None:
            return finish(np.zeros(d), np.zeros(keep.size), (), "relaxed")
        _, xs, lam_x, subset = best
        active = tuple(i for i in subset if i < keep.size)
        return finish(xs[:d], lam_x[: keep.size], active, "relaxed")

    x, lam_k, converged = _hildreth(Mk, Ck, kkt_tol, hildreth_max_iter, hildreth_tol)
    active_local = tuple(int(i) for i in np.flatnonzero(lam_k > kkt_tol))
    if not converged and status == "optimal":
        status = "relaxed"
    return finish(x, lam_k, active_local, status)


def kkt_check(qp: InequalityQP, sol: QPSolution) -> KKTReport:
    """Residual report: stationarity, worst primal violation, worst
    complementarity product.  All below kkt_tol for an optimal solution."""
    M, C = qp.M, qp.C
    x, lam = sol.x, sol.multipliers
    stationarity = float(np.abs(x - M.T @ lam).max(initial=0.0))
    slack = M @ x - C
    primal = float(np.maximum(0.0, -slack).max(initial=0.0))
    complementarity = float(np.abs(lam * slack).max(initial=0.0))
    return KKTReport(stationarity, primal, complementarity)
