"""Closed-loop simulation: command sources, controller, integration, telemetry.

One control step runs the pipeline
    field evaluation -> constraint assembly -> coverage QP -> input mix
and then integrates the pure-velocity drone dynamics with explicit Euler.
Three controller modes exist:

* ``stealthy``   — solve min ||U_c||^2 s.t. B A(g) U_c >= C, clamp U_c
  component-wise, then project: U_a = A(g) U_c.  Clamping before the
  projection keeps U_a inside the image of A, so the average state is
  untouched even on saturated steps.
* ``per_drone``  — each drone solves its own halfspace QP from its own
  constraint row; no projection, so autonomous motion leaks into the
  average (the comparison baseline).
* ``off``        — U_a = 0; drones follow the human command alone.

Positions are clamped into the flight box and pitch into its bounds after
each step; any clamp raises a boundary event (the stealthiness guarantee
is void for that step and the telemetry says so).
"""

from __future__ import annotations

import json
import math
import threading
import time
from bisect import bisect_right
from dataclasses import dataclass, field, replace

import numpy as np

from . import qp as qp_mod
from .constraint import ClassK, assemble, per_drone_row
from .errors import InfeasibleRow, ScenarioError
from .field import GridSpec, build_grid, evaluate_field, objective, step_importance
from .geometry import (
    DroneState,
    SwarmState,
    average_state,
    avg_dir_jacobian,
    unit_direction,
    wrap_angle,
)
from .sensing import CoverageParams
from .stealth import build_projector, full_matrix, projector_positions

STEALTH_MODES = ("stealthy", "per_drone", "off")


@dataclass(frozen=True)
class HumanCommand:
    """Operator command: velocity v [m/s] and angular rates w [rad/s].

    w is ordered (pitch_rate, yaw_rate) — the wire convention; the engine
    reorders into the state's (yaw, pitch) layout when building inputs.
    A disengaged command is all zero by definition.
    """

    v: tuple = (0.0, 0.0, 0.0)
    w: tuple = (0.0, 0.0)
    engaged: bool = False

    def __post_init__(self):
        object.__setattr__(self, "v", tuple(float(x) for x in self.v))
        object.__setattr__(self, "w", tuple(float(x) for x in self.w))
        if len(self.v) != 3 or len(self.w) != 2:
            raise ValueError("v must have 3 entries and w 2")


ZERO_COMMAND = HumanCommand()


@dataclass(frozen=True)
class CommandSpec:
    """Scenario-level descriptor of where commands come from."""

    source: str = "zero"  # zero | circle | replay | live
    omega: float = 0.05
    path: str | None = None
    staleness_timeout: float = 0.5

    def __post_init__(self):
        if self.source not in ("zero", "circle", "replay", "live"):
            raise ScenarioError(f"unknown command source {self.source!r}")


class ZeroSource:
    """Always disengaged."""

    def poll(self, t: float) -> HumanCommand:
        return ZERO_COMMAND


class CircleSource:
    """Scripted horizontal circle: v = (-w sin wt, w cos wt, 0), no rotation."""

    def __init__(self, omega: float = 0.05):
        self.omega = omega

    def poll(self, t: float) -> HumanCommand:
        w = self.omega
        return HumanCommand(v=(-w * math.sin(w * t), w * math.cos(w * t), 0.0), engaged=True)


class ReplaySource:
    """Zero-order hold over a recorded command log."""

    def __init__(self, records):
        self.times = [t for t, _ in records]
        self.commands = [c for _, c in records]
        if any(b < a for a, b in zip(self.times, self.times[1:])):
            raise ScenarioError("replay log times must be non-decreasing")

    @classmethod
    def from_path(cls, path):
        records = []
        try:
            with open(path) as fh:
                for line_no, line in enumerate(fh, 1):
                    line = line.strip()
                    if not line:
                        continue
                    doc = json.loads(line)
                    records.append(
                        (
                            float(doc["t"]),
                            HumanCommand(
                                v=tuple(doc["v"]), w=tuple(doc["w"]), engaged=bool(doc["engaged"])
                            ),
                        )
                    )
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ScenarioError(f"malformed command log {path}: {exc}") from exc
        return cls(records)

    def poll(self, t: float) -> HumanCommand:
        k = bisect_right(self.times, t) - 1
        return self.commands[k] if k >= 0 else ZERO_COMMAND


class CommandMailbox:
    """Capacity-one, newest-wins handoff between network and control loop.

    put() and take() are non-blocking; the loop never waits on a client.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._item = None

    def put(self, cmd: HumanCommand) -> None:
        with self._lock:
            self._item = cmd

    def take(self):
        with self._lock:
            item, self._item = self._item, None
            return item


class LiveSource:
    """Feeds mailbox commands into the loop with a staleness timeout.

    The last engaged command is held while the client stays silent up to
    the timeout (wall-clock), after which the command decays to zero.
    """

    def __init__(self, mailbox: CommandMailbox, staleness_timeout: float = 0.5, clock=time.monotonic):
        self.mailbox = mailbox
        self.timeout = staleness_timeout
        self.clock = clock
        self._last = ZERO_COMMAND
        self._stamp = None

    def poll(self, t: float) -> HumanCommand:
        item = self.mailbox.take()
        now = self.clock()
        if item is not None:
            self._last = item
            self._stamp = now
        if not self._last.engaged or self._stamp is None:
            return ZERO_COMMAND
        if now - self._stamp > self.timeout:
            return ZERO_COMMAND
        return self._last


def command_source_zero() -> ZeroSource:
    return ZeroSource()


def command_source_circle(omega: float = 0.05) -> CircleSource:
    return CircleSource(omega)


def command_source_replay(log_path) -> ReplaySource:
    return ReplaySource.from_path(log_path)


def command_source_live(mailbox: CommandMailbox, staleness_timeout: float = 0.5, clock=time.monotonic) -> LiveSource:
    return LiveSource(mailbox, staleness_timeout, clock)


def make_command_source(spec: CommandSpec, mailbox: CommandMailbox | None = None):
    if spec.source == "zero":
        return command_source_zero()
    if spec.source == "circle":
        return command_source_circle(spec.omega)
    if spec.source == "replay":
        if not spec.path:
            raise ScenarioError("replay command source needs a path")
        return command_source_replay(spec.path)
    if spec.source == "live":
        return command_source_live(mailbox or CommandMailbox(), spec.staleness_timeout)
    raise ScenarioError(f"unknown command source {spec.source!r}")


@dataclass(frozen=True)
class SimConfig:
    """Everything a run needs; serializable to/from a scenario document."""

    grid: GridSpec
    n: int = 3
    dt: float = 0.1
    duration: float = 60.0
    params: CoverageParams = field(default_factory=CoverageParams)
    stealth_mode: str = "stealthy"
    flight_box: tuple = ((-4.0, 4.0), (-4.0, 4.0), (2.0, 2.4))
    pitch_bounds: tuple = (0.15, math.pi / 2)
    command: CommandSpec = field(default_factory=CommandSpec)
    seed: int = 0
    initial_poses: tuple | str | None = None  # explicit rows | "random" | None = ring
    ring_radius: float = 0.5
    ring_pitch: float = math.pi / 4
    eps_dir: float = 1e-9

    def __post_init__(self):
        if self.n < 1:
            raise ScenarioError("n must be >= 1")
        if self.dt <= 0:
            raise ScenarioError("dt must be positive")
        if self.duration < self.dt:
            raise ScenarioError("duration must be at least one step")
        if self.stealth_mode not in STEALTH_MODES:
            raise ScenarioError(f"stealth_mode must be one of {STEALTH_MODES}")
        box = tuple((float(lo), float(hi)) for lo, hi in self.flight_box)
        if len(box) != 3 or any(hi <= lo for lo, hi in box):
            raise ScenarioError("flight_box needs three nonempty intervals")
        object.__setattr__(self, "flight_box", box)
        pb = (float(self.pitch_bounds[0]), float(self.pitch_bounds[1]))
        if not (0.0 < pb[0] < pb[1] <= math.pi / 2):
            raise ScenarioError("pitch_bounds must be a nonempty interval inside (0, pi/2]")
        object.__setattr__(self, "pitch_bounds", pb)
        if isinstance(self.initial_poses, str) and self.initial_poses != "random":
            raise ScenarioError("initial_poses must be explicit rows, 'random', or null")
        if not isinstance(self.initial_poses, (str, type(None))):
            rows = tuple(tuple(float(x) for x in row) for row in self.initial_poses)
            if len(rows) != self.n or any(len(r) != 5 for r in rows):
                raise ScenarioError(f"initial_poses must hold {self.n} rows of 5 values")
            object.__setattr__(self, "initial_poses", rows)

    @property
    def steps(self) -> int:
        return max(1, int(round(self.duration / self.dt)))


def initial_swarm(config: SimConfig) -> SwarmState:
    """Build the starting swarm: explicit rows, seeded random, or the ring.

    The ring places drones evenly on a circle around the flight-box center
    with outward headings and a common pitch, which puts the average pose
    exactly at the center with the average direction straight up.
    """
    box = config.flight_box
    if isinstance(config.initial_poses, tuple):
        drones = [
            DroneState(p=np.array(row[:3]), yaw=row[3], pitch=row[4])
            for row in config.initial_poses
        ]
        return SwarmState(drones=tuple(drones))
    if config.initial_poses == "random":
        rng = np.random.default_rng(config.seed)
        drones = []
        for _ in range(config.n):
            p = np.array([rng.uniform(lo, hi) for lo, hi in box])
            yaw = rng.uniform(-math.pi, math.pi)
            pitch = rng.uniform(*config.pitch_bounds)
            drones.append(DroneState(p=p, yaw=yaw, pitch=pitch))
        return SwarmState(drones=tuple(drones))
    center = np.array([(lo + hi) / 2 for lo, hi in box])
    drones = []
    for i in range(config.n):
        ang = 2.0 * math.pi * i / config.n
        p = center + config.ring_radius * np.array([math.cos(ang), math.sin(ang), 0.0])
        drones.append(DroneState(p=p, yaw=ang, pitch=config.ring_pitch))
    return SwarmState(drones=tuple(drones))


def human_input_vector(cmd: HumanCommand, n: int) -> np.ndarray:
    """Replicate a command across drones in the collective layout.

    The command's w = (pitch_rate, yaw_rate) is reordered into the state's
    (yaw, pitch) angle blocks.
    """
    if not cmd.engaged:
        return np.zeros(5 * n)
    u = np.empty(5 * n)
    u[: 3 * n] = np.tile(cmd.v, n)
    u[3 * n :] = np.tile((cmd.w[1], cmd.w[0]), n)
    return u


@dataclass(frozen=True)
class StepRecord:
    """One telemetry row: the state at the step start plus what the
    controller did from that state."""

    step: int
    t: float
    poses: np.ndarray      # (n, 5) [x, y, z, yaw, pitch]
    p_bar: np.ndarray      # (3,)
    dir_bar: np.ndarray    # (3,)
    J: float
    b: np.ndarray          # (n,)
    uc_norm: float
    ua_norm: float
    res_pos: float
    res_dir: float
    qp_status: str
    saturated: bool
    boundary: bool
    branch_switch: bool
    relaxed: bool
    rank_deficient: bool
    skipped_cells: int
    phi_min: float
    phi_max: float
    kmax_min: float
    kmax_max: float
    dir_hold: float


class Telemetry:
    """Per-step records of one run, with CSV export and a JSON summary."""

    def __init__(self, n: int, dt: float):
        self.n = n
        self.dt = dt
        self.records: list[StepRecord] = []
        self.final_J: float = float("nan")
        self.wall_time: float = 0.0

    def append(self, rec: StepRecord) -> None:
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def avg_positions(self) -> np.ndarray:
        return np.array([r.p_bar for r in self.records])

    def avg_directions(self) -> np.ndarray:
        return np.array([r.dir_bar for r in self.records])

    def objectives(self) -> np.ndarray:
        return np.array([r.J for r in self.records])

    def integral_uc(self) -> float:
        return float(sum(r.uc_norm for r in self.records) * self.dt)

    def columns(self) -> list:
        cols = ["step", "time"]
        for i in range(self.n):
            cols += [f"px_{i}", f"py_{i}", f"pz_{i}", f"yaw_{i}", f"pitch_{i}"]
        cols += ["pbar_x", "pbar_y", "pbar_z", "dbar_x", "dbar_y", "dbar_z", "J"]
        cols += [f"b_{i}" for i in range(self.n)]
        cols += [
            "uc_norm", "ua_norm", "res_pos", "res_dir", "dir_hold", "qp_status",
            "ev_saturated", "ev_boundary", "ev_branch_switch", "ev_relaxed",
            "ev_rank_deficient", "skipped_cells",
            "phi_min", "phi_max", "kmax_min", "kmax_max",
        ]
        return cols

    def to_csv(self, path) -> None:
        """Write one row per step; float fields use shortest round-trip
        repr so identical runs produce byte-identical files."""
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(self.columns()) + "\n")
            for r in self.records:
                vals = [str(r.step), repr(r.t)]
                for row in r.poses:
                    vals += [repr(float(x)) for x in row]
                vals += [repr(float(x)) for x in r.p_bar]
                vals += [repr(float(x)) for x in r.dir_bar]
                vals.append(repr(r.J))
                vals += [repr(float(x)) for x in r.b]
                vals += [repr(r.uc_norm), repr(r.ua_norm), repr(r.res_pos), repr(r.res_dir), repr(r.dir_hold)]
                vals.append(r.qp_status)
                vals += [
                    str(int(r.saturated)), str(int(r.boundary)), str(int(r.branch_switch)),
                    str(int(r.relaxed)), str(int(r.rank_deficient)), str(r.skipped_cells),
                ]
                vals += [repr(r.phi_min), repr(r.phi_max), repr(r.kmax_min), repr(r.kmax_max)]
                fh.write(",".join(vals) + "\n")

    def summary(self) -> dict:
        recs = self.records
        return {
            "steps": len(recs),
            "n": self.n,
            "dt": self.dt,
            "final_J": self.final_J,
            "initial_J": recs[0].J if recs else float("nan"),
            "max_res_pos": max((r.res_pos for r in recs), default=0.0),
            "max_res_dir": max((r.res_dir for r in recs), default=0.0),
            "integral_uc": self.integral_uc(),
            "events": {
                "saturated": sum(r.saturated for r in recs),
                "boundary": sum(r.boundary for r in recs),
                "branch_switch": sum(r.branch_switch for r in recs),
                "relaxed": sum(r.relaxed for r in recs),
                "rank_deficient": sum(r.rank_deficient for r in recs),
                "skipped_cells": sum(r.skipped_cells for r in recs),
            },
            "wall_time_s": self.wall_time,
        }


@dataclass
class StepOutcome:
    U: np.ndarray
    U_c: np.ndarray
    U_a: np.ndarray
    qp_status: str
    saturated: bool
    rank_deficient: bool
    res_pos: float
    res_dir: float
    dir_hold: float = 0.0


def _direction_hold(swarm, U_theta_h, U_a_theta, dt, iterations: int = 2):
    """In-plane angle correction that keeps the discrete direction average
    on the human-only trajectory.

    The orientation projector zeroes the average-direction *velocity*, but
    the average direction is nonlinear in the angles, so a zero-order-hold
    step still drifts it by O(dt^2 ||u_theta||^2).  This Gauss-Newton
    correction (warm-started at zero, quadratically convergent) shifts the
    applied angle input so that the normalized direction sum after the
    step equals the one a pure human-command step would produce.  Returns
    the corrected U_a_theta and the correction magnitude.
    """
    n = swarm.n
    yaw0, pitch0 = swarm.yaws(), swarm.pitches()

    def dir_bar_after(u_theta):
        ang = u_theta.reshape(n, 2)
        s = unit_direction(yaw0 + dt * ang[:, 0], pitch0 + dt * ang[:, 1]).sum(axis=0)
        norm = np.linalg.norm(s)
        return s / norm if norm > 0 else s

    target = dir_bar_after(U_theta_h)
    delta = np.zeros(2 * n)
    jd = avg_dir_jacobian(swarm)
    for _ in range(iterations):
        r = dir_bar_after(U_theta_h + U_a_theta + delta) - target
        if np.abs(r).max() < 1e-16:
            break
        step, *_ = np.linalg.lstsq(dt * jd, -r, rcond=None)
        delta += step
    return U_a_theta + delta, float(np.linalg.norm(delta))


def controller_step(swarm, grid, avg, command, config, field_eval=None, jd=None) -> tuple:
    """Run the control pipeline at one state; returns (outcome, fe, system).

    The applied input is the replicated human command plus the autonomous
    part chosen by the configured mode.
    """
    n = config.n
    params = config.params
    fe = field_eval if field_eval is not None else evaluate_field(grid, swarm, avg, params)
    system = assemble(grid, swarm, avg, params, alpha=ClassK(params.alpha_gain), field_eval=fe)
    if jd is None:
        jd = avg_dir_jacobian(swarm, config.eps_dir)

    bound = params.u_c_bound
    rank_deficient = False
    dir_hold = 0.0
    if config.stealth_mode == "stealthy":
        proj = build_projector(swarm, config.eps_dir, jd=jd)
        rank_deficient = proj.rank_deficient
        A = full_matrix(proj)
        sol = qp_mod.solve(qp_mod.InequalityQP(system.B @ A, system.C))
        U_c = np.clip(sol.x, -bound, bound)
        saturated = bool((np.abs(sol.x) > bound).any())
        U_a = A @ U_c
        status = sol.status
    elif config.stealth_mode == "per_drone":
        U_c = np.zeros(5 * n)
        status = "optimal"
        saturated = False
        for i in range(n):
            row, c_i = per_drone_row(system, i)
            try:
                u_i = qp_mod.solve_halfspace(row, c_i)
            except InfeasibleRow:
                u_i = np.zeros(5)
                status = "infeasible_row"
            clipped = np.clip(u_i, -bound, bound)
            saturated = saturated or bool((np.abs(u_i) > bound).any())
            U_c[3 * i : 3 * i + 3] = clipped[:3]
            U_c[3 * n + 2 * i : 3 * n + 2 * i + 2] = clipped[3:]
        U_a = U_c.copy()
    else:  # off
        U_c = np.zeros(5 * n)
        U_a = np.zeros(5 * n)
        status = "optimal"
        saturated = False

    # Velocity-level residuals of the projected input on the averages (the
    # projector certificate; the direction-hold term is reported separately).
    res_pos = float(np.linalg.norm(U_a[: 3 * n].reshape(n, 3).mean(axis=0)))
    res_dir = float(np.linalg.norm(jd @ U_a[3 * n :]))

    U_h = human_input_vector(command, n)
    if config.stealth_mode == "stealthy" and (U_a[3 * n :] != 0.0).any():
        # Cancel the O(dt^2) direction drift a zero-order-hold step would
        # leave behind; the trajectory-level invariance check relies on it.
        U_a = U_a.copy()
        U_a[3 * n :], dir_hold = _direction_hold(swarm, U_h[3 * n :], U_a[3 * n :], config.dt)

    U = U_h + U_a
    outcome = StepOutcome(
        U=U, U_c=U_c, U_a=U_a, qp_status=status, saturated=saturated,
        rank_deficient=rank_deficient, res_pos=res_pos, res_dir=res_dir,
        dir_hold=dir_hold,
    )
    return outcome, fe, system


def integrate_step(swarm: SwarmState, U: np.ndarray, config: SimConfig, dt: float):
    """Explicit Euler step with yaw wrapping and box/pitch projection.

    Returns (new_swarm, boundary_active).  Any position or pitch clamp
    raises the boundary flag — stealthiness does not survive a clamp.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = swarm.n
    pos = swarm.positions() + dt * U[: 3 * n].reshape(n, 3)
    ang = U[3 * n :].reshape(n, 2)
    yaw = wrap_angle(swarm.yaws() + dt * ang[:, 0])
    pitch = swarm.pitches() + dt * ang[:, 1]

    lo = np.array([b[0] for b in config.flight_box])
    hi = np.array([b[1] for b in config.flight_box])
    pos_c = np.clip(pos, lo, hi)
    pitch_c = np.clip(pitch, config.pitch_bounds[0], config.pitch_bounds[1])
    boundary = bool((pos_c != pos).any() or (pitch_c != pitch).any())

    drones = tuple(
        DroneState(p=pos_c[i], yaw=float(yaw[i]), pitch=float(pitch_c[i])) for i in range(n)
    )
    return SwarmState(drones=drones, time=swarm.time + dt), boundary


def run(config: SimConfig, command_source=None, on_step=None, stop=None) -> Telemetry:
    """Run the closed loop for the configured duration.

    Deterministic given the config (the command source is polled once per
    step at simulation time).  on_step(record, grid, swarm) is called
    after each record is appended; stop() breaks the loop when true.
    """
    t0 = time.perf_counter()
    grid = build_grid(config.grid)
    swarm = initial_swarm(config)
    source = command_source if command_source is not None else make_command_source(config.command)
    telemetry = Telemetry(config.n, config.dt)
    projector_positions(config.n)  # warm the per-n cache

    prev_owner = None
    prev_arg = None
    for k in range(config.steps):
        if stop is not None and stop():
            break
        t = k * config.dt
        command = source.poll(t)
        avg = average_state(swarm, config.eps_dir)
        jd = avg_dir_jacobian(swarm, config.eps_dir)
        fe = evaluate_field(grid, swarm, avg, config.params)
        outcome, fe, system = controller_step(
            swarm, grid, avg, command, config, field_eval=fe, jd=jd
        )
        branch = prev_owner is not None and (
            not np.array_equal(prev_owner, fe.owner) or not np.array_equal(prev_arg, fe.arg_k)
        )
        grid = grid.with_updates(owner=fe.owner)

        active_k = fe.k_max[fe.active]
        rec = StepRecord(
            step=k,
            t=t,
            poses=np.column_stack([swarm.positions(), swarm.yaws(), swarm.pitches()]),
            p_bar=avg.p_bar,
            dir_bar=avg.dir_bar,
            J=objective(grid),
            b=system.b,
            uc_norm=float(np.linalg.norm(outcome.U_c)),
            ua_norm=float(np.linalg.norm(outcome.U_a)),
            res_pos=outcome.res_pos,
            res_dir=outcome.res_dir,
            qp_status=outcome.qp_status,
            saturated=outcome.saturated,
            boundary=False,  # patched below once the step integrates
            branch_switch=bool(branch),
            relaxed=outcome.qp_status != "optimal",
            rank_deficient=outcome.rank_deficient,
            skipped_cells=fe.skipped,
            phi_min=float(grid.phi.min()),
            phi_max=float(grid.phi.max()),
            kmax_min=float(active_k.min()) if active_k.size else 0.0,
            kmax_max=float(active_k.max()) if active_k.size else 0.0,
            dir_hold=outcome.dir_hold,
        )
        swarm, boundary = integrate_step(swarm, outcome.U, config, config.dt)
        if boundary:
            rec = replace(rec, boundary=True)
        telemetry.append(rec)
        grid = step_importance(grid, fe, config.dt)
        prev_owner, prev_arg = fe.owner, fe.arg_k
        if on_step is not None:
            on_step(rec, grid, swarm)

    telemetry.final_J = objective(grid)
    telemetry.wall_time = time.perf_counter() - t0
    return telemetry
