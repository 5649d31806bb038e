import json
import math
from dataclasses import replace

import numpy as np
import pytest

from swarmcover.engine import (
    CircleSource,
    CommandMailbox,
    CommandSpec,
    HumanCommand,
    LiveSource,
    ReplaySource,
    SimConfig,
    ZeroSource,
    command_source_circle,
    command_source_replay,
    command_source_zero,
    controller_step,
    human_input_vector,
    initial_swarm,
    integrate_step,
    make_command_source,
    run,
)
from swarmcover.errors import ScenarioError
from swarmcover.field import GridSpec, build_grid, evaluate_field
from swarmcover.geometry import DroneState, SwarmState, average_state
from swarmcover.presets import desk_grid, preset_desk
from swarmcover.sensing import CoverageParams, SensingParams


def micro_grid():
    return GridSpec(
        q_bounds=((-1.0, 1.0), (-1.0, 1.0), (3.0, 3.5)),
        phi_h_range=(-math.pi, math.pi),
        phi_v_range=(-1.2, -0.4),
        cell_size=(0.5, 0.5, 0.5, math.pi / 2, 0.8),
    )


def micro_config(**overrides):
    defaults = dict(
        grid=micro_grid(),
        n=3,
        dt=0.05,
        duration=1.0,
        params=CoverageParams(sensing=SensingParams(), kmax_mode="best_observer"),
        stealth_mode="stealthy",
        flight_box=((-4.0, 4.0), (-4.0, 4.0), (2.0, 2.4)),
        command=CommandSpec(source="zero"),
    )
    defaults.update(overrides)
    return SimConfig(**defaults)


class TestCommandSources:
    def test_circle_at_time_zero(self):
        cmd = command_source_circle(0.05).poll(0.0)
        assert cmd.engaged
        np.testing.assert_allclose(cmd.v, [0.0, 0.05, 0.0], atol=1e-15)
        assert cmd.w == (0.0, 0.0)

    def test_circle_quarter_period(self):
        omega = 0.05
        cmd = command_source_circle(omega).poll(math.pi / (2 * omega))
        np.testing.assert_allclose(cmd.v, [-0.05, 0.0, 0.0], atol=1e-12)

    def test_zero_source(self):
        cmd = command_source_zero().poll(12.3)
        assert not cmd.engaged
        assert cmd.v == (0.0, 0.0, 0.0)

    def test_replay_zero_order_hold(self, tmp_path):
        path = tmp_path / "log.jsonl"
        rows = [
            {"t": 0.0, "engaged": True, "v": [0.1, 0, 0], "w": [0, 0]},
            {"t": 1.0, "engaged": True, "v": [0.2, 0, 0], "w": [0, 0.1]},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        src = command_source_replay(path)
        assert src.poll(0.5).v == (0.1, 0.0, 0.0)
        assert src.poll(1.0).v == (0.2, 0.0, 0.0)
        assert src.poll(5.0).w == (0.0, 0.1)
        assert not src.poll(-0.1).engaged

    def test_replay_malformed_log(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"t": 0.0, "engaged": true}\n')
        with pytest.raises(ScenarioError):
            command_source_replay(path)

    def test_live_no_client_behaves_as_zero(self):
        src = LiveSource(CommandMailbox(), staleness_timeout=0.5)
        for t in (0.0, 1.0, 2.0):
            assert not src.poll(t).engaged

    def test_live_newest_wins_and_staleness(self):
        clock = {"t": 0.0}
        mailbox = CommandMailbox()
        src = LiveSource(mailbox, staleness_timeout=0.5, clock=lambda: clock["t"])
        mailbox.put(HumanCommand(v=(0.1, 0, 0), engaged=True))
        mailbox.put(HumanCommand(v=(0.3, 0, 0), engaged=True))  # replaces
        assert src.poll(0.0).v == (0.3, 0.0, 0.0)
        clock["t"] = 0.4  # still fresh: held
        assert src.poll(0.4).v == (0.3, 0.0, 0.0)
        clock["t"] = 1.0  # stale: decays to zero
        assert not src.poll(1.0).engaged

    def test_live_disengage_is_immediate(self):
        clock = {"t": 0.0}
        mailbox = CommandMailbox()
        src = LiveSource(mailbox, staleness_timeout=0.5, clock=lambda: clock["t"])
        mailbox.put(HumanCommand(v=(0.1, 0, 0), engaged=True))
        assert src.poll(0.0).engaged
        mailbox.put(HumanCommand(engaged=False))
        assert not src.poll(0.1).engaged

    def test_make_source_dispatch(self):
        assert isinstance(make_command_source(CommandSpec(source="zero")), ZeroSource)
        assert isinstance(make_command_source(CommandSpec(source="circle")), CircleSource)
        assert isinstance(make_command_source(CommandSpec(source="live")), LiveSource)
        with pytest.raises(ScenarioError):
            make_command_source(CommandSpec(source="replay"))  # needs a path


class TestHumanInput:
    def test_angle_order_swapped_into_state_layout(self):
        # command w = (pitch_rate, yaw_rate); state angle block = (yaw, pitch)
        cmd = HumanCommand(v=(1.0, 2.0, 3.0), w=(0.4, 0.7), engaged=True)
        u = human_input_vector(cmd, 2)
        np.testing.assert_array_equal(u[:6], [1, 2, 3, 1, 2, 3])
        np.testing.assert_array_equal(u[6:], [0.7, 0.4, 0.7, 0.4])

    def test_disengaged_is_zero(self):
        u = human_input_vector(HumanCommand(v=(9, 9, 9), w=(9, 9), engaged=False), 3)
        np.testing.assert_array_equal(u, np.zeros(15))


class TestControllerStep:
    def test_off_mode_replicates_human_command(self):
        config = micro_config(stealth_mode="off", command=CommandSpec(source="circle", omega=0.05))
        grid = build_grid(config.grid)
        swarm = initial_swarm(config)
        cmd = CircleSource(0.05).poll(0.0)
        outcome, _, _ = controller_step(swarm, grid, average_state(swarm), cmd, config)
        expected = human_input_vector(cmd, config.n)
        np.testing.assert_allclose(outcome.U, expected, atol=1e-15)
        assert (outcome.U_c == 0).all()

    def test_inactive_constraints_zero_coverage_input(self):
        # gamma = 0 with decaying importance: every barrier is positive and
        # the right-hand side negative, so the minimum-norm input is zero.
        params = CoverageParams(sensing=SensingParams(), gamma=0.0, kmax_mode="best_observer")
        config = micro_config(params=params)
        grid = build_grid(config.grid)
        swarm = initial_swarm(config)
        avg = average_state(swarm)
        outcome, _, system = controller_step(swarm, grid, avg, HumanCommand(), config)
        assert (system.C <= 0).all()
        np.testing.assert_array_equal(outcome.U_c, np.zeros(15))
        assert outcome.qp_status == "optimal"

    def test_single_drone_stealthy_follows_human_exactly(self):
        config = micro_config(n=1, stealth_mode="stealthy",
                              command=CommandSpec(source="circle", omega=0.05), duration=0.5)
        off = run(replace(config, stealth_mode="off"))
        stealthy = run(config)
        np.testing.assert_array_equal(stealthy.avg_positions(), off.avg_positions())
        for rec in stealthy.records:
            assert np.linalg.norm(rec.poses[0][:3] - rec.p_bar) < 1e-12

    def test_stealthy_projected_input_certified(self):
        config = micro_config()
        grid = build_grid(config.grid)
        swarm = initial_swarm(config)
        outcome, _, _ = controller_step(swarm, grid, average_state(swarm), HumanCommand(), config)
        assert outcome.res_pos < 1e-9
        assert outcome.res_dir < 1e-9


class TestIntegrateStep:
    def test_zero_input_keeps_state(self):
        config = micro_config()
        swarm = initial_swarm(config)
        out, boundary = integrate_step(swarm, np.zeros(15), config, 0.1)
        np.testing.assert_array_equal(out.positions(), swarm.positions())
        assert not boundary

    def test_box_clamp_raises_event(self):
        config = micro_config(n=1)
        swarm = SwarmState(drones=(DroneState(p=np.array([3.99, 0.0, 2.2]), yaw=0.0, pitch=0.8),))
        U = np.array([0.5, 0, 0, 0, 0], dtype=float)
        out, boundary = integrate_step(swarm, U, config, 0.1)
        assert boundary
        assert out.drones[0].p[0] == pytest.approx(4.0)

    def test_yaw_wraps(self):
        config = micro_config(n=1)
        swarm = SwarmState(drones=(DroneState(p=np.array([0.0, 0.0, 2.2]), yaw=math.pi - 0.01, pitch=0.8),))
        U = np.array([0, 0, 0, 0.5, 0], dtype=float)
        out, _ = integrate_step(swarm, U, config, 0.1)
        assert out.drones[0].yaw == pytest.approx(-math.pi + 0.04, abs=1e-12)

    def test_pitch_clamp_raises_event(self):
        config = micro_config(n=1, pitch_bounds=(0.2, 1.2))
        swarm = SwarmState(drones=(DroneState(p=np.array([0.0, 0.0, 2.2]), yaw=0.0, pitch=1.19),))
        U = np.array([0, 0, 0, 0, 1.0], dtype=float)
        out, boundary = integrate_step(swarm, U, config, 0.1)
        assert boundary
        assert out.drones[0].pitch == pytest.approx(1.2)


class TestRun:
    def test_single_step_run(self):
        tel = run(micro_config(duration=0.05, dt=0.05))
        assert len(tel) == 1

    def test_determinism_byte_identical(self, tmp_path):
        config = micro_config(duration=0.5)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(config).to_csv(a)
        run(config).to_csv(b)
        assert a.read_bytes() == b.read_bytes()

    def test_initial_ring_matches_average(self):
        config = micro_config()
        swarm = initial_swarm(config)
        avg = average_state(swarm)
        np.testing.assert_allclose(avg.p_bar, [0.0, 0.0, 2.2], atol=1e-15)
        np.testing.assert_allclose(avg.dir_bar, [0.0, 0.0, 1.0], atol=1e-15)

    def test_explicit_and_random_poses(self):
        poses = ((0.0, 0.0, 2.1, 0.1, 0.5), (1.0, 0.0, 2.3, -0.2, 0.7))
        config = micro_config(n=2, initial_poses=poses)
        swarm = initial_swarm(config)
        np.testing.assert_allclose(swarm.positions()[1], [1.0, 0.0, 2.3])
        cfg_rand = micro_config(n=2, initial_poses="random", seed=5)
        sw1 = initial_swarm(cfg_rand)
        sw2 = initial_swarm(cfg_rand)
        np.testing.assert_array_equal(sw1.positions(), sw2.positions())
        lo = [b[0] for b in cfg_rand.flight_box]
        hi = [b[1] for b in cfg_rand.flight_box]
        assert (sw1.positions() >= lo).all() and (sw1.positions() <= hi).all()

    def test_stop_callback(self):
        calls = {"n": 0}

        def stop():
            calls["n"] += 1
            return calls["n"] > 3

        tel = run(micro_config(duration=5.0, dt=0.05), stop=stop)
        assert len(tel) == 3

    def test_telemetry_column_layout(self):
        tel = run(micro_config(duration=0.05, dt=0.05))
        cols = tel.columns()
        assert cols[0] == "step" and cols[1] == "time"
        assert "pbar_x" in cols and "qp_status" in cols and "dir_hold" in cols
        assert len(cols) == 2 + 5 * tel.n + 7 + tel.n + 16

    def test_summary_fields(self):
        tel = run(micro_config(duration=0.2))
        s = tel.summary()
        for key in ("steps", "final_J", "initial_J", "integral_uc", "events", "wall_time_s"):
            assert key in s
        assert s["steps"] == len(tel)


class TestBarrierForwardInvariance:
    def test_discrete_cbf_condition_on_clean_windows(self):
        # On windows with no partition/argmax switch, no saturation, no box
        # event, and an optimal QP, the discrete barrier rate satisfies the
        # class-K condition up to integration error (measured ~1e-9; the
        # bound below leaves three orders of margin).
        config = replace(preset_desk(), duration=30.0)
        tel = run(config)
        a = config.params.alpha_gain
        dt = config.dt
        b = np.array([r.b for r in tel.records])
        branch = np.array([r.branch_switch for r in tel.records])
        sat = np.array([r.saturated for r in tel.records])
        bound = np.array([r.boundary for r in tel.records])
        opt = np.array([r.qp_status == "optimal" for r in tel.records])
        clean = opt[:-1] & ~sat[:-1] & ~bound[:-1] & ~branch[:-1] & ~branch[1:]
        assert clean.sum() > 100
        lhs = (b[1:] - b[:-1]) / dt + a * b[:-1]
        assert lhs[clean].min() > -1e-6
        # the constraint must actually have been active sometimes
        assert any(r.uc_norm > 0 for r in tel.records)
