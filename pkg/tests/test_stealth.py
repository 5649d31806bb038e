import numpy as np
import pytest

from swarmcover.geometry import DroneState, SwarmState, avg_dir_jacobian
from swarmcover.stealth import (
    StealthProjector,
    apply,
    build_projector,
    full_matrix,
    projector_orientations,
    projector_positions,
    stealth_certificate,
)

from conftest import random_swarm


class TestPositionProjector:
    def test_single_drone_is_zero(self):
        np.testing.assert_array_equal(projector_positions(1), np.zeros((3, 3)))

    def test_two_drone_block_form(self):
        A = projector_positions(2)
        I3 = np.eye(3)
        expected = np.block([[I3 / 2, -I3 / 2], [-I3 / 2, I3 / 2]])
        np.testing.assert_allclose(A, expected, atol=1e-15)

    def test_uniform_translation_annihilated(self, rng):
        for n in (1, 2, 3, 5):
            v = rng.normal(size=3)
            out = projector_positions(n) @ np.tile(v, n)
            assert np.abs(out).max() < 1e-12

    def test_projector_algebra(self):
        for n in (1, 2, 3, 5):
            A = projector_positions(n)
            assert np.abs(A @ A - A).max() < 1e-10
            assert np.abs(A - A.T).max() < 1e-10
            assert np.linalg.matrix_rank(A, tol=1e-9) == 3 * (n - 1)
            eigs = np.linalg.eigvalsh(A)
            assert np.all((np.abs(eigs) < 1e-8) | (np.abs(eigs - 1.0) < 1e-8))


class TestOrientationProjector:
    def test_single_drone_is_zero(self, rng):
        for _ in range(20):
            sw = random_swarm(rng, 1)
            A, dropped, deficient = projector_orientations(sw)
            assert not deficient
            np.testing.assert_allclose(A, np.zeros((2, 2)), atol=1e-10)

    def test_annihilates_direction_jacobian(self, rng):
        for _ in range(50):
            sw = random_swarm(rng, 3)
            A, _, deficient = projector_orientations(sw)
            assert not deficient
            assert np.abs(avg_dir_jacobian(sw) @ A).max() < 1e-9

    def test_identical_orientations_still_annihilate(self):
        drones = tuple(
            DroneState(p=np.array([float(i), 0.0, 2.0]), yaw=0.7, pitch=np.pi / 4)
            for i in range(3)
        )
        sw = SwarmState(drones=drones)
        A, _, deficient = projector_orientations(sw)
        assert not deficient
        assert np.abs(avg_dir_jacobian(sw) @ A).max() < 1e-9

    def test_projector_algebra_and_rank(self, rng):
        for n in (2, 3, 5):
            sw = random_swarm(rng, n)
            A, _, _ = projector_orientations(sw)
            assert np.abs(A @ A - A).max() < 1e-9
            assert np.abs(A - A.T).max() < 1e-9
            assert np.linalg.matrix_rank(A, tol=1e-8) == 2 * n - 2
            eigs = np.linalg.eigvalsh(A)
            assert np.all((np.abs(eigs) < 1e-8) | (np.abs(eigs - 1.0) < 1e-8))

    def test_rank_deficient_configuration_flagged(self):
        # Two drones at vertical pitch with equal yaw: every retained column
        # pair of the Jacobian is singular.
        drones = (
            DroneState(p=np.zeros(3), yaw=0.3, pitch=np.pi / 2),
            DroneState(p=np.array([1.0, 0, 0]), yaw=0.3, pitch=np.pi / 2),
        )
        _, _, deficient = projector_orientations(SwarmState(drones=drones))
        assert deficient


class TestApply:
    def test_zero_input(self, rng):
        proj = build_projector(random_swarm(rng, 3))
        np.testing.assert_array_equal(apply(proj, np.zeros(15)), np.zeros(15))

    def test_uniform_translation_in_kernel(self, rng):
        sw = random_swarm(rng, 4)
        proj = build_projector(sw)
        U = np.concatenate([np.tile(rng.normal(size=3), 4), np.zeros(8)])
        assert np.abs(apply(proj, U)).max() < 1e-12

    def test_position_mean_removed(self, rng):
        sw = random_swarm(rng, 3)
        proj = build_projector(sw)
        U_a = apply(proj, rng.normal(size=15))
        assert np.abs(U_a[:9].reshape(3, 3).mean(axis=0)).max() < 1e-12

    def test_full_matrix_block_structure(self, rng):
        sw = random_swarm(rng, 2)
        proj = build_projector(sw)
        A = full_matrix(proj)
        np.testing.assert_array_equal(A[:6, :6], proj.A_p)
        np.testing.assert_array_equal(A[6:, 6:], proj.A_theta)
        np.testing.assert_array_equal(A[:6, 6:], np.zeros((6, 4)))

    def test_shape_validation(self, rng):
        proj = build_projector(random_swarm(rng, 2))
        with pytest.raises(ValueError):
            apply(proj, np.zeros(11))


class TestCertificate:
    def test_random_inputs_certified(self, rng):
        for _ in range(200):
            n = int(rng.choice([1, 2, 3, 5]))
            sw = random_swarm(rng, n)
            rep = stealth_certificate(sw, rng.uniform(-1, 1, 5 * n))
            assert rep.pos_residual < 1e-9
            assert rep.dir_residual < 1e-9

    def test_single_drone_exactly_zero(self, rng):
        sw = random_swarm(rng, 1)
        rep = stealth_certificate(sw, rng.normal(size=5))
        assert rep.pos_residual == 0.0
        assert rep.dir_residual == 0.0

    def test_identity_projector_breaks_stealth(self, rng):
        sw = random_swarm(rng, 3)
        fake = StealthProjector(
            A_p=np.eye(9), A_theta=np.eye(6), dropped_column=0,
            kernel_residual=1.0, rank_deficient=False,
        )
        rep = stealth_certificate(sw, rng.uniform(0.5, 1.0, 15), proj=fake)
        assert rep.pos_residual > 1e-3
        assert rep.dir_residual > 1e-3

    def test_kernel_residual_recorded(self, rng):
        proj = build_projector(random_swarm(rng, 3))
        assert proj.kernel_residual < 1e-9
