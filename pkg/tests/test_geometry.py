import numpy as np
import pytest

from conftest import random_euler, random_pose
from snippet_vo.errors import InvalidRotationError
from snippet_vo.geometry import (
    PoseJet,
    SE3Pose,
    camera_center,
    euler_to_rotation,
    euler_to_se3,
    quat_canonical,
    quat_from_axis_angle,
    quat_identity,
    quat_multiply,
    quat_rotate,
    quaternion_to_rotation,
    rotation_to_euler,
    rotation_to_quaternion,
    se3_compose,
    se3_inverse,
    se3_to_euler,
    slerp,
)


def assert_rotation(R, tol=1e-9):
    assert np.abs(R.T @ R - np.eye(3)).max() < tol
    assert abs(np.linalg.det(R) - 1) < tol


class TestEuler:
    def test_zero_is_identity(self):
        assert np.array_equal(euler_to_rotation(np.zeros(6)), np.eye(3))

    def test_rx_quarter_turn_maps_y_to_z(self):
        R = euler_to_rotation([np.pi / 2, 0, 0, 0, 0, 0])
        np.testing.assert_allclose(R @ [0, 1, 0], [0, 0, 1], atol=1e-15)

    def test_rz_half_turn_flips_x(self):
        R = euler_to_rotation([0, 0, np.pi, 0, 0, 0])
        np.testing.assert_allclose(R @ [1, 0, 0], [-1, 0, 0], atol=1e-15)

    def test_order_is_z_y_x(self):
        a, b, g = 0.3, -0.2, 0.7
        Rx = euler_to_rotation([a, 0, 0])
        Ry = euler_to_rotation([0, b, 0])
        Rz = euler_to_rotation([0, 0, g])
        np.testing.assert_allclose(euler_to_rotation([a, b, g]), Rz @ Ry @ Rx, atol=1e-15)

    def test_pure_translation(self):
        T = euler_to_se3([0, 0, 0, 1, 2, 3])
        assert np.array_equal(T.rotation, np.eye(3))
        assert np.array_equal(T.translation, [1.0, 2.0, 3.0])

    def test_round_trip_below_half_pi(self, rng):
        for _ in range(100):
            e = np.concatenate([rng.uniform(-1.5, 1.5, 3), rng.normal(size=3)])
            np.testing.assert_allclose(se3_to_euler(euler_to_se3(e)), e, atol=1e-9)

    def test_output_is_rotation(self, rng):
        for _ in range(100):
            assert_rotation(euler_to_rotation(random_euler(rng)))

    def test_rotation_to_euler_gimbal_lock_still_reconstructs(self):
        R = euler_to_rotation([0.2, np.pi / 2, -0.4])
        np.testing.assert_allclose(euler_to_rotation(rotation_to_euler(R)), R, atol=1e-9)


class TestSE3:
    def test_inverse_identity(self):
        assert se3_inverse(SE3Pose.identity()).allclose(SE3Pose.identity(), atol=0)

    def test_inverse_of_translation(self):
        T = se3_inverse(SE3Pose(np.eye(3), [1, 0, 0]))
        np.testing.assert_array_equal(T.translation, [-1, 0, 0])

    def test_inverse_composes_to_identity(self, rng):
        for _ in range(100):
            T = random_pose(rng)
            assert se3_compose(se3_inverse(T), T).allclose(SE3Pose.identity(), atol=1e-9)
            assert se3_compose(T, se3_inverse(T)).allclose(SE3Pose.identity(), atol=1e-9)

    def test_compose_applies_right_operand_first(self, rng):
        A, B = random_pose(rng), random_pose(rng)
        p = rng.normal(size=(5, 3))
        np.testing.assert_allclose(se3_compose(B, A).apply(p), B.apply(A.apply(p)), atol=1e-12)
        np.testing.assert_allclose((B @ A).apply(p), B.apply(A.apply(p)), atol=1e-12)

    def test_compose_translations(self):
        T = se3_compose(SE3Pose(np.eye(3), [1, 0, 0]), SE3Pose(np.eye(3), [0, 1, 0]))
        np.testing.assert_array_equal(T.translation, [1, 1, 0])

    def test_compose_identity_left(self, rng):
        A = random_pose(rng)
        assert se3_compose(SE3Pose.identity(), A).allclose(A, atol=0)

    def test_associativity(self, rng):
        for _ in range(100):
            A, B, C = (random_pose(rng) for _ in range(3))
            assert se3_compose(C, se3_compose(B, A)).allclose(se3_compose(se3_compose(C, B), A), atol=1e-9)

    def test_snippet_composition_identities(self, rng):
        # prev->mid, next->mid and the derived maps between the outer frames
        for _ in range(100):
            P, N = random_pose(rng, 0.5, 1.0), random_pose(rng, 0.5, 1.0)
            pts = rng.normal(size=(4, 3))
            next_to_prev = se3_compose(se3_inverse(P), N)
            np.testing.assert_allclose(next_to_prev.apply(pts), se3_inverse(P).apply(N.apply(pts)), atol=1e-9)
            prev_to_next = se3_compose(se3_inverse(N), P)
            assert se3_compose(N, prev_to_next).allclose(P, atol=1e-9)
            assert se3_compose(P, next_to_prev).allclose(N, atol=1e-9)

    def test_validation(self):
        with pytest.raises(InvalidRotationError):
            SE3Pose(2 * np.eye(3), np.zeros(3))
        with pytest.raises(ValueError):
            SE3Pose(np.eye(3), [np.nan, 0, 0])

    def test_immutable(self):
        T = SE3Pose.identity()
        with pytest.raises(ValueError):
            T.translation[0] = 1.0

    def test_matrix_round_trip(self, rng):
        T = random_pose(rng)
        assert SE3Pose.from_matrix(T.matrix).allclose(T, atol=0)


class TestCameraCenter:
    def test_identity(self):
        np.testing.assert_array_equal(camera_center(SE3Pose.identity()), np.zeros(3))

    def test_pure_translation(self):
        np.testing.assert_array_equal(camera_center(SE3Pose(np.eye(3), [1, 2, 3])), [-1, -2, -3])

    def test_maps_to_origin(self, rng):
        for _ in range(100):
            T = random_pose(rng)
            np.testing.assert_allclose(T.apply(camera_center(T)), 0, atol=1e-9)


class TestQuaternion:
    def test_identity_matrix(self):
        np.testing.assert_array_equal(rotation_to_quaternion(np.eye(3)), [1, 0, 0, 0])

    def test_half_turn_about_z(self):
        R = np.diag([-1.0, -1.0, 1.0])
        np.testing.assert_allclose(rotation_to_quaternion(R), [0, 0, 0, 1], atol=1e-15)

    def test_canonical_sign_when_w_is_zero(self):
        np.testing.assert_array_equal(quat_canonical([0, 0, -1, 0]), [0, 0, 1, 0])
        np.testing.assert_array_equal(quat_canonical([0, 0, 0, -1]), [0, 0, 0, 1])

    def test_round_trip(self, rng):
        for _ in range(100):
            R = euler_to_rotation(random_euler(rng))
            q = rotation_to_quaternion(R)
            assert abs(np.linalg.norm(q) - 1) < 1e-12
            assert q[0] >= 0
            np.testing.assert_allclose(quaternion_to_rotation(q), R, atol=1e-9)

    def test_round_trip_near_half_turns(self):
        # exercises every branch of the trace-based extraction
        for axis in np.eye(3):
            for angle in (np.pi, np.pi - 1e-7, 3.0):
                R = quaternion_to_rotation(quat_from_axis_angle(axis, angle))
                np.testing.assert_allclose(quaternion_to_rotation(rotation_to_quaternion(R)), R, atol=1e-9)

    def test_rejects_non_orthonormal(self):
        R = np.eye(3)
        R[0, 1] = 1e-5
        with pytest.raises(InvalidRotationError):
            rotation_to_quaternion(R)
        with pytest.raises(InvalidRotationError):
            rotation_to_quaternion(np.diag([1.0, 1.0, -1.0]))

    def test_tolerates_tiny_drift(self):
        R = np.eye(3)
        R[0, 1] = 1e-8
        rotation_to_quaternion(R)

    def test_multiply_identity(self, rng):
        q = rotation_to_quaternion(euler_to_rotation(random_euler(rng)))
        np.testing.assert_allclose(quat_multiply(quat_identity(), q), q, atol=1e-15)

    def test_multiply_matches_matrix_product(self, rng):
        for _ in range(100):
            Ra, Rb = (euler_to_rotation(random_euler(rng)) for _ in range(2))
            q = quat_multiply(rotation_to_quaternion(Ra), rotation_to_quaternion(Rb))
            np.testing.assert_allclose(quaternion_to_rotation(q), Ra @ Rb, atol=1e-9)

    def test_rotate_quarter_turn(self):
        q = quat_from_axis_angle([0, 0, 1], np.pi / 2)
        np.testing.assert_allclose(quat_rotate(q, [1, 0, 0]), [0, 1, 0], atol=1e-15)

    def test_rotate_matches_matrix(self, rng):
        for _ in range(100):
            q = rotation_to_quaternion(euler_to_rotation(random_euler(rng)))
            v = rng.normal(size=3)
            np.testing.assert_allclose(quat_rotate(q, v), quaternion_to_rotation(q) @ v, atol=1e-9)


class TestSlerp:
    def test_same_input(self, rng):
        q = rotation_to_quaternion(euler_to_rotation(random_euler(rng)))
        np.testing.assert_allclose(slerp(q, q, 0.5), q, atol=1e-15)

    def test_halfway_about_z(self):
        q = slerp(quat_identity(), quat_from_axis_angle([0, 0, 1], np.pi / 2), 0.5)
        c, s = np.cos(np.pi / 8), np.sin(np.pi / 8)
        np.testing.assert_allclose(q, [c, 0, 0, s], atol=1e-15)

    def test_endpoints_and_unit_norm(self, rng):
        for _ in range(100):
            q1, q2 = (rotation_to_quaternion(euler_to_rotation(random_euler(rng))) for _ in range(2))
            np.testing.assert_allclose(slerp(q1, q2, 0.0), q1, atol=1e-9)
            np.testing.assert_allclose(slerp(q1, q2, 1.0), quat_canonical(q2), atol=1e-9)
            for u in rng.uniform(0, 1, 5):
                assert abs(np.linalg.norm(slerp(q1, q2, u)) - 1) < 1e-12

    def test_takes_short_arc(self):
        q1 = quat_identity()
        q2 = -quat_from_axis_angle([1, 0, 0], 0.4)  # same rotation, opposite hemisphere
        mid = slerp(q1, q2, 0.5)
        np.testing.assert_allclose(mid, quat_from_axis_angle([1, 0, 0], 0.2), atol=1e-15)

    def test_nearly_equal_inputs_fall_back_to_lerp(self):
        q1 = quat_identity()
        q2 = quat_from_axis_angle([0, 1, 0], 1e-12)
        assert abs(np.linalg.norm(slerp(q1, q2, 0.3)) - 1) < 1e-12


class TestPoseJet:
    """Forward-mode derivatives through inverse and composition."""

    def _fd(self, f, e, h=1e-7):
        cols_R, cols_t = [], []
        for k in range(len(e)):
            d = np.zeros(len(e))
            d[k] = h
            a, b = f(e + d), f(e - d)
            cols_R.append((a.rotation - b.rotation) / (2 * h))
            cols_t.append((a.translation - b.translation) / (2 * h))
        return np.array(cols_R), np.array(cols_t)

    def test_derivatives_match_finite_differences(self, rng):
        e = np.concatenate([random_euler(rng, 0.8, 1.0), random_euler(rng, 0.8, 1.0)])

        def pose(e):
            return se3_compose(se3_inverse(euler_to_se3(e[6:])), euler_to_se3(e[:6]))

        jet = PoseJet.from_euler(e[6:], 6, 12).inverse().compose(PoseJet.from_euler(e[:6], 0, 12))
        dR, dt = self._fd(pose, e)
        assert jet.pose.allclose(pose(e), atol=1e-12)
        np.testing.assert_allclose(jet.d_rotation, dR, atol=1e-7)
        np.testing.assert_allclose(jet.d_translation, dt, atol=1e-7)
