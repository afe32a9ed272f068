import time

import numpy as np
import pytest

from conftest import random_pose
from snippet_vo.errors import IncompleteInputError
from snippet_vo.geometry import SE3Pose, quaternion_to_rotation, se3_compose, se3_inverse
from snippet_vo.io_formats import gt_snippet_poses
from snippet_vo.loss import SnippetPoses
from snippet_vo.synthetic import smooth_trajectory
from snippet_vo.trajectory import (
    ForwardPosePair,
    chain_positions,
    forward_pairs_from_world,
    gather_sequence,
    snippet_to_forward,
    splice,
)


def translation(v):
    return SE3Pose(np.eye(3), v)


def world_chain(rng, n):
    return smooth_trajectory(n, rng)


class TestSnippetToForward:
    def test_identity(self):
        pair = snippet_to_forward(SnippetPoses.identity(), 1)
        assert pair.k == 0
        assert np.array_equal(pair.one_step.matrix, np.eye(4)) and np.array_equal(pair.two_step.matrix, np.eye(4))

    def test_opposite_translations(self):
        a = np.array([0.3, -0.1, 1.0])
        pair = snippet_to_forward(SnippetPoses(translation(a), translation(-a)), 4)
        assert pair.k == 3
        np.testing.assert_allclose(pair.two_step.translation, 2 * a)

    def test_two_step_is_one_step_then_mid_to_next(self, rng):
        for _ in range(20):
            P = SnippetPoses(random_pose(rng, 0.3, 1.0), random_pose(rng, 0.3, 1.0))
            pair = snippet_to_forward(P, 1)
            x = rng.normal(size=3)
            np.testing.assert_allclose(
                pair.two_step.apply(x), se3_inverse(P.next_to_mid).apply(pair.one_step.apply(x)), atol=1e-9
            )

    def test_rejects_center_zero(self):
        with pytest.raises(ValueError):
            snippet_to_forward(SnippetPoses.identity(), 0)


class TestSplice:
    def test_identity_pairs(self):
        pairs = [ForwardPosePair(k, SE3Pose.identity(), SE3Pose.identity()) for k in range(5)]
        traj = splice(pairs, 6)
        assert not traj.positions.any()
        np.testing.assert_array_equal(traj.q0k, np.tile([1.0, 0, 0, 0], (6, 1)))

    def test_two_frames(self):
        traj = splice([ForwardPosePair(0, translation([0, 0, -1.0]))], 2)
        assert len(traj) == 2
        np.testing.assert_allclose(traj.positions[1], [0, 0, 1.0])

    def test_matches_chain_oracle(self, rng):
        world = world_chain(rng, 50)
        pairs = forward_pairs_from_world(world)
        traj = splice(pairs)
        np.testing.assert_allclose(traj.positions, chain_positions(pairs, 50), atol=1e-9, rtol=0)
        gt = np.array([W.translation for W in world])
        np.testing.assert_allclose(traj.positions, gt, atol=1e-9, rtol=0)

    def test_frame_zero_and_position_identity(self, rng):
        traj = splice(forward_pairs_from_world(world_chain(rng, 20)))
        np.testing.assert_array_equal(traj.q0k[0], [1, 0, 0, 0])
        assert not traj.tprime0k[0].any() and not traj.positions[0].any()
        for k in range(len(traj)):
            assert abs(np.linalg.norm(traj.q0k[k]) - 1) < 1e-12
            np.testing.assert_allclose(
                traj.positions[k], -quaternion_to_rotation(traj.q0k[k]).T @ traj.tprime0k[k], atol=1e-9, rtol=0
            )

    def test_midpoint_of_disagreeing_paths(self):
        # the two-step path says frame 2 is at x=2, the one-step path says x=4
        one = translation([-1.0, 0, 0])
        pairs = [
            ForwardPosePair(0, one, translation([-2.0, 0, 0])),
            ForwardPosePair(1, translation([-3.0, 0, 0])),
        ]
        traj = splice(pairs, 3)
        np.testing.assert_allclose(traj.positions[2], [3.0, 0, 0])

    def test_missing_pair(self):
        pairs = [ForwardPosePair(0, SE3Pose.identity(), SE3Pose.identity()), ForwardPosePair(2, SE3Pose.identity())]
        with pytest.raises(IncompleteInputError):
            splice(pairs, 4)

    def test_missing_two_step(self):
        pairs = [ForwardPosePair(0, SE3Pose.identity()), ForwardPosePair(1, SE3Pose.identity())]
        with pytest.raises(IncompleteInputError):
            splice(pairs, 3)

    def test_rigid_equivariance(self, rng):
        world = world_chain(rng, 30)
        G = random_pose(rng)
        moved = [se3_compose(G, W) for W in world]
        a = splice(forward_pairs_from_world(world))
        b = splice(forward_pairs_from_world(moved))
        np.testing.assert_allclose(a.positions, b.positions, atol=1e-12, rtol=0)
        pairs = forward_pairs_from_world(world)
        assert np.array_equal(splice(pairs).positions, splice(list(pairs)).positions)

    def test_camera_to_origin(self, rng):
        world = world_chain(rng, 10)
        traj = splice(forward_pairs_from_world(world))
        for W, C in zip(world, traj.camera_to_origin()):
            np.testing.assert_allclose(C.matrix, W.matrix, atol=1e-9)

    def test_thousand_frames_fast(self, rng):
        world = world_chain(rng, 1000)
        pairs = forward_pairs_from_world(world)
        t0 = time.perf_counter()
        traj = splice(pairs)
        assert time.perf_counter() - t0 < 1.0
        np.testing.assert_allclose(traj.positions, chain_positions(pairs, 1000), atol=1e-9, rtol=0)


class TestGather:
    def test_smallest_case(self, rng):
        P = SnippetPoses(random_pose(rng, 0.2, 1), random_pose(rng, 0.2, 1))
        pairs = gather_sequence([P])
        assert [p.k for p in pairs] == [0, 1]
        assert pairs[0].two_step is not None and pairs[1].two_step is None
        np.testing.assert_allclose(pairs[1].one_step.matrix, se3_inverse(P.next_to_mid).matrix)

    def test_identity(self):
        for p in gather_sequence([SnippetPoses.identity()] * 4):
            assert np.array_equal(p.one_step.matrix, np.eye(4))

    def test_gap(self):
        items = [(1, SnippetPoses.identity()), (3, SnippetPoses.identity())]
        with pytest.raises(IncompleteInputError):
            gather_sequence(items)

    def test_must_start_at_one(self):
        with pytest.raises(IncompleteInputError):
            gather_sequence([(2, SnippetPoses.identity())])

    def test_empty(self):
        with pytest.raises(IncompleteInputError):
            gather_sequence([])

    @pytest.mark.parametrize("average", [False, True])
    def test_ten_frame_sequence(self, rng, average):
        world = world_chain(rng, 10)
        snippets = [(t, gt_snippet_poses(world, t)) for t in range(1, 9)]
        traj = splice(gather_sequence(snippets, average_overlap=average))
        gt = np.array([se3_compose(se3_inverse(world[0]), W).translation for W in world])
        np.testing.assert_allclose(traj.positions, gt, atol=1e-9, rtol=0)

    def test_average_overlap_midpoint(self):
        a = SnippetPoses(translation([-1.0, 0, 0]), translation([1.0, 0, 0]))
        b = SnippetPoses(translation([-3.0, 0, 0]), translation([1.0, 0, 0]))
        pairs = gather_sequence([a, b], average_overlap=True)
        # step 1->2 seen as -3 (b.prev_to_mid) and -1 (inverse of a.next_to_mid)
        np.testing.assert_allclose(pairs[1].one_step.translation, [-2.0, 0, 0])
