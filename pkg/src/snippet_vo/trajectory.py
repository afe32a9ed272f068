"""Splicing per-snippet relative poses into one trajectory.

Each snippet centred at ``t`` yields forward point maps ``T'_{t-1,t}`` and
``T'_{t-1,t+1}``.  Frame ``k`` of the global trajectory is reached along two
paths (from ``k-2`` and from ``k-1``); rotations are merged with a halfway
slerp and the translation parts ``t'`` are averaged.  Rotations live as unit
quaternions ``[w, x, y, z]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IncompleteInputError
from .geometry import (
    SE3Pose,
    quat_identity,
    quat_multiply,
    quat_rotate,
    quaternion_to_rotation,
    rotation_to_quaternion,
    se3_compose,
    se3_inverse,
    slerp,
)
from .loss import SnippetPoses


@dataclass(frozen=True)
class ForwardPosePair:
    """Forward point maps leaving frame ``k``.

    ``one_step`` takes frame-``k`` points to frame ``k+1``; ``two_step``
    (absent at the tail of a sequence) takes them to frame ``k+2``.
    """

    k: int
    one_step: SE3Pose
    two_step: SE3Pose | None = None


@dataclass(frozen=True)
class GlobalTrajectory:
    """Per-frame ``q_{0,k}``, ``t'_{0,k}`` and camera position in frame 0.

    ``(q0k[k], tprime0k[k])`` is the point map from frame 0 to frame ``k``;
    ``positions[k] = -R(q0k[k])^T tprime0k[k]`` is camera ``k``'s centre.
    """

    q0k: np.ndarray
    tprime0k: np.ndarray
    positions: np.ndarray

    def __len__(self):
        return len(self.positions)

    def point_map(self, k: int) -> SE3Pose:
        """Frame-0 points to frame-``k`` points."""
        return SE3Pose(quaternion_to_rotation(self.q0k[k]), self.tprime0k[k])

    def camera_to_origin(self) -> list[SE3Pose]:
        """Camera-to-frame-0 poses (the KITTI convention with frame 0 as world)."""
        return [self.point_map(k).inverse() for k in range(len(self))]


def snippet_to_forward(P: SnippetPoses, t: int) -> ForwardPosePair:
    """Forward pair at ``k = t - 1`` from the snippet centred at ``t``."""
    if t < 1:
        raise ValueError(f"snippet centre must be >= 1, got {t}")
    two = se3_compose(se3_inverse(P.next_to_mid), P.prev_to_mid)
    return ForwardPosePair(t - 1, P.prev_to_mid, two)


def _average_pose(a: SE3Pose, b: SE3Pose) -> SE3Pose:
    q = slerp(rotation_to_quaternion(a.rotation), rotation_to_quaternion(b.rotation), 0.5)
    return SE3Pose(quaternion_to_rotation(q), 0.5 * (a.translation + b.translation))


def gather_sequence(snippet_results, first_center: int = 1, average_overlap: bool = False) -> list[ForwardPosePair]:
    """Forward pairs ``k = 0 .. n-2`` from snippets centred at consecutive frames.

    ``snippet_results`` is either a list of :class:`SnippetPoses` for centres
    ``first_center, first_center+1, ...`` or a list of ``(t, SnippetPoses)``.
    The one-step pose leaving ``k`` is the ``prev_to_mid`` of the snippet
    centred at ``k+1``; for the last frame pair, ``inverse(next_to_mid)`` of
    the final snippet is used.  With ``average_overlap`` both available
    estimates of each one-step pose are merged (slerp 0.5 and mean
    translation).
    """
    items = list(snippet_results)
    if not items:
        raise IncompleteInputError("no snippet results to gather")
    if isinstance(items[0], tuple):
        centers = [int(t) for t, _ in items]
        snippets = [P for _, P in items]
    else:
        centers = list(range(first_center, first_center + len(items)))
        snippets = items
    if centers[0] != 1:
        raise IncompleteInputError(f"first snippet centre must be 1, got {centers[0]}")
    for a, b in zip(centers, centers[1:]):
        if b != a + 1:
            raise IncompleteInputError(f"gap in snippet centres between {a} and {b}")

    pairs = []
    for i, (t, P) in enumerate(zip(centers, snippets)):
        pair = snippet_to_forward(P, t)
        if average_overlap and i > 0:
            # the snippet centred at t-1 also saw the step t-1 -> t
            other = se3_inverse(snippets[i - 1].next_to_mid)
            pair = ForwardPosePair(pair.k, _average_pose(pair.one_step, other), pair.two_step)
        pairs.append(pair)
    last_t = centers[-1]
    pairs.append(ForwardPosePair(last_t, se3_inverse(snippets[-1].next_to_mid), None))
    return pairs


def splice(pairs, n_frames: int | None = None) -> GlobalTrajectory:
    """Accumulate forward pairs into a trajectory anchored at frame 0."""
    by_k = {}
    for p in pairs:
        by_k[p.k] = p
    if n_frames is None:
        n_frames = max(by_k) + 2 if by_k else 1
    if n_frames < 1:
        raise ValueError("n_frames must be positive")
    for k in range(n_frames - 1):
        if k not in by_k:
            raise IncompleteInputError(f"missing one-step pose leaving frame {k}")
        if k <= n_frames - 3 and by_k[k].two_step is None:
            raise IncompleteInputError(f"missing two-step pose leaving frame {k}")

    # relative quaternions and translations, computed once
    q1 = [rotation_to_quaternion(by_k[k].one_step.rotation) for k in range(n_frames - 1)]
    t1 = [by_k[k].one_step.translation for k in range(n_frames - 1)]
    q2 = [rotation_to_quaternion(by_k[k].two_step.rotation) for k in range(n_frames - 2)]
    t2 = [by_k[k].two_step.translation for k in range(n_frames - 2)]

    q = np.zeros((n_frames, 4))
    tp = np.zeros((n_frames, 3))
    q[0] = quat_identity()
    if n_frames > 1:
        q[1] = quat_multiply(q1[0], q[0])
        tp[1] = t1[0]
    for k in range(2, n_frames):
        qa = quat_multiply(q2[k - 2], q[k - 2])
        qb = quat_multiply(q1[k - 1], q[k - 1])
        q[k] = slerp(qa, qb, 0.5)
        ta = quat_rotate(q2[k - 2], tp[k - 2]) + t2[k - 2]
        tb = quat_rotate(q1[k - 1], tp[k - 1]) + t1[k - 1]
        tp[k] = 0.5 * (ta + tb)

    positions = np.zeros((n_frames, 3))
    for k in range(1, n_frames):
        positions[k] = -quaternion_to_rotation(q[k]).T @ tp[k]
    return GlobalTrajectory(q, tp, positions)


def forward_pairs_from_world(world_poses) -> list[ForwardPosePair]:
    """Self-consistent forward pairs from camera-to-world poses."""
    n = len(world_poses)
    inv = [se3_inverse(W) for W in world_poses]
    pairs = []
    for k in range(n - 1):
        two = se3_compose(inv[k + 2], world_poses[k]) if k + 2 < n else None
        pairs.append(ForwardPosePair(k, se3_compose(inv[k + 1], world_poses[k]), two))
    return pairs


def chain_positions(pairs, n_frames: int) -> np.ndarray:
    """Camera centres from composing the one-step poses only (the splice oracle)."""
    by_k = {p.k: p for p in pairs}
    T = SE3Pose.identity()  # frame 0 -> frame k point map
    out = np.zeros((n_frames, 3))
    for k in range(1, n_frames):
        T = se3_compose(by_k[k - 1].one_step, T)
        out[k] = -T.rotation.T @ T.translation
    return out
