"""
Splicing snippets into a trajectory
===================================

Each snippet only knows how its three frames move relative to each other.
Splicing chains the snippets into one trajectory, merging the two routes
that reach every frame.  The result is scored with the three-frame ATE and
drawn as an SVG.
"""

from pathlib import Path

import numpy as np

from snippet_vo.evaluation import horn_align, sequence_ate
from snippet_vo.geometry import SE3Pose, euler_to_se3
from snippet_vo.io_formats import export_trajectory, gt_snippet_poses
from snippet_vo.loss import SnippetPoses
from snippet_vo.synthetic import smooth_trajectory
from snippet_vo.trajectory import gather_sequence, splice

rng = np.random.default_rng(2)
world = smooth_trajectory(200, rng)

###############################################################################
# Noisy snippet estimates: the true relative poses with small errors, and
# the scale of every snippet drawn at random (monocular scale is unknown).


def noisy(P: SnippetPoses) -> SnippetPoses:
    out = []
    for T in (P.prev_to_mid, P.next_to_mid):
        dR = euler_to_se3(np.r_[rng.normal(0, 2e-3, 3), 0, 0, 0]).rotation
        out.append(SE3Pose(dR @ T.rotation, T.translation * rng.uniform(0.9, 1.1) + rng.normal(0, 0.01, 3)))
    return SnippetPoses(*out)


snippets = [(t, noisy(gt_snippet_poses(world, t))) for t in range(1, len(world) - 1)]
traj = splice(gather_sequence(snippets))

report = sequence_ate(traj, world)
print("three-frame ATE:", report.format(), f"over {report.count} windows")

###############################################################################
# Whole-trajectory drift shows up only after a global similarity alignment.

centres = np.array([W.translation for W in world])
al = horn_align(traj.positions, centres)
drift = np.linalg.norm(al.apply(traj.positions) - centres, axis=1)
print(f"aligned scale {al.scale:.3f}, mean drift {drift.mean():.2f}, final drift {drift[-1]:.2f}")

aligned = [SE3Pose(np.eye(3), p) for p in al.apply(traj.positions)]
out = Path("demo_output")
out.mkdir(exist_ok=True)
(out / "trajectory.svg").write_bytes(export_trajectory(aligned, "svg", gt=world))
print("wrote", out / "trajectory.svg")
