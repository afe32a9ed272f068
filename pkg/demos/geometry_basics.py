"""
Poses, quaternions and interpolation
====================================

Six numbers describe how one camera sits relative to another: three Euler
angles and a translation.  This script builds a few poses, chains them and
walks halfway between two orientations.
"""

import numpy as np

from snippet_vo import geometry as g

# A pose maps points from one camera frame into another.  Rotations are
# applied as Rz(gamma) Ry(beta) Rx(alpha).
quarter_turn = g.euler_to_se3([np.pi / 2, 0, 0, 0, 0, 0])
print("x-axis quarter turn sends (0,1,0) to", np.round(quarter_turn.apply([0, 1, 0]), 12))

# Chaining: compose(B, A) applies A first.  Going forward and back again
# gives the identity.
A = g.euler_to_se3([0.1, -0.2, 0.3, 1.0, 0.0, 2.0])
B = g.euler_to_se3([0.0, 0.05, 0.0, 0.0, 0.0, 1.0])
round_trip = g.se3_compose(g.se3_inverse(A), A)
print("A^-1 A is identity:", np.allclose(round_trip.matrix, np.eye(4)))
print("camera centre of A:", np.round(g.camera_center(A), 4))

# Quaternions carry the same rotation in four numbers, kept with w >= 0.
q = g.rotation_to_quaternion(A.rotation)
print("quaternion of A:", np.round(q, 6), "norm", np.linalg.norm(q))

# Slerp moves along the shortest arc; u = 0.5 is the halfway orientation.
p = g.rotation_to_quaternion(B.rotation)
for u in (0.0, 0.25, 0.5, 0.75, 1.0):
    m = g.slerp(q, p, u)
    print(f"u={u:4.2f}  q={np.round(m, 4)}")
