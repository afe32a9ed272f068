"""Rigid-body math: Euler-parameterised rotations, SE(3) point transforms,
unit quaternions and slerp.

Conventions
-----------
* A six-parameter pose is ``(alpha, beta, gamma, tx, ty, tz)``; the rotation is
  ``R = Rz(gamma) @ Ry(beta) @ Rx(alpha)`` acting on column points.
* :class:`SE3Pose` is a *point* transform, ``p2 = R @ p1 + t``.
* Quaternions are ``numpy`` arrays ``[w, x, y, z]`` (Hamilton product), kept
  in canonical sign: ``w >= 0``, and when ``w == 0`` the first nonzero of
  ``x, y, z`` is positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidRotationError

ORTHONORMAL_TOL = 1e-6
SLERP_SIN_EPS = 1e-9


def _rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(b):
    c, s = np.cos(b), np.sin(b)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rz(g):
    c, s = np.cos(g), np.sin(g)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _drx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[0.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]])


def _dry(b):
    c, s = np.cos(b), np.sin(b)
    return np.array([[-s, 0.0, c], [0.0, 0.0, 0.0], [-c, 0.0, -s]])


def _drz(g):
    c, s = np.cos(g), np.sin(g)
    return np.array([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]])


def euler_to_rotation(e) -> np.ndarray:
    """Rotation matrix of a six-parameter pose (only the angles are read)."""
    alpha, beta, gamma = (float(x) for x in np.asarray(e, dtype=float)[:3])
    return _rz(gamma) @ _ry(beta) @ _rx(alpha)


def rotation_to_euler(R) -> np.ndarray:
    """Inverse of :func:`euler_to_rotation`, returning ``(alpha, beta, gamma)``.

    Unique for ``|beta| < pi/2``.
    """
    R = np.asarray(R, dtype=float)
    beta = np.arctan2(-R[2, 0], np.hypot(R[0, 0], R[1, 0]))
    alpha = np.arctan2(R[2, 1], R[2, 2])
    gamma = np.arctan2(R[1, 0], R[0, 0])
    return np.array([alpha, beta, gamma])


@dataclass(frozen=True, eq=False)
class SE3Pose:
    """Rigid point transform ``p -> rotation @ p + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValueError("pose entries must be finite")
        if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHONORMAL_TOL or np.linalg.det(R) <= 0:
            raise InvalidRotationError("rotation block is not a proper rotation")
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "SE3Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, M) -> "SE3Pose":
        M = np.asarray(M, dtype=float)
        return cls(M[:3, :3], M[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def apply(self, points) -> np.ndarray:
        """Transform a point ``(3,)`` or a stack of points ``(..., 3)``."""
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def inverse(self) -> "SE3Pose":
        return se3_inverse(self)

    def __matmul__(self, other: "SE3Pose") -> "SE3Pose":
        return se3_compose(self, other)

    def allclose(self, other: "SE3Pose", atol=1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, rtol=0, atol=atol)
            and np.allclose(self.translation, other.translation, rtol=0, atol=atol)
        )

    def __repr__(self):
        return f"SE3Pose(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"


def euler_to_se3(e) -> SE3Pose:
    e = np.asarray(e, dtype=float)
    return SE3Pose(euler_to_rotation(e), e[3:6])


def se3_to_euler(T: SE3Pose) -> np.ndarray:
    return np.concatenate([rotation_to_euler(T.rotation), T.translation])


def se3_inverse(T: SE3Pose) -> SE3Pose:
    Rt = T.rotation.T
    return SE3Pose(Rt, -Rt @ T.translation)


def se3_compose(B: SE3Pose, A: SE3Pose) -> SE3Pose:
    """Transform applying ``A`` first, then ``B``."""
    return SE3Pose(B.rotation @ A.rotation, B.rotation @ A.translation + B.translation)


def camera_center(T: SE3Pose) -> np.ndarray:
    """The point mapped to the origin by ``T``, i.e. ``-R^T t``."""
    return -T.rotation.T @ T.translation


class PoseJet:
    """An SE(3) transform together with its derivatives w.r.t. ``n`` parameters.

    ``d_rotation`` has shape ``(n, 3, 3)`` and ``d_translation`` ``(n, 3)``.
    Used to push pose-parameter derivatives through the inverses and
    compositions that build each projection.
    """

    def __init__(self, rotation, translation, d_rotation, d_translation):
        self.rotation = rotation
        self.translation = translation
        self.d_rotation = d_rotation
        self.d_translation = d_translation

    @classmethod
    def from_euler(cls, e, offset=0, n_params=6) -> "PoseJet":
        """Jet of :func:`euler_to_se3` whose six parameters sit at
        ``offset .. offset+5`` of an ``n_params`` vector."""
        e = np.asarray(e, dtype=float)
        a, b, g = e[:3]
        rx, ry, rz = _rx(a), _ry(b), _rz(g)
        dR = np.zeros((n_params, 3, 3))
        dR[offset + 0] = rz @ ry @ _drx(a)
        dR[offset + 1] = rz @ _dry(b) @ rx
        dR[offset + 2] = _drz(g) @ ry @ rx
        dt = np.zeros((n_params, 3))
        dt[offset + 3 : offset + 6] = np.eye(3)
        return cls(rz @ ry @ rx, e[3:6].copy(), dR, dt)

    @property
    def pose(self) -> SE3Pose:
        return SE3Pose(self.rotation, self.translation)

    def inverse(self) -> "PoseJet":
        Rt = self.rotation.T
        dRt = np.transpose(self.d_rotation, (0, 2, 1))
        t = -Rt @ self.translation
        dt = -(dRt @ self.translation) - self.d_translation @ self.rotation
        return PoseJet(Rt, t, dRt, dt)

    def compose(self, other: "PoseJet") -> "PoseJet":
        """Jet of ``self o other`` (``other`` applied first)."""
        R = self.rotation @ other.rotation
        t = self.rotation @ other.translation + self.translation
        dR = self.d_rotation @ other.rotation + self.rotation @ other.d_rotation
        dt = (
            self.d_rotation @ other.translation
            + other.d_translation @ self.rotation.T
            + self.d_translation
        )
        return PoseJet(R, t, dR, dt)


# ---------------------------------------------------------------- quaternions


def quat_canonical(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q)
    if q[0] < 0:
        return -q
    if q[0] == 0:
        for c in q[1:]:
            if c != 0:
                return -q if c < 0 else q
    return q


def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_from_axis_angle(axis, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return quat_canonical(np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * axis]))


def rotation_to_quaternion(R) -> np.ndarray:
    """Unit quaternion of an orthonormal matrix (Shepperd's branch selection).

    Raises InvalidRotationError if ``R`` is not a proper rotation within
    1e-6.
    """
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise InvalidRotationError("rotation must be a finite 3x3 matrix")
    if (
        np.max(np.abs(R.T @ R - np.eye(3))) > ORTHONORMAL_TOL
        or abs(np.linalg.det(R) - 1.0) > ORTHONORMAL_TOL
    ):
        raise InvalidRotationError("matrix is not a proper rotation")

    tr = np.trace(R)
    diag = np.diag(R)
    k = int(np.argmax(diag))
    if tr >= diag[k]:
        w = 0.5 * np.sqrt(max(0.0, 1.0 + tr))
        f = 0.25 / w
        q = [w, (R[2, 1] - R[1, 2]) * f, (R[0, 2] - R[2, 0]) * f, (R[1, 0] - R[0, 1]) * f]
    elif k == 0:
        x = 0.5 * np.sqrt(max(0.0, 1.0 + R[0, 0] - R[1, 1] - R[2, 2]))
        f = 0.25 / x
        q = [(R[2, 1] - R[1, 2]) * f, x, (R[0, 1] + R[1, 0]) * f, (R[0, 2] + R[2, 0]) * f]
    elif k == 1:
        y = 0.5 * np.sqrt(max(0.0, 1.0 - R[0, 0] + R[1, 1] - R[2, 2]))
        f = 0.25 / y
        q = [(R[0, 2] - R[2, 0]) * f, (R[0, 1] + R[1, 0]) * f, y, (R[1, 2] + R[2, 1]) * f]
    else:
        z = 0.5 * np.sqrt(max(0.0, 1.0 - R[0, 0] - R[1, 1] + R[2, 2]))
        f = 0.25 / z
        q = [(R[1, 0] - R[0, 1]) * f, (R[0, 2] + R[2, 0]) * f, (R[1, 2] + R[2, 1]) * f, z]
    return quat_canonical(q)


def quaternion_to_rotation(q) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def _hamilton(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_multiply(a, b) -> np.ndarray:
    """Hamilton product ``a * b`` (rotation ``b`` first, then ``a``)."""
    return quat_canonical(_hamilton(np.asarray(a, float), np.asarray(b, float)))


def quat_conjugate(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q, v) -> np.ndarray:
    """Rotate a 3-vector by ``q * (0, v) * q^-1``."""
    q = np.asarray(q, dtype=float)
    p = np.concatenate([[0.0], np.asarray(v, dtype=float)])
    return _hamilton(_hamilton(q, p), quat_conjugate(q))[1:]


def slerp(q1, q2, u) -> np.ndarray:
    """Shortest-arc spherical interpolation, ``u`` in ``[0, 1]``."""
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    dot = float(np.dot(q1, q2))
    if dot < 0:
        q2 = -q2
        dot = -dot
    dot = min(dot, 1.0)
    theta = np.arccos(dot)
    s = np.sin(theta)
    if s < SLERP_SIN_EPS:
        q = (1 - u) * q1 + u * q2
    else:
        q = (np.sin((1 - u) * theta) * q1 + np.sin(u * theta) * q2) / s
    return quat_canonical(q)
