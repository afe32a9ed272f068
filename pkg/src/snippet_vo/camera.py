"""Pinhole camera: back-projection, projection, the depth-based pixel warp and
its Jacobian with respect to the six pose parameters."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import BehindCameraError, InvalidDepthError
from .geometry import PoseJet, SE3Pose

EPS_Z = 1e-6


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        vals = (self.fx, self.fy, self.cx, self.cy)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("intrinsics must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def scaled(self, sx: float, sy: float) -> "Intrinsics":
        """Intrinsics after resizing the image by ``sx`` horizontally and ``sy`` vertically."""
        return Intrinsics(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy)


def backproject(p, d: float, K: Intrinsics) -> np.ndarray:
    if not d > 0:
        raise InvalidDepthError(f"depth must be positive, got {d}")
    u, v = p
    return np.array([d * (u - K.cx) / K.fx, d * (v - K.cy) / K.fy, d])


def project(X, K: Intrinsics, eps_z: float = EPS_Z) -> np.ndarray:
    x, y, z = X
    if not z > eps_z:
        raise BehindCameraError(f"point depth {z} is not in front of the camera")
    return np.array([K.fx * x / z + K.cx, K.fy * y / z + K.cy])


def warp_pixel(p1, d: float, K: Intrinsics, T: SE3Pose, eps_z: float = EPS_Z) -> np.ndarray:
    """Map pixel ``p1`` with depth ``d`` through ``T`` into the other view."""
    return project(T.apply(backproject(p1, d, K)), K, eps_z)


def backproject_depth(depth, K: Intrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Back-project every pixel of a depth raster.

    Returns ``(points, valid)`` with ``points`` of shape ``(H, W, 3)``;
    pixels with non-positive or non-finite depth are flagged invalid and
    their points are zero.
    """
    depth = np.asarray(depth, dtype=float)
    h, w = depth.shape
    valid = np.isfinite(depth) & (depth > 0)
    d = np.where(valid, depth, 0.0)
    v, u = np.mgrid[0:h, 0:w].astype(float)
    pts = np.stack([d * (u - K.cx) / K.fx, d * (v - K.cy) / K.fy, d], axis=-1)
    return pts, valid


def project_points(points, K: Intrinsics, eps_z: float = EPS_Z):
    """Vectorised projection of ``(..., 3)`` points.

    Returns ``(u, v, in_front)``; coordinates of points behind the camera are
    NaN.
    """
    points = np.asarray(points, dtype=float)
    z = points[..., 2]
    in_front = z > eps_z
    zs = np.where(in_front, z, np.nan)
    u = K.fx * points[..., 0] / zs + K.cx
    v = K.fy * points[..., 1] / zs + K.cy
    return u, v, in_front


class WarpField(NamedTuple):
    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray


def warp_field(depth, K: Intrinsics, T: SE3Pose, eps_z: float = EPS_Z) -> WarpField:
    """Warp every source pixel.  An entry is valid when its depth is valid, the
    transformed point is in front of the camera, and the warped coordinate
    lies in ``[0, W-1] x [0, H-1]``."""
    depth = np.asarray(depth, dtype=float)
    h, w = depth.shape
    pts, valid = backproject_depth(depth, K)
    u, v, in_front = project_points(T.apply(pts), K, eps_z)
    with np.errstate(invalid="ignore"):
        inside = (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)
    return WarpField(u, v, valid & in_front & inside)


def projection_jacobian(points, K: Intrinsics) -> np.ndarray:
    """d(u, v)/d(X, Y, Z) for ``(N, 3)`` camera-frame points; shape ``(N, 2, 3)``."""
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    iz = 1.0 / z
    J = np.zeros((len(points), 2, 3))
    J[:, 0, 0] = K.fx * iz
    J[:, 0, 2] = -K.fx * x * iz * iz
    J[:, 1, 1] = K.fy * iz
    J[:, 1, 2] = -K.fy * y * iz * iz
    return J


def point_jacobian(points, jet: PoseJet) -> np.ndarray:
    """d(T p)/d(params) for source points ``(N, 3)``; shape ``(N, 3, n)``."""
    # (n, 3, 3) @ (3, N) -> (n, 3, N)
    dY = jet.d_rotation @ points.T + jet.d_translation[:, :, None]
    return np.transpose(dY, (2, 1, 0))


def warp_jacobian(p1, d: float, K: Intrinsics, e, eps_z: float = EPS_Z) -> np.ndarray:
    """2x6 Jacobian of the warped pixel w.r.t. ``(alpha, beta, gamma, tx, ty, tz)``."""
    jet = PoseJet.from_euler(e)
    X = backproject(p1, d, K)
    Y = jet.rotation @ X + jet.translation
    if not Y[2] > eps_z:
        raise BehindCameraError(f"point depth {Y[2]} is not in front of the camera")
    Jp = projection_jacobian(Y[None, :], K)[0]
    return Jp @ point_jacobian(X[None, :], jet)[0]
