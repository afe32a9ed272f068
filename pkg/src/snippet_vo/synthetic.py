"""Synthetic scenes rendered by ray casting a textured plane.

The plane is ``z = plane_depth`` in world coordinates and carries a smooth
sum-of-sinusoids texture, so images and depths are exact functions of the
camera pose.  Used as a render oracle for pose recovery and for demo data.
"""

from __future__ import annotations

import numpy as np

from .camera import Intrinsics
from .geometry import SE3Pose, euler_to_rotation, euler_to_se3
from .loss import Snippet, SnippetPoses


def kitti_like_intrinsics(width: int = 416, height: int = 128) -> Intrinsics:
    """Intrinsics of a KITTI colour camera resized to ``width x height``."""
    sx, sy = width / 1242.0, height / 375.0
    return Intrinsics(721.5377 * sx, 721.5377 * sy, 609.5593 * sx, 172.854 * sy)


class SinusoidTexture:
    """``f(x, y) = mean + sum_k a_k g(w_k . (x, y) + phi_k)``, world units.

    ``g`` is ``sin`` when ``sharpness == 0``, otherwise the smooth square
    wave ``tanh(c sin(.)) / tanh(c)``; larger ``c`` gives flatter plateaus
    separated by soft edges.
    """

    def __init__(self, amplitudes, wavelengths, angles, phases, mean=0.5, sharpness=0.0):
        self.mean = mean
        self.sharpness = sharpness
        self.amplitudes = np.asarray(amplitudes, float)
        self.phases = np.asarray(phases, float)
        k = 2 * np.pi / np.asarray(wavelengths, float)
        self.freqs = np.stack([k * np.cos(angles), k * np.sin(angles)], axis=1)

    @classmethod
    def random(cls, rng, n=6, amplitude=0.04, wavelength=(2.5, 4.0), sharpness=0.0):
        return cls(
            sharpness=sharpness,
            amplitudes=np.full(n, amplitude / np.sqrt(n)) * rng.uniform(0.7, 1.3, n),
            wavelengths=rng.uniform(*wavelength, n),
            angles=rng.uniform(0, np.pi, n),
            phases=rng.uniform(0, 2 * np.pi, n),
        )

    def __call__(self, x, y):
        arg = x[..., None] * self.freqs[:, 0] + y[..., None] * self.freqs[:, 1] + self.phases
        g = np.sin(arg)
        if self.sharpness > 0:
            g = np.tanh(self.sharpness * g) / np.tanh(self.sharpness)
        return self.mean + np.sum(self.amplitudes * g, axis=-1)


def render_plane_view(cam_to_world: SE3Pose, K: Intrinsics, shape, texture, plane_depth=10.0):
    """Image and depth seen by a camera with the given camera-to-world pose."""
    h, w = shape
    v, u = np.mgrid[0:h, 0:w].astype(float)
    rays = np.stack([(u - K.cx) / K.fx, (v - K.cy) / K.fy, np.ones_like(u)], axis=-1)
    dirs = rays @ cam_to_world.rotation.T
    origin = cam_to_world.translation
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = (plane_depth - origin[2]) / dirs[..., 2]
    hit = np.isfinite(lam) & (lam > 0)
    lam = np.where(hit, lam, 0.0)
    pts = origin + lam[..., None] * dirs
    img = np.clip(texture(pts[..., 0], pts[..., 1]), 0.0, 1.0)
    img = np.where(hit, img, 0.0)
    # rays have unit z in the camera frame, so lam is the camera-frame depth
    depth = np.where(hit, lam, 0.0)
    return img, depth


def plane_snippet(poses: SnippetPoses, K: Intrinsics, shape=(128, 416), texture=None, plane_depth=10.0, seed=0):
    """Render a snippet whose middle camera is the world frame.

    ``prev_to_mid`` maps prev-camera points to mid-camera points, which is
    exactly the camera-to-world pose of the previous camera.
    """
    if texture is None:
        texture = SinusoidTexture.random(np.random.default_rng(seed))
    views = [
        render_plane_view(P, K, shape, texture, plane_depth)
        for P in (poses.prev_to_mid, SE3Pose.identity(), poses.next_to_mid)
    ]
    return Snippet(tuple(v[0] for v in views), tuple(v[1] for v in views))


def random_snippet_params(rng, max_translation=0.1, max_angle_deg=1.0):
    """Two random six-vectors with ``|t| <= max_translation`` and each angle
    within ``max_angle_deg``."""
    out = []
    for _ in range(2):
        ang = np.deg2rad(rng.uniform(-max_angle_deg, max_angle_deg, 3))
        direction = rng.normal(size=3)
        t = direction / np.linalg.norm(direction) * rng.uniform(0.5, 1.0) * max_translation
        out.append(np.concatenate([ang, t]))
    return out


def smooth_trajectory(n_frames: int, rng, step=1.0, yaw_rate_deg=2.0) -> list[SE3Pose]:
    """Camera-to-world poses of a forward-driving camera with gentle turns and
    small vertical motion, KITTI-style (z forward, y down)."""
    poses = [SE3Pose.identity()]
    yaw = 0.0
    pos = np.zeros(3)
    for _ in range(1, n_frames):
        yaw += np.deg2rad(rng.normal(0.0, yaw_rate_deg))
        pitch = np.deg2rad(rng.normal(0.0, 0.3))
        roll = np.deg2rad(rng.normal(0.0, 0.3))
        R = euler_to_rotation([pitch, yaw, roll])
        pos = pos + R @ np.array([0.0, rng.normal(0, 0.02), step * rng.uniform(0.8, 1.2)])
        poses.append(SE3Pose(R, pos))
    return poses


def plane_sequence(world_poses, K: Intrinsics, shape=(128, 416), texture=None, plane_depth=10.0, seed=0):
    """Images and depths of a plane seen from each camera-to-world pose."""
    if texture is None:
        texture = SinusoidTexture.random(np.random.default_rng(seed))
    views = [render_plane_view(P, K, shape, texture, plane_depth) for P in world_poses]
    return [v[0] for v in views], [v[1] for v in views]


def small_motion_sequence(n_frames: int, params) -> list[SE3Pose]:
    """Camera-to-world poses where every consecutive pair differs by the same
    six-parameter motion ``params`` (applied as a camera-to-previous-camera pose)."""
    step = euler_to_se3(params)
    poses = [SE3Pose.identity()]
    for _ in range(1, n_frames):
        poses.append(poses[-1] @ step)
    return poses


def mask_depth_border(s: Snippet, margin: int) -> Snippet:
    """Invalidate a ``margin``-pixel band of every depth map.

    Keeps warped pixels well inside the target frame, so small pose changes
    never move pixels in or out of the valid set.
    """
    depths = []
    for d in s.depths:
        d = np.array(d, dtype=float)
        d[:margin] = 0.0
        d[d.shape[0] - margin :] = 0.0
        d[:, :margin] = 0.0
        d[:, d.shape[1] - margin :] = 0.0
        depths.append(d)
    return Snippet(s.frames, tuple(depths))


def pixel_shift_sequence(shifts, K: Intrinsics, plane_depth=10.0) -> list[SE3Pose]:
    """Camera-to-world poses translating parallel to the plane so that
    consecutive frames differ by whole-pixel shifts ``(du, dv)``.

    Every warp between such frames lands on pixel centres, so bilinear
    sampling is exact and the true poses are a zero-loss minimum.
    """
    poses = [SE3Pose.identity()]
    for du, dv in shifts:
        step = np.array([du * plane_depth / K.fx, dv * plane_depth / K.fy, 0.0])
        poses.append(SE3Pose(np.eye(3), poses[-1].translation + step))
    return poses


# True motion of the reference snippet: about 1 degree and 0.09 depth units.
REFERENCE_PREV = np.r_[np.deg2rad([0.6, -0.8, 0.9]), -0.04, 0.01, -0.08]
REFERENCE_NEXT = np.r_[np.deg2rad([-0.7, 0.5, -0.9]), 0.05, -0.015, 0.07]


def reference_snippet(seed=1, wavelength=(12.0, 20.0), amplitude=0.03, margin=36, prev=None, next=None):
    """Plane snippet at 128x416 used for pose recovery and gradient checks.

    Returns ``(snippet, K, prev_params, next_params)``.  The texture varies
    over metres, so bilinear sampling error stays small, and the depth
    border of ``margin`` pixels is invalidated so the set of usable pixels
    does not change under pose perturbations of a couple of degrees.
    """
    K = kitti_like_intrinsics()
    prev = REFERENCE_PREV if prev is None else np.asarray(prev, float)
    next = REFERENCE_NEXT if next is None else np.asarray(next, float)
    poses = SnippetPoses(euler_to_se3(prev), euler_to_se3(next))
    texture = SinusoidTexture.random(np.random.default_rng(seed), wavelength=wavelength, amplitude=amplitude)
    s = mask_depth_border(plane_snippet(poses, K, texture=texture), margin)
    return s, K, prev.copy(), next.copy()


SWEEP_SHIFTS = ((1, -1), (-1, 1), (1, 1))


def sweep_sequence(shape=(64, 208), shifts=SWEEP_SHIFTS, seed=0, wavelength=(6.0, 10.0)):
    """Small sequence with whole-pixel motion for the edge-weight sweep.

    Returns ``(images, depths, world_poses, K)``.
    """
    h, w = shape
    K = kitti_like_intrinsics(w, h)
    world = pixel_shift_sequence(shifts, K)
    texture = SinusoidTexture.random(np.random.default_rng(seed), wavelength=wavelength, amplitude=0.03)
    images, depths = plane_sequence(world, K, shape, texture)
    return images, depths, world, K
