"""Trajectory error metrics and closed-form similarity alignment."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError, DimensionMismatchError
from .geometry import SE3Pose, quaternion_to_rotation

COLLINEAR_TOL = 1e-10


@dataclass(frozen=True)
class Alignment:
    """``target ~ scale * rotation @ source + translation``."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray
    residual: float = 0.0  # mean squared distance after alignment

    def apply(self, points) -> np.ndarray:
        return self.scale * np.asarray(points, float) @ self.rotation.T + self.translation


def _prepare(source, target):
    src = np.asarray(source, dtype=float)
    tgt = np.asarray(target, dtype=float)
    if src.ndim != 2 or src.shape[1] != 3 or src.shape != tgt.shape:
        raise DimensionMismatchError(f"point sets must both be (N, 3), got {src.shape} and {tgt.shape}")
    if len(src) < 3:
        raise DegenerateGeometryError(f"alignment needs at least 3 points, got {len(src)}")
    mu_s = src.mean(axis=0)
    mu_t = tgt.mean(axis=0)
    a = src - mu_s
    b = tgt - mu_t
    for pts, name in ((a, "source"), (b, "target")):
        sv = np.linalg.svd(pts, compute_uv=False)
        if sv[0] == 0 or sv[1] <= COLLINEAR_TOL * sv[0]:
            raise DegenerateGeometryError(f"{name} points are collinear or coincident")
    return src, tgt, mu_s, mu_t, a, b


def _finish(R, src, tgt, mu_s, mu_t, a):
    # optimal scale for a fixed rotation (asymmetric form: target is the reference)
    s = float(np.sum((a @ R.T) * (tgt - mu_t)) / np.sum(a * a))
    t = mu_t - s * R @ mu_s
    err = tgt - (s * src @ R.T + t)
    return Alignment(s, R, t, float(np.mean(np.sum(err * err, axis=1))))


def horn_align(source, target) -> Alignment:
    """Similarity minimising ``sum |target_i - (s R source_i + t)|^2``.

    The rotation is the eigenvector of the largest eigenvalue of Horn's
    symmetric 4x4 matrix built from the cross-covariance.
    """
    src, tgt, mu_s, mu_t, a, b = _prepare(source, target)
    S = a.T @ b
    (sxx, sxy, sxz), (syx, syy, syz), (szx, szy, szz) = S
    N = np.array(
        [
            [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
            [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
            [szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy],
            [sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz],
        ]
    )
    w, V = np.linalg.eigh(N)
    q = V[:, np.argmax(w)]
    R = quaternion_to_rotation(q)
    return _finish(R, src, tgt, mu_s, mu_t, a)


def svd_align(source, target) -> Alignment:
    """Same similarity via the SVD of the cross-covariance (Umeyama's
    reflection guard); used to cross-check :func:`horn_align`."""
    src, tgt, mu_s, mu_t, a, b = _prepare(source, target)
    U, _, Vt = np.linalg.svd(b.T @ a)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt)) or 1.0])
    R = U @ D @ Vt
    return _finish(R, src, tgt, mu_s, mu_t, a)


def snippet_ate(pred, gt) -> float:
    """Scale-aligned RMSE of a short window of positions.

    Both windows must already be expressed relative to their first frame.
    """
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise DimensionMismatchError(f"window shapes differ: {pred.shape} vs {gt.shape}")
    denom = float(np.sum(pred * pred))
    scale = float(np.sum(gt * pred)) / denom if denom > 0 else 0.0
    err = scale * pred - gt
    return float(np.sqrt(np.mean(np.sum(err * err, axis=1))))


def snippet_ate_horn(pred, gt) -> float:
    """Window RMSE after a full similarity alignment instead of scale only."""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    try:
        al = horn_align(pred, gt)
    except DegenerateGeometryError:
        return snippet_ate(pred, gt)
    return float(np.sqrt(al.residual))


@dataclass
class AteReport:
    values: list = field(default_factory=list)
    mean: float = 0.0
    std: float = 0.0

    @property
    def count(self) -> int:
        return len(self.values)

    @classmethod
    def from_values(cls, values) -> "AteReport":
        v = [float(x) for x in values]
        if not v:
            return cls([], float("nan"), float("nan"))
        arr = np.array(v)
        return cls(v, float(arr.mean()), float(arr.std()))

    def format(self, digits: int = 4) -> str:
        return f"{self.mean:.{digits}f}±{self.std:.{digits}f}"

    def __str__(self):
        return self.format()


def _as_poses(traj) -> list[SE3Pose]:
    if hasattr(traj, "camera_to_origin"):
        return traj.camera_to_origin()
    out = []
    for p in traj:
        out.append(p if isinstance(p, SE3Pose) else SE3Pose.from_matrix(p))
    return out


def window_positions(poses, start: int, length: int = 3) -> np.ndarray:
    """Camera centres of ``poses[start:start+length]`` in the first camera's frame."""
    base = poses[start].inverse()
    return np.stack([base.apply(poses[start + j].translation) for j in range(length)])


def sequence_ate(pred, gt, snippet_len: int = 3, mode: str = "scale") -> AteReport:
    """Mean and population std of per-window ATE over a sliding window.

    ``pred`` and ``gt`` are camera-to-world pose lists (or a
    :class:`~snippet_vo.trajectory.GlobalTrajectory` for ``pred``).
    ``mode`` is ``"scale"`` (scale-only alignment) or ``"horn"``.
    """
    if mode not in ("scale", "horn"):
        raise ValueError(f"unknown ATE mode {mode!r}")
    P = _as_poses(pred)
    G = _as_poses(gt)
    if len(P) != len(G):
        raise DimensionMismatchError(f"trajectory lengths differ: {len(P)} vs {len(G)}")
    if len(P) < snippet_len:
        raise DimensionMismatchError(f"need at least {snippet_len} frames, got {len(P)}")
    metric = snippet_ate if mode == "scale" else snippet_ate_horn
    vals = [
        metric(window_positions(P, i, snippet_len), window_positions(G, i, snippet_len))
        for i in range(len(P) - snippet_len + 1)
    ]
    return AteReport.from_values(vals)
