"""Photometric view-synthesis losses over a three-frame snippet.

Frames are indexed ``0 = prev (t-1)``, ``1 = mid (t)``, ``2 = next (t+1)``.
Each snippet contributes six projections, two onto each target frame:

============  ======================================
projection    transform (point map source -> target)
============  ======================================
prev -> mid   ``T_{t-1,t}``  (``prev_to_mid``)
next -> mid   ``T_{t+1,t}``  (``next_to_mid``)
mid  -> prev  ``T_{t-1,t}^-1``
next -> prev  ``T_{t-1,t}^-1 T_{t+1,t}``
prev -> next  ``T_{t+1,t}^-1 T_{t-1,t}``
mid  -> next  ``T_{t+1,t}^-1``
============  ======================================

Every photometric term is the mean absolute difference between source
intensities and bilinearly sampled target intensities over the source pixels
that have valid depth and warp in front of the camera and inside the target
image.  ``reduction="sum"`` gives the raw sums instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import EPS_Z, Intrinsics, backproject_depth, projection_jacobian
from .errors import DimensionMismatchError
from .geometry import PoseJet, SE3Pose, euler_to_se3
from .image import bilinear, edge_mask, laplace

PREV, MID, NEXT = 0, 1, 2

# (name, source frame, target frame)
PROJECTIONS = (
    ("prev->mid", PREV, MID),
    ("next->mid", NEXT, MID),
    ("mid->prev", MID, PREV),
    ("next->prev", NEXT, PREV),
    ("prev->next", PREV, NEXT),
    ("mid->next", MID, NEXT),
)


def projection_transforms(prev_to_mid, next_to_mid) -> dict:
    """The six source->target point maps built from the two snippet poses.

    Works for both :class:`SE3Pose` and :class:`PoseJet` inputs.
    """
    mid_to_prev = prev_to_mid.inverse()
    mid_to_next = next_to_mid.inverse()
    return {
        "prev->mid": prev_to_mid,
        "next->mid": next_to_mid,
        "mid->prev": mid_to_prev,
        "next->prev": _compose(mid_to_prev, next_to_mid),
        "prev->next": _compose(mid_to_next, prev_to_mid),
        "mid->next": mid_to_next,
    }


def _compose(b, a):
    return b.compose(a) if isinstance(b, PoseJet) else b @ a


@dataclass(frozen=True, eq=False)
class Snippet:
    """Three consecutive grayscale frames with their depth maps."""

    frames: tuple
    depths: tuple

    def __post_init__(self):
        frames = tuple(np.asarray(f, dtype=float) for f in self.frames)
        depths = tuple(np.asarray(d, dtype=float) for d in self.depths)
        if len(frames) != 3 or len(depths) != 3:
            raise ValueError("a snippet holds exactly three frames and three depth maps")
        shapes = {a.shape for a in frames + depths}
        if len(shapes) != 1 or len(next(iter(shapes))) != 2:
            raise DimensionMismatchError(f"snippet rasters disagree in shape: {sorted(shapes)}")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "depths", depths)

    @property
    def shape(self):
        return self.frames[0].shape

    def swapped(self) -> "Snippet":
        """The same snippet with time reversed (prev and next exchanged)."""
        return Snippet(self.frames[::-1], self.depths[::-1])


@dataclass(frozen=True, eq=False)
class SnippetPoses:
    prev_to_mid: SE3Pose
    next_to_mid: SE3Pose

    @classmethod
    def identity(cls) -> "SnippetPoses":
        return cls(SE3Pose.identity(), SE3Pose.identity())


@dataclass(frozen=True)
class LossWeights:
    lambda_s: float = 0.5
    lambda_e: float = 20.0

    def __post_init__(self):
        for name in ("lambda_s", "lambda_e"):
            val = getattr(self, name)
            if not np.isfinite(val) or val < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {val}")


@dataclass
class LossBreakdown:
    l_t: float
    l_prev: float
    l_next: float
    l_smooth: float
    l_edge: float
    l_intensity: float
    l_final: float
    counts: dict = field(default_factory=dict)


def edge_masks(frames, kernel="four", percentile=90.0):
    return tuple(edge_mask(laplace(f, kernel), percentile) for f in frames)


def smooth_loss(depths, order: int = 2) -> float:
    """Mean over the maps of the mean absolute finite difference along u plus
    along v, over runs of valid pixels.  ``order`` is 2 (default) or 1."""
    if order not in (1, 2):
        raise ValueError("smoothness order must be 1 or 2")
    total = 0.0
    for d in depths:
        d = np.asarray(d, dtype=float)
        ok = np.isfinite(d) & (d > 0)
        total += _mean_abs_diff(d, ok, order, axis=1) + _mean_abs_diff(d, ok, order, axis=0)
    return total / len(depths)


def _mean_abs_diff(d, ok, order, axis):
    if d.shape[axis] <= order:
        return 0.0
    diff = np.diff(d, n=order, axis=axis)
    sl = [slice(None), slice(None)]
    valid = np.ones(diff.shape, dtype=bool)
    for k in range(order + 1):
        sl[axis] = slice(k, k + diff.shape[axis])
        valid &= ok[tuple(sl)]
    if not valid.any():
        return 0.0
    return float(np.abs(diff[valid]).mean())


class SnippetObjective:
    """Evaluates the snippet loss (and its pose gradient) for many poses.

    Back-projected source points and edge masks depend only on the images
    and depths, so they are computed once here.

    Parameters
    ----------
    snippet, K : the data and camera.
    weights : smoothness and edge weights.
    masks : optional per-frame edge masks; computed with ``kernel`` and
        ``percentile`` when omitted.
    edge_all_targets : also restrict the four projections onto the outer
        frames to their source edge masks for the edge term.
    reduction : ``"mean"`` (default) or ``"sum"``.
    """

    def __init__(
        self,
        snippet: Snippet,
        K: Intrinsics,
        weights: LossWeights = LossWeights(),
        masks=None,
        kernel="four",
        percentile=90.0,
        smooth_order=2,
        edge_all_targets=False,
        reduction="mean",
        eps_z=EPS_Z,
    ):
        if reduction not in ("mean", "sum"):
            raise ValueError("reduction must be 'mean' or 'sum'")
        self.snippet = snippet
        self.K = K
        self.weights = weights
        self.reduction = reduction
        self.eps_z = eps_z
        self.edge_all_targets = edge_all_targets
        if masks is None:
            masks = edge_masks(snippet.frames, kernel, percentile)
        self.masks = tuple(None if m is None else np.asarray(m, dtype=bool).ravel() for m in masks)
        for m in self.masks:
            if m is not None and m.size != snippet.frames[0].size:
                raise DimensionMismatchError("edge mask shape does not match the snippet")
        self.points = []
        self.valid = []
        for d in snippet.depths:
            pts, ok = backproject_depth(d, K)
            self.points.append(pts.reshape(-1, 3))
            self.valid.append(ok.ravel())
        self.intensity = [f.ravel() for f in snippet.frames]
        v, u = np.mgrid[0 : snippet.shape[0], 0 : snippet.shape[1]]
        self._grid = (u.ravel().astype(float), v.ravel().astype(float))
        self.l_smooth = smooth_loss(snippet.depths, smooth_order)

    def edge_projections(self):
        if self.edge_all_targets:
            return [name for name, _, _ in PROJECTIONS]
        return ["prev->mid", "next->mid"]

    def _project(self, src, tgt, R, t):
        """Residuals of one projection; returns arrays over the usable pixels."""
        h, w = self.snippet.shape
        X = self.points[src]
        Y = X @ R.T + t
        z = Y[:, 2]
        ok = self.valid[src] & (z > self.eps_z)
        if np.array_equal(R, np.eye(3)) and not np.any(t):
            # exact pixel centres; projecting back would add rounding noise
            u, v = self._grid
        else:
            zs = np.where(ok, z, 1.0)
            u = self.K.fx * Y[:, 0] / zs + self.K.cx
            v = self.K.fy * Y[:, 1] / zs + self.K.cy
        ok &= (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)
        idx = np.flatnonzero(ok)
        val, gu, gv = bilinear(self.snippet.frames[tgt], u[idx], v[idx], with_gradient=True)
        r = self.intensity[src][idx] - val
        return idx, r, gu, gv, Y[idx]

    def _reduce(self, r, n_params, jet, X, Y, gu, gv, need_grad):
        n = len(r)
        if n == 0:
            return 0.0, 0, (np.zeros(n_params) if need_grad else None)
        scale = 1.0 / n if self.reduction == "mean" else 1.0
        value = float(np.sum(np.abs(r)) * scale)
        if not need_grad:
            return value, n, None
        # dL/dY_i = -sign(r_i) * scale * (grad I)_i . d(u,v)/dY_i
        Jp = projection_jacobian(Y, self.K)
        s = np.sign(r) * scale
        a = -(s * gu)[:, None] * Jp[:, 0, :] - (s * gv)[:, None] * Jp[:, 1, :]
        M = a.T @ X
        grad = np.einsum("kij,ij->k", jet.d_rotation, M) + jet.d_translation @ a.sum(axis=0)
        return value, n, grad

    def linearize(self, prev, next):
        """Per-pixel residuals, their 12-parameter Jacobian rows and the
        weight each pixel carries in ``l_final``.

        ``l_final`` equals ``sum(weights * |residuals|)`` plus the
        pose-independent smoothness term (for ``reduction="mean"`` the weights
        are ``1/count`` plus ``lambda_e/edge_count`` on edge pixels).
        """
        jets = projection_transforms(PoseJet.from_euler(prev, 0, 12), PoseJet.from_euler(next, 6, 12))
        edge_names = self.edge_projections()
        rs, Js, cs = [], [], []
        for name, src, tgt in PROJECTIONS:
            jet = jets[name]
            idx, r, gu, gv, Y = self._project(src, tgt, jet.rotation, jet.translation)
            if len(r) == 0:
                continue
            X = self.points[src][idx]
            Jp = projection_jacobian(Y, self.K)
            a = gu[:, None] * Jp[:, 0, :] + gv[:, None] * Jp[:, 1, :]
            # dY/dtheta: (N, 3, 12)
            dY = np.einsum("kij,nj->nik", jet.d_rotation, X) + jet.d_translation.T[None]
            rows = -np.einsum("ni,nik->nk", a, dY)
            c = np.full(len(r), 1.0 / len(r) if self.reduction == "mean" else 1.0)
            m = self.masks[src]
            if name in edge_names and m is not None:
                sel = m[idx]
                ne = int(sel.sum())
                if ne:
                    c[sel] += self.weights.lambda_e * (1.0 / ne if self.reduction == "mean" else 1.0)
            rs.append(r)
            Js.append(rows)
            cs.append(c)
        if not rs:
            return np.zeros(0), np.zeros((0, 12)), np.zeros(0)
        return np.concatenate(rs), np.concatenate(Js), np.concatenate(cs)

    def evaluate(self, prev, next, need_grad=False):
        """Loss breakdown for poses given as six-vectors (or SE3Pose without
        gradient).  Returns ``(LossBreakdown, grad)``; ``grad`` is the
        12-gradient of ``l_final`` w.r.t. ``(prev params, next params)`` or None."""
        if isinstance(prev, SE3Pose):
            if need_grad:
                raise ValueError("gradients require six-parameter poses")
            jets = projection_transforms(prev, next)
        else:
            jets = projection_transforms(
                PoseJet.from_euler(prev, 0, 12), PoseJet.from_euler(next, 6, 12)
            )
        lam_e = self.weights.lambda_e
        edge_names = self.edge_projections()
        values, counts = {}, {}
        edge_value = 0.0
        grad = np.zeros(12) if need_grad else None
        for name, src, tgt in PROJECTIONS:
            jet = jets[name]
            idx, r, gu, gv, Y = self._project(src, tgt, jet.rotation, jet.translation)
            X = self.points[src][idx]
            v, n, g = self._reduce(r, 12, jet, X, Y, gu, gv, need_grad)
            values[name], counts[name] = v, n
            if need_grad:
                grad += g
            if name in edge_names:
                m = self.masks[src]
                if m is None:
                    continue
                sel = m[idx]
                ve, ne, ge = self._reduce(r[sel], 12, jet, X[sel], Y[sel], gu[sel], gv[sel], need_grad)
                edge_value += ve
                counts["edge:" + name] = ne
                if need_grad:
                    grad += lam_e * ge
        l_t = values["prev->mid"] + values["next->mid"]
        l_prev = values["mid->prev"] + values["next->prev"]
        l_next = values["prev->next"] + values["mid->next"]
        l_int = l_t + l_prev + l_next + self.weights.lambda_s * self.l_smooth
        out = LossBreakdown(
            l_t=l_t,
            l_prev=l_prev,
            l_next=l_next,
            l_smooth=self.l_smooth,
            l_edge=edge_value,
            l_intensity=l_int,
            l_final=l_int + lam_e * edge_value,
            counts=counts,
        )
        return out, grad


def photometric_term(src_img, src_depth, tgt_img, K: Intrinsics, T: SE3Pose, mask=None, reduction="mean"):
    """One warped-intensity error term, returned as ``(value, pixel_count)``."""
    src_img = np.asarray(src_img, dtype=float)
    shapes = {np.shape(src_img), np.shape(src_depth), np.shape(tgt_img)}
    if mask is not None:
        shapes.add(np.shape(mask))
    if len(shapes) != 1:
        raise DimensionMismatchError(f"raster shapes disagree: {sorted(shapes)}")
    obj = SnippetObjective(
        Snippet((src_img, tgt_img, tgt_img), (src_depth, src_depth, src_depth)),
        K,
        masks=(None, None, None),
        reduction=reduction,
    )
    idx, r, _, _, _ = obj._project(PREV, MID, T.rotation, T.translation)
    if mask is not None:
        r = r[np.asarray(mask, dtype=bool).ravel()[idx]]
    if len(r) == 0:
        return 0.0, 0
    total = float(np.sum(np.abs(r)))
    return (total / len(r) if reduction == "mean" else total), len(r)


def _poses(P: SnippetPoses):
    return P.prev_to_mid, P.next_to_mid


def loss_t(s: Snippet, P: SnippetPoses, K: Intrinsics) -> float:
    a, _ = photometric_term(s.frames[PREV], s.depths[PREV], s.frames[MID], K, P.prev_to_mid)
    b, _ = photometric_term(s.frames[NEXT], s.depths[NEXT], s.frames[MID], K, P.next_to_mid)
    return a + b


def loss_prev(s: Snippet, P: SnippetPoses, K: Intrinsics) -> float:
    T = projection_transforms(*_poses(P))
    a, _ = photometric_term(s.frames[MID], s.depths[MID], s.frames[PREV], K, T["mid->prev"])
    b, _ = photometric_term(s.frames[NEXT], s.depths[NEXT], s.frames[PREV], K, T["next->prev"])
    return a + b


def loss_next(s: Snippet, P: SnippetPoses, K: Intrinsics) -> float:
    T = projection_transforms(*_poses(P))
    a, _ = photometric_term(s.frames[PREV], s.depths[PREV], s.frames[NEXT], K, T["prev->next"])
    b, _ = photometric_term(s.frames[MID], s.depths[MID], s.frames[NEXT], K, T["mid->next"])
    return a + b


def edge_loss(s: Snippet, P: SnippetPoses, K: Intrinsics, masks) -> float:
    """Edge-restricted error of the two projections onto the middle frame.

    ``masks`` is ``(prev_mask, next_mask)`` over source pixels.
    """
    m_prev, m_next = masks
    a, _ = photometric_term(s.frames[PREV], s.depths[PREV], s.frames[MID], K, P.prev_to_mid, mask=m_prev)
    b, _ = photometric_term(s.frames[NEXT], s.depths[NEXT], s.frames[MID], K, P.next_to_mid, mask=m_next)
    return a + b


def total_loss(
    s: Snippet,
    P: SnippetPoses,
    K: Intrinsics,
    w: LossWeights = LossWeights(),
    laplace_kernel="four",
    percentile=90.0,
    **options,
) -> LossBreakdown:
    obj = SnippetObjective(s, K, w, kernel=laplace_kernel, percentile=percentile, **options)
    return obj.evaluate(P.prev_to_mid, P.next_to_mid)[0]


def dataset_loss(snippets, poses, K: Intrinsics, w: LossWeights = LossWeights(), **options) -> float:
    """Mean of the per-snippet final losses."""
    finals = [total_loss(s, P, K, w, **options).l_final for s, P in zip(snippets, poses)]
    return float(np.mean(finals)) if finals else 0.0


def params_to_poses(prev, next) -> SnippetPoses:
    return SnippetPoses(euler_to_se3(prev), euler_to_se3(next))
