"""Readers and writers for poses, rasters, snippet results and trajectory plots.

Text formats print reals with 17 significant digits so that every
write-then-read round trip is lossless for float64.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import Intrinsics
from .errors import FormatError
from .geometry import SE3Pose, euler_to_se3, se3_compose, se3_inverse, se3_to_euler
from .image import resize_depth, resize_image
from .loss import SnippetPoses

ORTHONORMAL_TOL = 1e-3
WORKING_SIZE = (128, 416)  # (height, width)


def _fmt(x: float) -> str:
    s = "%.17g" % float(x)
    return "0" if s == "-0" else s


def _floats(tokens, line_no, what):
    try:
        return [float(t) for t in tokens]
    except ValueError:
        bad = next(t for t in tokens if not _is_float(t))
        raise FormatError(f"non-numeric token {bad!r} in {what}", f"line {line_no}") from None


def _is_float(t):
    try:
        float(t)
        return True
    except ValueError:
        return False


def _content_lines(text):
    for no, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            yield no, line.split()


# ---------------------------------------------------------------- KITTI poses


def _orthonormalize(R):
    U, _, Vt = np.linalg.svd(R)
    Q = U @ Vt
    if np.linalg.det(Q) < 0:
        Q = U @ np.diag([1.0, 1.0, -1.0]) @ Vt
    return Q


def read_kitti_poses(text: str) -> list[SE3Pose]:
    """Camera-to-world poses, one row-major ``3x4 [R | t]`` per line."""
    poses = []
    for no, tokens in _content_lines(text):
        if len(tokens) != 12:
            raise FormatError(f"expected 12 values, found {len(tokens)}", f"line {no}")
        M = np.array(_floats(tokens, no, "pose")).reshape(3, 4)
        R = M[:, :3]
        if not np.all(np.isfinite(M)):
            raise FormatError("non-finite value in pose", f"line {no}")
        if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHONORMAL_TOL or np.linalg.det(R) <= 0:
            raise FormatError("rotation block is not orthonormal within 1e-3", f"line {no}")
        # exactly orthonormal input is kept bit-for-bit
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-12:
            R = _orthonormalize(R)
        poses.append(SE3Pose(R, M[:, 3]))
    return poses


def write_kitti_poses(poses) -> str:
    lines = []
    for P in poses:
        M = np.hstack([P.rotation, P.translation[:, None]])
        lines.append(" ".join(_fmt(x) for x in M.ravel()))
    return "".join(line + "\n" for line in lines)


def gt_relative_pose(world, i: int, j: int) -> SE3Pose:
    """Point map from camera ``i`` to camera ``j`` given camera-to-world poses."""
    n = len(world)
    for idx in (i, j):
        if not 0 <= idx < n:
            raise IndexError(f"pose index {idx} outside 0..{n - 1}")
    return se3_compose(se3_inverse(world[j]), world[i])


def gt_snippet_poses(world, t: int) -> SnippetPoses:
    """Ground-truth snippet poses for the snippet centred at ``t``."""
    return SnippetPoses(gt_relative_pose(world, t - 1, t), gt_relative_pose(world, t + 1, t))


# ---------------------------------------------------------------- PGM


_PGM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def read_image_pgm(data: bytes) -> np.ndarray:
    """Grey image from P2 (ASCII) or P5 (binary) PGM, scaled to [0, 1] by maxval."""
    if data[:2] not in (b"P2", b"P5"):
        raise FormatError(f"bad PGM magic {data[:2]!r}", "byte 0")
    magic = data[:2]
    pos = 2
    header = []
    for _ in range(3):
        m = _PGM_TOKEN.match(data, pos)
        if not m:
            raise FormatError("truncated PGM header", f"byte {pos}")
        tok = m.group(1)
        if not tok.isdigit():
            raise FormatError(f"bad PGM header value {tok!r}", f"byte {m.start(1)}")
        header.append(int(tok))
        pos = m.end()
    w, h, maxval = header
    if w <= 0 or h <= 0 or not 0 < maxval < 65536:
        raise FormatError(f"bad PGM dimensions or maxval {w}x{h}/{maxval}", "header")
    if magic == b"P5":
        pos += 1  # single whitespace byte ends the header
        nbytes = 1 if maxval < 256 else 2
        need = w * h * nbytes
        payload = data[pos : pos + need]
        if len(payload) < need:
            raise FormatError(f"truncated PGM payload: expected {need} bytes, got {len(payload)}", f"byte {pos}")
        dtype = np.uint8 if nbytes == 1 else ">u2"
        vals = np.frombuffer(payload, dtype=dtype).astype(float)
    else:
        toks = data[pos:].split()
        if len(toks) < w * h:
            raise FormatError(f"truncated PGM payload: expected {w * h} values, got {len(toks)}", f"byte {pos}")
        try:
            vals = np.array([int(t) for t in toks[: w * h]], dtype=float)
        except ValueError:
            raise FormatError("non-integer PGM sample", f"byte {pos}") from None
    if np.any(vals > maxval):
        raise FormatError("PGM sample exceeds maxval", "payload")
    return vals.reshape(h, w) / maxval


def write_image_pgm(img, maxval: int = 255) -> bytes:
    """Binary P5 PGM of an image in [0, 1] (values are clipped and rounded)."""
    img = np.asarray(img, dtype=float)
    h, w = img.shape
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval)
    body = q.astype(np.uint8 if maxval < 256 else ">u2").tobytes()
    return f"P5\n{w} {h}\n{maxval}\n".encode() + body


def write_mask_pgm(mask) -> bytes:
    """Binary mask as P5 PGM with 0 / 255."""
    return write_image_pgm(np.asarray(mask, dtype=float), 255)


# ---------------------------------------------------------------- depth raster


def write_depth_raster(depth) -> bytes:
    """``DEPTH <w> <h>\\n`` then ``w*h`` little-endian float32, row-major."""
    d = np.asarray(depth)
    h, w = d.shape
    return f"DEPTH {w} {h}\n".encode() + d.astype("<f4").tobytes()


def read_depth_raster(data: bytes) -> np.ndarray:
    end = data.find(b"\n")
    if end < 0:
        raise FormatError("missing depth header line", "byte 0")
    parts = data[:end].split()
    if len(parts) != 3 or parts[0] != b"DEPTH" or not (parts[1].isdigit() and parts[2].isdigit()):
        raise FormatError(f"bad depth header {data[:end][:40]!r}", "line 1")
    w, h = int(parts[1]), int(parts[2])
    need = 4 * w * h
    payload = data[end + 1 :]
    if len(payload) != need:
        raise FormatError(f"depth payload has {len(payload)} bytes, expected {need}", f"byte {end + 1}")
    return np.frombuffer(payload, dtype="<f4").reshape(h, w).astype(np.float32)


# ---------------------------------------------------------------- snippet poses


def write_snippet_poses(results) -> str:
    """Two lines per ``(t, poses)``: ``t prev a b g tx ty tz`` and ``t next ...``.

    ``poses`` is a :class:`SnippetPoses` or anything with six-vector
    ``prev`` / ``next`` attributes (written as given, no conversion).
    """
    lines = []
    for t, P in results:
        if hasattr(P, "prev"):
            pair = (("prev", np.asarray(P.prev, float)), ("next", np.asarray(P.next, float)))
        else:
            pair = (("prev", se3_to_euler(P.prev_to_mid)), ("next", se3_to_euler(P.next_to_mid)))
        for tag, e in pair:
            lines.append(f"{int(t)} {tag} " + " ".join(_fmt(x) for x in e))
    return "".join(line + "\n" for line in lines)


def read_snippet_poses(text: str) -> list[tuple[int, SnippetPoses]]:
    found: dict[int, dict] = {}
    order = []
    for no, tokens in _content_lines(text):
        if len(tokens) != 8:
            raise FormatError(f"expected 8 fields, found {len(tokens)}", f"line {no}")
        if not re.fullmatch(r"-?\d+", tokens[0]):
            raise FormatError(f"bad snippet index {tokens[0]!r}", f"line {no}")
        t, tag = int(tokens[0]), tokens[1]
        if tag not in ("prev", "next"):
            raise FormatError(f"tag must be 'prev' or 'next', got {tag!r}", f"line {no}")
        vals = _floats(tokens[2:], no, "snippet pose")
        slot = found.setdefault(t, {})
        if t not in order:
            order.append(t)
        if tag in slot:
            raise FormatError(f"duplicate {tag} pose for snippet {t}", f"line {no}")
        slot[tag] = euler_to_se3(vals)
    out = []
    for t in order:
        slot = found[t]
        if set(slot) != {"prev", "next"}:
            raise FormatError(f"snippet {t} lacks a prev or next line", "end of file")
        out.append((t, SnippetPoses(slot["prev"], slot["next"])))
    return out


def read_snippet_params(text: str) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """Raw six-parameter vectors ``(t, prev, next)`` without converting to poses."""
    rows: dict[int, dict] = {}
    for no, tokens in _content_lines(text):
        if len(tokens) != 8 or tokens[1] not in ("prev", "next"):
            raise FormatError("malformed snippet pose line", f"line {no}")
        rows.setdefault(int(tokens[0]), {})[tokens[1]] = np.array(_floats(tokens[2:], no, "snippet pose"))
    return [(t, r["prev"], r["next"]) for t, r in rows.items()]


# ---------------------------------------------------------------- intrinsics


def read_intrinsics(text: str) -> Intrinsics:
    for no, tokens in _content_lines(text):
        if len(tokens) != 4:
            raise FormatError(f"expected 'fx fy cx cy', found {len(tokens)} values", f"line {no}")
        try:
            return Intrinsics(*_floats(tokens, no, "intrinsics"))
        except ValueError as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(str(exc), f"line {no}") from None
    raise FormatError("empty intrinsics file", "line 1")


def write_intrinsics(K: Intrinsics) -> str:
    return " ".join(_fmt(x) for x in (K.fx, K.fy, K.cx, K.cy)) + "\n"


# ---------------------------------------------------------------- trajectory export


def _positions(traj):
    if hasattr(traj, "positions"):
        return np.asarray(traj.positions, dtype=float)
    return np.array([P.translation for P in traj], dtype=float).reshape(-1, 3)


def export_trajectory(traj, fmt: str = "csv", gt=None) -> bytes:
    """CSV (``frame,x,y,z``) or a top-down ``(x, z)`` SVG polyline.

    ``traj`` is a GlobalTrajectory or a list of camera-to-world poses;
    ``gt`` (SVG only) adds the ground truth as a second polyline.
    """
    pos = _positions(traj)
    if len(pos) == 0:
        raise ValueError("cannot export an empty trajectory")
    if fmt == "csv":
        rows = ["frame,x,y,z"] + [f"{k},{_fmt(x)},{_fmt(y)},{_fmt(z)}" for k, (x, y, z) in enumerate(pos)]
        return ("\n".join(rows) + "\n").encode()
    if fmt != "svg":
        raise ValueError(f"unknown export format {fmt!r}")
    lines = [pos]
    if gt is not None:
        lines.append(_positions(gt))
    pts = np.vstack([p[:, [0, 2]] for p in lines])
    lo = pts.min(axis=0)
    span = pts.max(axis=0) - lo
    size = max(float(span.max()), 1e-9)
    margin = 0.05 * size
    vx, vy = lo[0] - margin, lo[1] - margin
    vw, vh = span[0] + 2 * margin, span[1] + 2 * margin
    vw, vh = max(vw, 2 * margin), max(vh, 2 * margin)
    stroke = _fmt(size / 200)
    out = [
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{_fmt(vx)} {_fmt(vy)} {_fmt(vw)} {_fmt(vh)}">',
        # flip z so that forward motion points up the page
        f'<g transform="translate(0 {_fmt(2 * vy + vh)}) scale(1 -1)">',
    ]
    for p, (cls, colour) in zip(lines, (("estimate", "#d62728"), ("ground-truth", "#1f77b4"))):
        coords = " ".join(f"{_fmt(x)},{_fmt(z)}" for x, z in p[:, [0, 2]])
        out.append(
            f'<polyline class="{cls}" fill="none" stroke="{colour}" stroke-width="{stroke}" points="{coords}"/>'
        )
    out += ["</g>", "</svg>"]
    return ("\n".join(out) + "\n").encode()


def parse_svg_points(svg: bytes) -> list[np.ndarray]:
    """The ``points`` attribute of each polyline, as ``(N, 2)`` arrays."""
    found = re.findall(rb'points="([^"]*)"', svg)
    return [np.array([[float(c) for c in pair.split(b",")] for pair in f.split()]) for f in found]


# ---------------------------------------------------------------- sequences


@dataclass
class SequenceDataset:
    """Frames, depths and intrinsics of one sequence at the working size."""

    images: list
    depths: list
    intrinsics: Intrinsics
    world_poses: list | None = None
    names: list | None = None

    def __len__(self):
        return len(self.images)

    def snippet(self, t: int):
        from .loss import Snippet

        if not 1 <= t <= len(self) - 2:
            raise IndexError(f"snippet centre {t} outside 1..{len(self) - 2}")
        return Snippet(tuple(self.images[t - 1 : t + 2]), tuple(self.depths[t - 1 : t + 2]))


def load_sequence(directory, intrinsics: Intrinsics, size=WORKING_SIZE, poses_file="poses.txt") -> SequenceDataset:
    """Load ``NNNNNN.pgm`` images with matching ``NNNNNN.depth`` rasters.

    ``intrinsics`` describe the stored images; when they are resized to
    ``size`` (height, width), fx and cx scale with the width ratio and fy, cy
    with the height ratio.  ``poses.txt`` (KITTI camera-to-world) is read
    when present.
    """
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"sequence directory not found: {d}")
    images = sorted(p for p in d.glob("*.pgm") if p.stem.isdigit())
    if len(images) < 3:
        raise FormatError(f"need at least 3 frames, found {len(images)}", str(d))
    h, w = size
    imgs, deps, native = [], [], None
    for p in images:
        dp = p.with_suffix(".depth")
        if not dp.exists():
            raise FormatError("missing depth raster for frame", str(dp))
        try:
            img = read_image_pgm(p.read_bytes())
        except FormatError as exc:
            raise FormatError(str(exc), str(p)) from None
        try:
            dep = read_depth_raster(dp.read_bytes()).astype(float)
        except FormatError as exc:
            raise FormatError(str(exc), str(dp)) from None
        if img.shape != dep.shape:
            raise FormatError(f"depth shape {dep.shape} differs from image {img.shape}", str(dp))
        if native is None:
            native = img.shape
        elif img.shape != native:
            raise FormatError(f"frame shape {img.shape} differs from {native}", str(p))
        imgs.append(resize_image(img, h, w))
        deps.append(resize_depth(dep, h, w))
    K = intrinsics.scaled(w / native[1], h / native[0])
    world = None
    pf = d / poses_file
    if pf.exists():
        try:
            world = read_kitti_poses(pf.read_text(encoding="utf-8"))
        except FormatError as exc:
            raise FormatError(str(exc), str(pf)) from None
        if len(world) != len(imgs):
            raise FormatError(f"{len(world)} poses for {len(imgs)} frames", str(pf))
    return SequenceDataset(imgs, deps, K, world, [p.stem for p in images])


def save_sequence(directory, images, depths, world_poses=None, intrinsics: Intrinsics | None = None):
    """Write a sequence in the layout :func:`load_sequence` reads."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for i, (img, dep) in enumerate(zip(images, depths)):
        (d / f"{i:06d}.pgm").write_bytes(write_image_pgm(img, 65535))
        (d / f"{i:06d}.depth").write_bytes(write_depth_raster(dep))
    if world_poses is not None:
        (d / "poses.txt").write_text(write_kitti_poses(world_poses), encoding="utf-8")
    if intrinsics is not None:
        (d / "intrinsics.txt").write_text(write_intrinsics(intrinsics), encoding="utf-8")
    return d

