"""Command-line entry point: ``snippet-vo <subcommand> ...``.

Exit status is 0 on success, 1 for usage errors (bad or missing flags) and 2
for data errors (unreadable or malformed inputs, degenerate data).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, SnippetVOError
from .evaluation import horn_align, sequence_ate
from .image import edge_mask, kernel_name, laplace
from .io_formats import (
    export_trajectory,
    gt_snippet_poses,
    load_sequence,
    read_image_pgm,
    read_intrinsics,
    read_kitti_poses,
    read_snippet_poses,
    write_kitti_poses,
    write_mask_pgm,
    write_snippet_poses,
)
from .loss import LossWeights, SnippetPoses
from .optimizer import OptimizerConfig, _map, lambda_sweep, make_objective, optimize_snippet
from .trajectory import gather_sequence, splice

log = logging.getLogger("snippet_vo")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
DEFAULT_SWEEP = (1.0,) + tuple(float(x) for x in range(10, 101, 10))


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    """Settings shared by the subcommands that touch images."""

    subcommand: str
    lambda_s: float = 0.5
    lambda_e: float = 20.0
    kernel: str = "four"
    percentile: float = 90.0
    size: tuple = (128, 416)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        weights = LossWeights(args.lambda_s, args.lambda_e)
        opt = OptimizerConfig(
            learning_rate=args.lr,
            max_iters=args.max_iters,
            rel_tol=args.rel_tol,
            weights=weights,
            kernel=args.kernel,
            percentile=args.percentile,
            method=args.method,
        )
        return cls(args.command, args.lambda_s, args.lambda_e, args.kernel, args.percentile, args.size, opt)


# ---------------------------------------------------------------- argument types


def _size(text):
    try:
        h, w = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 128x416, got {text!r}") from None
    if h < 3 or w < 3:
        raise argparse.ArgumentTypeError("size must be at least 3x3")
    return (h, w)


def _kernel(text):
    try:
        return kernel_name(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _percentile(text):
    p = float(text)
    if not 0 <= p <= 100:
        raise argparse.ArgumentTypeError("percentile must lie in [0, 100]")
    return p


def _nonneg(text):
    x = float(text)
    if not x >= 0:
        raise argparse.ArgumentTypeError("value must be non-negative")
    return x


def _positive_int(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("value must be a positive integer")
    return n


def _lambda_list(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad lambda list {text!r}") from None
    if not vals or any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError("lambda values must be a non-empty list of non-negative numbers")
    return vals


def _add_image_flags(p):
    p.add_argument("--kernel", type=_kernel, default="four", help="Laplace kernel: 4/four or 8/eight (default four)")
    p.add_argument("--percentile", type=_percentile, default=90.0, help="edge threshold percentile (default 90)")


def _add_run_flags(p, lambda_e=True):
    p.add_argument("--seq", required=True, help="sequence directory (NNNNNN.pgm + NNNNNN.depth)")
    p.add_argument("--intrinsics", required=True, help="file with one line 'fx fy cx cy' for the stored images")
    p.add_argument("--size", type=_size, default=(128, 416), help="working size HxW (default 128x416)")
    p.add_argument("--lambda-s", type=_nonneg, default=0.5, help="depth smoothness weight (default 0.5)")
    if lambda_e:
        p.add_argument("--lambda-e", type=_nonneg, default=20.0, help="edge term weight (default 20)")
    _add_image_flags(p)
    p.add_argument("--method", choices=("adam", "gauss_newton"), default="adam", help="minimiser (default adam)")
    p.add_argument("--lr", type=float, default=2e-4, help="Adam learning rate (default 2e-4)")
    p.add_argument("--max-iters", type=_positive_int, default=200, help="iteration cap (default 200)")
    p.add_argument("--rel-tol", type=_nonneg, default=1e-6, help="relative loss change for convergence")
    p.add_argument("--workers", type=_positive_int, default=1, help="worker processes (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="snippet-vo", description="Direct three-frame visual odometry tools.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("edges", help="edge mask of a PGM image")
    p.add_argument("--in", dest="input", required=True, help="input PGM image")
    p.add_argument("--out", required=True, help="output mask (PGM, 0/255)")
    _add_image_flags(p)

    p = sub.add_parser("loss", help="evaluate the snippet loss for given poses")
    _add_run_flags(p)
    p.add_argument("--poses", help="snippet pose file (default: identity motion for every snippet)")
    p.add_argument("--out", help="CSV output (default stdout)")

    p = sub.add_parser("optimize", help="estimate the two poses of every snippet")
    _add_run_flags(p)
    p.add_argument("--warm-start", action="store_true", help="initialise each snippet from the previous result")
    p.add_argument("--out", required=True, help="output snippet pose file")

    p = sub.add_parser("stitch", help="splice snippet poses into a trajectory")
    p.add_argument("--poses", required=True, help="snippet pose file")
    p.add_argument("--average-overlap", action="store_true", help="merge both estimates of each one-step pose")
    p.add_argument("--out", required=True, help="output trajectory (KITTI camera-to-frame-0 poses)")

    p = sub.add_parser("ate", help="three-frame ATE between two pose files")
    p.add_argument("--pred", required=True, help="estimated poses (KITTI format)")
    p.add_argument("--gt", required=True, help="ground-truth poses (KITTI format)")
    p.add_argument("--mode", choices=("scale", "horn"), default="scale", help="per-window alignment")

    p = sub.add_parser("align", help="similarity-align estimated camera centres to ground truth")
    p.add_argument("--pred", required=True, help="estimated poses (KITTI format)")
    p.add_argument("--gt", required=True, help="ground-truth poses (KITTI format)")
    p.add_argument("--out", help="write the aligned estimate (KITTI format)")

    p = sub.add_parser("plot", help="export a trajectory as CSV or SVG")
    p.add_argument("--traj", required=True, help="trajectory poses (KITTI format)")
    p.add_argument("--gt", help="ground truth to overlay (SVG) and align to")
    p.add_argument("--format", choices=("csv", "svg"), default=None, help="default: from the output suffix")
    p.add_argument("--out", required=True, help="output file")

    p = sub.add_parser("sweep", help="ATE as a function of the edge weight")
    _add_run_flags(p, lambda_e=False)
    p.add_argument(
        "--lambdas", type=_lambda_list, default=list(DEFAULT_SWEEP), help="comma-separated edge weights (default 1,10,...,100)"
    )
    p.add_argument("--out", help="CSV output (default stdout)")
    return parser


# ---------------------------------------------------------------- helpers


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FileNotFoundError(f"{path}: file not found") from None


def _read_poses(path):
    try:
        return read_kitti_poses(_read_text(path))
    except FormatError as exc:
        raise FormatError(str(exc), path) from None


def _emit(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load(args):
    try:
        K = read_intrinsics(_read_text(args.intrinsics))
    except FormatError as exc:
        raise FormatError(str(exc), args.intrinsics) from None
    return load_sequence(args.seq, K, size=args.size)


def _fmt(x) -> str:
    return "%.17g" % float(x)


# ---------------------------------------------------------------- subcommands


def cmd_edges(args, cfg):
    img = read_image_pgm(Path(args.input).read_bytes())
    mask = edge_mask(laplace(img, args.kernel), args.percentile)
    Path(args.out).write_bytes(write_mask_pgm(mask))
    log.info("%d of %d pixels marked", int(mask.sum()), mask.size)


def cmd_loss(args, cfg):
    data = _load(args)
    centers = range(1, len(data) - 1)
    if args.poses:
        given = dict(read_snippet_poses(_read_text(args.poses)))
    else:
        given = {t: SnippetPoses.identity() for t in centers}
    rows = ["t,l_t,l_prev,l_next,l_smooth,l_edge,l_final"]
    for t in centers:
        if t not in given:
            raise FormatError(f"no poses for snippet {t}", args.poses)
        P = given[t]
        obj = make_objective(data.snippet(t), data.intrinsics, cfg.optimizer)
        b, _ = obj.evaluate(P.prev_to_mid, P.next_to_mid)
        rows.append(",".join([str(t)] + [_fmt(x) for x in (b.l_t, b.l_prev, b.l_next, b.l_smooth, b.l_edge, b.l_final)]))
    _emit("\n".join(rows) + "\n", args.out)


def _optimize_one(job):
    s, K, cfg, init = job
    _, trace = optimize_snippet(s, K, cfg, init)
    return trace.params, trace.final_loss, trace.reason


def cmd_optimize(args, cfg):
    data = _load(args)
    centers = list(range(1, len(data) - 1))
    K = data.intrinsics
    results = []
    if args.warm_start:
        # sequential by construction: each start comes from the previous result
        init = None
        for t in centers:
            params, loss, reason = _optimize_one((data.snippet(t), K, cfg.optimizer, init))
            init = params
            results.append(params)
            log.info("snippet %d: loss %.3e (%s)", t, loss, reason)
    else:
        jobs = [(data.snippet(t), K, cfg.optimizer, None) for t in centers]
        for t, (params, loss, reason) in zip(centers, _map(_optimize_one, jobs, args.workers)):
            results.append(params)
            log.info("snippet %d: loss %.3e (%s)", t, loss, reason)
    Path(args.out).write_text(write_snippet_poses(list(zip(centers, results))), encoding="utf-8")


def cmd_stitch(args, cfg):
    snippets = read_snippet_poses(_read_text(args.poses))
    pairs = gather_sequence(snippets, average_overlap=args.average_overlap)
    traj = splice(pairs, len(snippets) + 2)
    Path(args.out).write_text(write_kitti_poses(traj.camera_to_origin()), encoding="utf-8")


def cmd_ate(args, cfg):
    report = sequence_ate(_read_poses(args.pred), _read_poses(args.gt), mode=args.mode)
    print(report.format())


def _align(pred, gt):
    if len(pred) != len(gt):
        raise FormatError(f"{len(pred)} estimated poses for {len(gt)} ground-truth poses", "input")
    src = np.array([P.translation for P in pred])
    dst = np.array([P.translation for P in gt])
    return horn_align(src, dst)


def cmd_align(args, cfg):
    pred, gt = _read_poses(args.pred), _read_poses(args.gt)
    al = _align(pred, gt)
    print(f"scale {_fmt(al.scale)}")
    print("rotation " + " ".join(_fmt(x) for x in al.rotation.ravel()))
    print("translation " + " ".join(_fmt(x) for x in al.translation))
    print(f"rmse {_fmt(np.sqrt(al.residual))}")
    if args.out:
        Path(args.out).write_text(write_kitti_poses(_apply_alignment(pred, al)), encoding="utf-8")


def _apply_alignment(poses, al):
    from .geometry import SE3Pose

    return [SE3Pose(al.rotation @ P.rotation, al.apply(P.translation[None])[0]) for P in poses]


def cmd_plot(args, cfg):
    fmt = args.format or Path(args.out).suffix.lstrip(".").lower()
    if fmt not in ("csv", "svg"):
        raise UsageError("plot: cannot infer --format from the output name; pass --format csv|svg")
    traj = _read_poses(args.traj)
    gt = None
    if args.gt:
        gt = _read_poses(args.gt)
        traj = _apply_alignment(traj, _align(traj, gt))
    Path(args.out).write_bytes(export_trajectory(traj, fmt, gt=gt if fmt == "svg" else None))


def cmd_sweep(args, cfg):
    data = _load(args)
    if data.world_poses is None:
        raise FormatError("sweep needs ground-truth poses (poses.txt)", args.seq)
    centers = range(1, len(data) - 1)
    snippets = [data.snippet(t) for t in centers]
    gt = [gt_snippet_poses(data.world_poses, t) for t in centers]
    rows = lambda_sweep(snippets, data.intrinsics, args.lambdas, cfg.optimizer, gt, workers=args.workers)
    lines = ["lambda_e,mean,std"] + [f"{_fmt(r['lambda_e'])},{_fmt(r['mean'])},{_fmt(r['std'])}" for r in rows]
    _emit("\n".join(lines) + "\n", args.out)


COMMANDS = {
    "edges": cmd_edges,
    "loss": cmd_loss,
    "optimize": cmd_optimize,
    "stitch": cmd_stitch,
    "ate": cmd_ate,
    "align": cmd_align,
    "plot": cmd_plot,
    "sweep": cmd_sweep,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not hasattr(args, "lambda_e"):
            args.lambda_e = 20.0
        if hasattr(args, "seq"):
            cfg = RunConfig.from_args(args)
        else:
            cfg = RunConfig(args.command)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SnippetVOError, OSError, ValueError, IndexError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
