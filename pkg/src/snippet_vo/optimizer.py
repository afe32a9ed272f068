"""Direct estimation of the two snippet poses by minimising the final loss.

The twelve unknowns are the six-parameter poses ``prev_to_mid`` and
``next_to_mid``.  Two minimisers are available:

``adam`` (default)
    Adam with step rejection: a step that raises the loss by more than 1% is
    halved (up to five times) and dropped if it still does not fit.
``gauss_newton``
    Levenberg-damped Gauss-Newton on the iteratively reweighted squared
    residuals (weights ``1/|r|`` reproduce the L1 objective locally); a step
    is kept only if it lowers the true final loss.

Either way the best iterate seen is returned, so the final loss never
exceeds the initial one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .camera import Intrinsics
from .errors import DegenerateInputError
from .loss import LossBreakdown, LossWeights, Snippet, SnippetObjective, SnippetPoses
from .geometry import camera_center, euler_to_se3, se3_compose, se3_inverse

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PoseParams12:
    prev: np.ndarray = field(default_factory=lambda: np.zeros(6))
    next: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self):
        object.__setattr__(self, "prev", np.array(self.prev, dtype=float).reshape(6))
        object.__setattr__(self, "next", np.array(self.next, dtype=float).reshape(6))
        if not (np.all(np.isfinite(self.prev)) and np.all(np.isfinite(self.next))):
            raise ValueError("pose parameters must be finite")

    @classmethod
    def from_vector(cls, theta) -> "PoseParams12":
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:6], theta[6:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.prev, self.next])

    def to_poses(self) -> SnippetPoses:
        return SnippetPoses(euler_to_se3(self.prev), euler_to_se3(self.next))


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_iters: int = 200
    rel_tol: float = 1e-6
    patience: int = 5
    lr_decay: float = 1.0
    weights: LossWeights = field(default_factory=LossWeights)
    kernel: str = "four"
    percentile: float = 90.0
    smooth_order: int = 2
    edge_all_targets: bool = False
    method: str = "adam"
    irls_eps: float = 1e-5

    def __post_init__(self):
        if self.method not in ("adam", "gauss_newton"):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("lr_decay must lie in (0, 1]")

    def with_lambda_e(self, lambda_e: float) -> "OptimizerConfig":
        return replace(self, weights=replace(self.weights, lambda_e=lambda_e))


@dataclass
class OptimizationTrace:
    # one entry per iteration; the starting point is kept in initial_loss
    losses: list = field(default_factory=list)
    breakdowns: list = field(default_factory=list)
    grad_norm: float = 0.0
    reason: str = ""
    initial_loss: float = float("nan")
    final_loss: float = float("nan")
    params: PoseParams12 | None = None


def make_objective(s: Snippet, K: Intrinsics, cfg: OptimizerConfig, masks=None) -> SnippetObjective:
    return SnippetObjective(
        s,
        K,
        cfg.weights,
        masks=masks,
        kernel=cfg.kernel,
        percentile=cfg.percentile,
        smooth_order=cfg.smooth_order,
        edge_all_targets=cfg.edge_all_targets,
    )


def loss_gradient(s: Snippet, theta, K: Intrinsics, w: LossWeights = LossWeights(), masks=None, **options) -> np.ndarray:
    """Analytic gradient of the final loss w.r.t. the twelve pose parameters.

    ``theta`` is a :class:`PoseParams12` or a 12-vector.  Pixels are kept or
    dropped as at ``theta``; the L1 subgradient uses ``sign(0) = 0``.
    """
    if isinstance(theta, PoseParams12):
        theta = theta.as_vector()
    theta = np.asarray(theta, dtype=float)
    obj = SnippetObjective(s, K, w, masks=masks, **options)
    return obj.evaluate(theta[:6], theta[6:], need_grad=True)[1]


def optimize_snippet(
    s: Snippet,
    K: Intrinsics,
    cfg: OptimizerConfig = OptimizerConfig(),
    init: PoseParams12 | None = None,
    masks=None,
):
    """Minimise the final loss from ``init`` (identity motion by default).

    Returns ``(SnippetPoses, OptimizationTrace)``; the six-parameter form of
    the result is ``trace.params``.
    """
    if not any(np.any(np.asarray(d) > 0) for d in s.depths):
        raise DegenerateInputError("no valid depth in snippet")
    init = init or PoseParams12()
    obj = make_objective(s, K, cfg, masks)
    if cfg.method == "gauss_newton":
        return _gauss_newton(obj, cfg, init)

    def evaluate(th):
        return obj.evaluate(th[:6], th[6:], need_grad=True)

    theta = init.as_vector()
    b, g = evaluate(theta)
    trace = OptimizationTrace(initial_loss=b.l_final)
    best = (b.l_final, theta.copy(), b)
    m = np.zeros(12)
    v = np.zeros(12)
    lr = cfg.learning_rate
    quiet = 0
    reason = "max_iters"

    for it in range(1, cfg.max_iters + 1):
        if not np.any(g):
            reason = "stalled"
            break
        m = cfg.beta1 * m + (1 - cfg.beta1) * g
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
        m_hat = m / (1 - cfg.beta1**it)
        v_hat = v / (1 - cfg.beta2**it)
        step = lr * m_hat / (np.sqrt(v_hat) + cfg.eps)

        current = b.l_final
        accepted = False
        for _ in range(6):
            trial = theta - step
            b_new, g_new = evaluate(trial)
            if b_new.l_final <= current * 1.01:
                accepted = True
                break
            step = step / 2
        if accepted:
            theta, b, g = trial, b_new, g_new
        lr *= cfg.lr_decay

        trace.losses.append(b.l_final)
        trace.breakdowns.append(b)
        if b.l_final < best[0]:
            best = (b.l_final, theta.copy(), b)

        change = abs(current - b.l_final) / max(abs(current), np.finfo(float).tiny)
        quiet = quiet + 1 if change < cfg.rel_tol else 0
        if quiet >= cfg.patience:
            reason = "converged"
            break

    return _finish(trace, best, g, reason)


def _finish(trace, best, g, reason):
    trace.reason = reason
    trace.grad_norm = float(np.linalg.norm(g))
    trace.final_loss = best[0]
    trace.params = PoseParams12.from_vector(best[1])
    log.debug("snippet optimisation stopped after %d losses: %s", len(trace.losses), reason)
    return trace.params.to_poses(), trace


def _gauss_newton(obj: SnippetObjective, cfg: OptimizerConfig, init: PoseParams12):
    theta = init.as_vector()
    b, g = obj.evaluate(theta[:6], theta[6:], need_grad=True)
    trace = OptimizationTrace(initial_loss=b.l_final)
    mu = 1e-3
    quiet = 0
    reason = "max_iters"
    for _ in range(cfg.max_iters):
        r, J, c = obj.linearize(theta[:6], theta[6:])
        if not np.any(g) or len(r) == 0:
            reason = "stalled"
            break
        w = c / np.maximum(np.abs(r), cfg.irls_eps)
        H = J.T @ (w[:, None] * J)
        rhs = J.T @ (w * r)
        damp = np.diag(np.diag(H)) + 1e-12 * np.eye(12)
        current = b.l_final
        accepted = False
        for _ in range(8):
            try:
                delta = -np.linalg.solve(H + mu * damp, rhs)
            except np.linalg.LinAlgError:
                mu *= 10
                continue
            trial = theta + delta
            b_new, g_new = obj.evaluate(trial[:6], trial[6:], need_grad=True)
            if b_new.l_final < current:
                accepted = True
                mu = max(mu / 3, 1e-9)
                break
            mu *= 4
        if accepted:
            theta, b, g = trial, b_new, g_new
        trace.losses.append(b.l_final)
        trace.breakdowns.append(b)
        change = abs(current - b.l_final) / max(abs(current), np.finfo(float).tiny)
        quiet = quiet + 1 if change < cfg.rel_tol else 0
        if quiet >= cfg.patience:
            reason = "converged"
            break
    return _finish(trace, (b.l_final, theta.copy(), b), g, reason)


def snippet_positions(P: SnippetPoses) -> np.ndarray:
    """Camera centres of (prev, mid, next) expressed in the prev camera frame."""
    prev_to_next = se3_compose(se3_inverse(P.next_to_mid), P.prev_to_mid)
    return np.stack([np.zeros(3), camera_center(P.prev_to_mid), camera_center(prev_to_next)])


def lambda_sweep(snippets, K: Intrinsics, lambda_values, cfg: OptimizerConfig, gt_poses, init=None, workers: int = 1):
    """ATE of the optimised snippets for each edge weight.

    ``gt_poses`` holds the ground-truth :class:`SnippetPoses` per snippet.
    Returns a list of dicts with keys ``lambda_e``, ``ates``, ``mean``,
    ``std`` (population), one per value in ``lambda_values`` in order.
    """
    from .evaluation import snippet_ate

    jobs = [(s, K, cfg.with_lambda_e(lam), init) for lam in lambda_values for s in snippets]
    results = _map(_optimize_job, jobs, workers)
    rows = []
    n = len(snippets)
    for i, lam in enumerate(lambda_values):
        ates = [
            snippet_ate(snippet_positions(results[i * n + j]), snippet_positions(gt_poses[j]))
            for j in range(n)
        ]
        rows.append(
            {
                "lambda_e": float(lam),
                "ates": ates,
                "mean": float(np.mean(ates)) if ates else float("nan"),
                "std": float(np.std(ates)) if ates else float("nan"),
            }
        )
    return rows


def _optimize_job(args):
    s, K, cfg, init = args
    return optimize_snippet(s, K, cfg, init)[0]


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
