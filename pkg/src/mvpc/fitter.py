"""Direct gradient-descent fitting of free MVPC coordinates and visibilities."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit, logit

from .core import MVPC, ViewRig, backproject, check_same_layout, far_plane_grid, pixel_centers
from .exceptions import FitDivergedError, MvpcError
from .geoloss import GeoLoss, LossBreakdown, LossWeights

log = logging.getLogger(__name__)

INIT_MODES = ("noisy-gt", "sphere", "far")
OPTIMIZERS = ("adam", "sgd")
SCHEDULES = ("constant", "cosine")
_VIS_INIT_RANGE = (0.05, 0.95)


@dataclass(frozen=True)
class FitConfig:
    iterations: int = 500
    step_size: float = 1e-2
    warmup_steps: int = 100
    weights: LossWeights = field(default_factory=LossWeights)
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    init_mode: str = "noisy-gt"
    sigma: float = 0.05
    seed: int = 0
    consistency: str = "residual"
    optimize_visibility: bool = True
    schedule: str = "constant"

    def __post_init__(self):
        if int(self.iterations) <= 0:
            raise MvpcError("iterations must be positive")
        if not self.step_size > 0:
            raise MvpcError("step_size must be positive")
        if self.warmup_steps < 0:
            raise MvpcError("warmup_steps must be >= 0")
        if not self.sigma >= 0:
            raise MvpcError("sigma must be >= 0")
        if self.optimizer not in OPTIMIZERS:
            raise MvpcError(f"optimizer must be one of {OPTIMIZERS}")
        if self.init_mode not in INIT_MODES:
            raise MvpcError(f"init_mode must be one of {INIT_MODES}")
        if self.schedule not in SCHEDULES:
            raise MvpcError(f"schedule must be one of {SCHEDULES}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise MvpcError("moment decay rates must lie in (0, 1)")


@dataclass
class FitTrace:
    history: list
    result: MVPC
    final: LossBreakdown
    wall_time: float

    def totals(self) -> np.ndarray:
        return np.array([b.total for b in self.history])


def _sphere_hits(rig: ViewRig) -> np.ndarray:
    out = []
    for cam in rig.cameras:
        u, v = pixel_centers(cam)
        base = backproject(cam, u, v, np.zeros(u.shape))
        # |base + t d|^2 = 1 with |d| = 1
        b = base @ cam.view_dir
        c = (base ** 2).sum(-1) - 1.0
        disc = b * b - c
        hit = disc >= 0
        t = -b - np.sqrt(np.where(hit, disc, 0.0))
        pts = np.where(hit[..., None], base + t[..., None] * cam.view_dir, far_plane_grid(cam))
        out.append(pts)
    return np.stack(out)


def init_mvpc(gt: MVPC, mode: str = "noisy-gt", sigma: float = 0.05, seed: int = 0) -> MVPC:
    """Starting point for :func:`fit`.

    ``noisy-gt`` perturbs the ground-truth points with i.i.d. Gaussian noise and
    clamps visibilities into [0.05, 0.95]; ``sphere`` stores the front hit on the
    unit sphere (far point where the ray misses it) with visibility 0.5; ``far``
    stores far-plane points with visibility 0.05.
    """
    n, h, w = gt.shape
    if mode == "noisy-gt":
        rng = np.random.default_rng(seed)
        pts = gt.points + rng.normal(0.0, sigma, size=(n, h, w, 3))
        vis = np.clip(gt.visibility, *_VIS_INIT_RANGE)
    elif mode == "sphere":
        pts = _sphere_hits(gt.rig)
        vis = np.full((n, h, w), 0.5)
    elif mode == "far":
        pts = np.stack([far_plane_grid(c) for c in gt.rig.cameras])
        vis = np.full((n, h, w), _VIS_INIT_RANGE[0])
    else:
        raise MvpcError(f"unknown init mode {mode!r}")
    return MVPC.from_arrays(gt.rig, pts, vis)


def clamp_to_frustum(rig: ViewRig, points: np.ndarray) -> np.ndarray:
    """Clip each view's points into that camera's window and depth range."""
    out = np.empty_like(points)
    for i, cam in enumerate(rig.cameras):
        rel = points[i] - cam.eye
        hw = cam.ortho_half_width
        x0, y0, d0 = rel @ cam.right, rel @ cam.up, rel @ cam.view_dir
        x = np.clip(x0, -hw, hw)
        y = np.clip(y0, -hw, hw)
        d = np.clip(d0, cam.near, cam.far)
        moved = (x != x0) | (y != y0) | (d != d0)
        # untouched points keep their exact bits
        rebuilt = (cam.eye + x[..., None] * cam.right + y[..., None] * cam.up
                   + d[..., None] * cam.view_dir)
        out[i] = np.where(moved[..., None], rebuilt, points[i])
    return out


class _Adam:
    def __init__(self, b1, b2, eps):
        self.b1, self.b2, self.eps = b1, b2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, grads, lr):
        if self.m is None:
            self.m = [np.zeros_like(g) for g in grads]
            self.v = [np.zeros_like(g) for g in grads]
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        out = []
        for k, g in enumerate(grads):
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g * g
            out.append(lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps))
        return out


class _Descent:
    def step(self, grads, lr):
        return [lr * g for g in grads]


def _step_size(config: FitConfig, it: int) -> float:
    if config.schedule == "cosine":
        return 0.5 * config.step_size * (1.0 + np.cos(np.pi * it / config.iterations))
    return config.step_size


def fit(init: MVPC, gt: MVPC, config: FitConfig | None = None, *, masks=None,
        trace_path=None, loss: GeoLoss | None = None) -> FitTrace:
    """Minimize the geometric loss over per-pixel points and visibility logits.

    ``alpha`` and ``beta`` are held at zero for the first ``warmup_steps``
    iterations. ``history[k]`` is the loss at iterate ``k`` (before its update).
    """
    config = config or FitConfig()
    check_same_layout(init, gt)
    ev = loss if loss is not None else GeoLoss(gt, config.weights, masks, config.consistency)
    warm = replace(config.weights, alpha=0.0, beta=0.0)

    pts = clamp_to_frustum(gt.rig, init.points)
    z = logit(np.clip(init.visibility, 1e-6, 1 - 1e-6))
    opt = _Adam(config.beta1, config.beta2, config.epsilon) if config.optimizer == "adam" \
        else _Descent()

    history = []
    sink = open(trace_path, "w") if trace_path is not None else None
    t0 = time.perf_counter()
    try:
        for it in range(int(config.iterations)):
            wts = warm if it < config.warmup_steps else config.weights
            vis = expit(z)
            breakdown, grad = ev.evaluate_arrays(pts, vis, wts)
            if not np.isfinite(breakdown.total) or not grad.is_finite():
                raise FitDivergedError(it)
            history.append(breakdown)
            if sink is not None:
                sink.write(f"{it} {breakdown.ptd:.10g} {breakdown.vol:.10g} {breakdown.mv:.10g} "
                           f"{breakdown.vis_ce:.10g} {breakdown.total:.10g}\n")
            g_z = grad.visibility * vis * (1.0 - vis)
            if not config.optimize_visibility:
                g_z = np.zeros_like(g_z)
            d_pts, d_z = opt.step([grad.points, g_z], _step_size(config, it))
            pts = clamp_to_frustum(gt.rig, pts - d_pts)
            z = z - d_z
    finally:
        if sink is not None:
            sink.close()

    result = MVPC.from_arrays(gt.rig, pts, expit(z))
    final, _ = ev.evaluate_arrays(pts, expit(z), config.weights)
    if not np.isfinite(final.total):
        raise FitDivergedError(int(config.iterations))
    elapsed = time.perf_counter() - t0
    log.info("fit: %d iterations in %.2fs, total %.6g -> %.6g", len(history), elapsed,
             history[0].total, final.total)
    return FitTrace(history, result, final, elapsed)


def read_trace(path) -> np.ndarray:
    """Load a trace file written by :func:`fit` as an (iterations, 6) array."""
    return np.loadtxt(Path(path), ndmin=2)
