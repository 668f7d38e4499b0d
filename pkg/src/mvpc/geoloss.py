"""Geometric loss between a predicted and a ground-truth MVPC, with analytic gradients.

``total = ptd + alpha * vol + beta * mv + vis_weight * vis_ce`` where

* ``ptd``: per-pixel Euclidean distance; ground-truth invisible pixels target
  their far-plane point.
* ``vol``: quasi-volume discrepancy, ``sum |V~ (M - M~) . N~|`` with ``N~`` the
  area-weighted normals of the full ground-truth grid mesh (edges to far-plane
  points kept).
* ``mv``: multi-view consistency over ground-truth overlap regions, using
  nearest-pixel reprojection lookups.
* ``vis_ce``: binary cross-entropy of predicted against ground-truth visibility.

All terms are raw sums over pixels and views.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (MVPC, VIS_THRESHOLD, _area_weighted_normals, check_same_layout,
                   far_plane_grid, project)
from .exceptions import MvpcError, ShapeMismatchError
from .sampler import OverlapMask, all_overlap_masks

VIS_EPS = 1e-6
GRAD_EPS = 1e-12


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 100.0
    beta: float = 1.0
    vis_weight: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "vis_weight"):
            val = float(getattr(self, name))
            if not math.isfinite(val) or val < 0:
                raise MvpcError(f"loss weight {name} must be finite and >= 0, got {val}")
            object.__setattr__(self, name, val)


@dataclass(frozen=True)
class LossBreakdown:
    ptd: float
    vol: float
    mv: float
    vis_ce: float
    total: float

    @classmethod
    def combine(cls, ptd, vol, mv, vis_ce, weights: LossWeights) -> "LossBreakdown":
        total = ptd + weights.alpha * vol + weights.beta * mv + weights.vis_weight * vis_ce
        return cls(float(ptd), float(vol), float(mv), float(vis_ce), float(total))

    def as_dict(self) -> dict:
        return {"ptd": self.ptd, "vol": self.vol, "mv": self.mv,
                "vis_ce": self.vis_ce, "total": self.total}


@dataclass
class GradientField:
    """d(loss)/d(points), (N, H, W, 3), and d(loss)/d(visibility), (N, H, W)."""

    points: np.ndarray
    visibility: np.ndarray

    @classmethod
    def zeros(cls, shape) -> "GradientField":
        n, h, w = shape
        return cls(np.zeros((n, h, w, 3)), np.zeros((n, h, w)))

    def __add__(self, other: "GradientField") -> "GradientField":
        return GradientField(self.points + other.points, self.visibility + other.visibility)

    def __mul__(self, s: float) -> "GradientField":
        return GradientField(self.points * s, self.visibility * s)

    __rmul__ = __mul__

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.points)) and np.all(np.isfinite(self.visibility)))


def _unit_or_zero(diff: np.ndarray, dist: np.ndarray) -> np.ndarray:
    ok = (dist > GRAD_EPS)[..., None]
    return np.divide(diff, dist[..., None], out=np.zeros_like(diff), where=ok)


def _sign(x: np.ndarray) -> np.ndarray:
    """Sign with a dead zone of GRAD_EPS around zero."""
    return np.where(np.abs(x) > GRAD_EPS, np.sign(x), 0.0)


def _round_pixel(u, v):
    # half-up rounding; ties never matter away from pixel boundaries
    return np.floor(v + 0.5).astype(np.int64), np.floor(u + 0.5).astype(np.int64)


class GeoLoss:
    """Loss evaluator bound to one ground truth; caches everything derived from it.

    Parameters
    ----------
    gt : MVPC
        Ground truth. Pixels with visibility below 0.5 are treated as background
        and target their far-plane point.
    weights : LossWeights, optional
    masks : list of OverlapMask, optional
        Overlap regions for the consistency term. Computed from ``gt`` for all
        ordered view pairs when omitted and ``beta > 0``.
    consistency : {"residual", "raw"}
        ``"raw"`` sums the cross-view distances ``d`` as they are. Ground-truth
        views sample different surface points, so ``d`` is not zero at the
        ground truth itself; ``"residual"`` (default) penalizes
        ``|d - d_gt|`` where ``d_gt`` is the same lookup evaluated on the ground
        truth, which vanishes exactly at ``pred == gt``.
    """

    def __init__(self, gt: MVPC, weights: LossWeights | None = None, masks=None,
                 consistency: str = "residual"):
        if consistency not in ("residual", "raw"):
            raise MvpcError(f"unknown consistency mode {consistency!r}")
        self.consistency = consistency
        self.gt = gt
        self.weights = weights or LossWeights()
        self.rig = gt.rig
        n, h, w = gt.shape
        self.shape = (n, h, w)
        gt_pts = gt.points
        self.gt_vis = gt.visibility
        self.gt_visible = self.gt_vis >= VIS_THRESHOLD
        far = np.stack([far_plane_grid(c) for c in self.rig.cameras])
        self.target = np.where(self.gt_visible[..., None], gt_pts, far)
        self.gt_points = gt_pts
        self.normals = np.stack([_area_weighted_normals(g) for g in self.target])
        if masks is None:
            masks = all_overlap_masks(gt) if self.weights.beta > 0 else []
        self.masks = self._check_masks(masks)
        self._prepare_pairs()

    def _check_masks(self, masks):
        n, h, w = self.shape
        for m in masks:
            if not isinstance(m, OverlapMask):
                raise MvpcError("masks must be OverlapMask instances")
            if not (0 <= m.view_i < n and 0 <= m.view_j < n) or m.view_i == m.view_j:
                raise ShapeMismatchError(f"overlap mask ({m.view_i}, {m.view_j}) does not fit "
                                         f"a {n}-view MVPC")
            if m.mask_i_on_i.shape != (h, w) or m.mask_j_on_j.shape != (h, w):
                raise ShapeMismatchError("overlap mask resolution does not match the MVPC")
        return list(masks)

    def _prepare_pairs(self):
        """Flatten every mask into index arrays so the consistency term is one batch."""
        h, w = self.shape[1:]
        a_parts, b_parts = [], []
        for m in self.masks:
            i, j = m.view_i, m.view_j
            a_pix = np.argwhere(m.mask_i_on_i)
            a_parts.append(np.column_stack([np.full(len(a_pix), i), np.full(len(a_pix), j),
                                            a_pix]))
            # term B: looked-up pixels in view i depend only on the ground truth
            b_pix = np.argwhere(m.mask_j_on_j)
            src = self.gt_points[j][b_pix[:, 0], b_pix[:, 1]]
            u, v, _ = project(self.rig[i], src)
            r, c = _round_pixel(u, v)
            ok = (r >= 0) & (r < h) & (c >= 0) & (c < w)
            ok[ok] = self.gt_visible[i][r[ok], c[ok]]
            b_parts.append((np.full(ok.sum(), i), r[ok], c[ok], src[ok]))
        empty = np.zeros((0, 4), dtype=np.int64)
        self._a = np.concatenate(a_parts).astype(np.int64) if a_parts else empty
        if b_parts:
            bi, br, bc, bsrc = (np.concatenate(x) for x in zip(*b_parts))
        else:
            bi = br = bc = np.zeros(0, dtype=np.int64)
            bsrc = np.zeros((0, 3))
        self._b = (bi.astype(np.int64), br.astype(np.int64), bc.astype(np.int64), bsrc)
        self._b_base = np.linalg.norm(self.gt_points[bi, br, bc] - bsrc, axis=-1)
        cams = self.rig.cameras
        self._eye = np.stack([c.eye for c in cams])
        self._right = np.stack([c.right for c in cams])
        self._up = np.stack([c.up for c in cams])
        self._hw = np.array([c.ortho_half_width for c in cams])

    def _project_into(self, j, p):
        """Project points ``p`` (k, 3) into views ``j`` (k,), one view per row."""
        h, w = self.shape[1:]
        rel = p - self._eye[j]
        hw = self._hw[j]
        x = np.einsum("kc,kc->k", rel, self._right[j])
        y = np.einsum("kc,kc->k", rel, self._up[j])
        return (x + hw) * (w / (2.0 * hw)) - 0.5, (hw - y) * (h / (2.0 * hw)) - 0.5

    def _check_pred(self, pred: MVPC) -> None:
        check_same_layout(pred, self.gt)

    # individual terms operate on raw arrays so the fitter can skip MVPC wrapping

    def ptd(self, points):
        diff = points - self.target
        dist = np.linalg.norm(diff, axis=-1)
        return float(dist.sum()), _unit_or_zero(diff, dist)

    def vol(self, points):
        term = self.gt_vis * np.einsum("nhwk,nhwk->nhw", points - self.target, self.normals)
        grad = (_sign(term) * self.gt_vis)[..., None] * self.normals
        return float(np.abs(term).sum()), grad

    def mv(self, points):
        h, w = self.shape[1:]
        residual = self.consistency == "residual"
        grad = np.zeros_like(points)
        ai, aj, ar, ac = self._a.T
        p = points[ai, ar, ac]
        u, v = self._project_into(aj, p)
        r, c = _round_pixel(u, v)
        ok = (r >= 0) & (r < h) & (c >= 0) & (c < w)
        ok[ok] = self.gt_visible[aj[ok], r[ok], c[ok]]
        looked_up = self.gt_points[aj[ok], r[ok], c[ok]]
        diff = p[ok] - looked_up
        dist = np.linalg.norm(diff, axis=-1)
        unit = _unit_or_zero(diff, dist)
        if residual:
            own = self.gt_points[ai[ok], ar[ok], ac[ok]]
            dist = dist - np.linalg.norm(own - looked_up, axis=-1)
            unit *= _sign(dist)[:, None]
            dist = np.abs(dist)
        total = dist.sum()
        np.add.at(grad, (ai[ok], ar[ok], ac[ok]), unit)

        bi, br, bc, bsrc = self._b
        diff = points[bi, br, bc] - bsrc
        dist = np.linalg.norm(diff, axis=-1)
        unit = _unit_or_zero(diff, dist)
        if residual:
            dist = dist - self._b_base
            unit *= _sign(dist)[:, None]
            dist = np.abs(dist)
        total += dist.sum()
        np.add.at(grad, (bi, br, bc), unit)
        return float(total), grad

    def vis_ce(self, visibility):
        v = np.clip(visibility, VIS_EPS, 1.0 - VIS_EPS)
        g = self.gt_vis
        loss = -(g * np.log(v) + (1.0 - g) * np.log1p(-v)).sum()
        grad = -g / v + (1.0 - g) / (1.0 - v)
        # zero slope where the clamp is active
        grad = np.where((visibility < VIS_EPS) | (visibility > 1.0 - VIS_EPS), 0.0, grad)
        return float(loss), grad

    def evaluate_arrays(self, points, visibility, weights: LossWeights | None = None):
        """Weighted loss and gradients for raw (N, H, W, 3) / (N, H, W) arrays."""
        wts = weights or self.weights
        ptd, g_ptd = self.ptd(points)
        vol, g_vol = self.vol(points)
        if wts.beta > 0 or len(self._a) or len(self._b[0]):
            mv, g_mv = self.mv(points)
        else:
            mv, g_mv = 0.0, np.zeros_like(points)
        ce, g_ce = self.vis_ce(visibility)
        breakdown = LossBreakdown.combine(ptd, vol, mv, ce, wts)
        g_pts = g_ptd + wts.alpha * g_vol + wts.beta * g_mv
        return breakdown, GradientField(g_pts, wts.vis_weight * g_ce)

    def __call__(self, pred: MVPC, weights: LossWeights | None = None):
        self._check_pred(pred)
        return self.evaluate_arrays(pred.points, pred.visibility, weights)


def _zero_points(gt):
    return np.zeros(gt.shape + (3,))


def point_distance_loss(pred: MVPC, gt: MVPC):
    """Sum over all pixels of ||pred - gt||, far points standing in for gt background."""
    check_same_layout(pred, gt)
    loss, g = GeoLoss(gt, LossWeights(0, 0, 0), masks=[]).ptd(pred.points)
    return loss, GradientField(g, np.zeros(gt.shape))


def quasi_volume_loss(pred: MVPC, gt: MVPC):
    """Sum over gt-visible pixels of |(pred - gt) . N~| with gt area-weighted normals."""
    check_same_layout(pred, gt)
    loss, g = GeoLoss(gt, LossWeights(0, 0, 0), masks=[]).vol(pred.points)
    return loss, GradientField(g, np.zeros(gt.shape))


def multiview_consistency_loss(pred: MVPC, gt: MVPC, masks=None, consistency="residual"):
    """Cross-view reprojection distances over ground-truth overlap masks.

    ``masks`` defaults to every ordered view pair of ``gt``.
    """
    check_same_layout(pred, gt)
    if masks is None:
        masks = all_overlap_masks(gt)
    loss, g = GeoLoss(gt, LossWeights(0, 1, 0), masks, consistency).mv(pred.points)
    return loss, GradientField(g, np.zeros(gt.shape))


def visibility_ce_loss(pred: MVPC, gt: MVPC):
    """Binary cross-entropy summed over all pixels; predictions clamped to [1e-6, 1 - 1e-6]."""
    check_same_layout(pred, gt)
    loss, g = GeoLoss(gt, LossWeights(0, 0, 0), masks=[]).vis_ce(pred.visibility)
    return loss, GradientField(_zero_points(gt), g)


def geo_loss(pred: MVPC, gt: MVPC, weights: LossWeights | None = None, masks=None,
             consistency: str = "residual"):
    """Weighted total loss; returns ``(LossBreakdown, GradientField)``."""
    check_same_layout(pred, gt)
    return GeoLoss(gt, weights, masks, consistency)(pred)
