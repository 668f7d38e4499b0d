"""Central finite-difference check of the analytic loss gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MVPC, make_rig
from .geoloss import GeoLoss, LossWeights, VIS_EPS, _round_pixel
from .sampler import sample_mvpc
from .shapes import ellipsoid, rotate

TERMS = ("ptd", "vol", "mv", "vis_ce")
DEFAULT_H = 1e-5
# gradient entries smaller than this are compared absolutely
REL_FLOOR = 1e-3


@dataclass(frozen=True)
class TermCheck:
    term: str
    max_rel_error: float
    checked: int
    excluded: int


def random_instance(seed: int, n_views: int = 4, resolution: int = 8, noise: float = 0.02):
    """A random ellipsoid ground truth and a jittered prediction with soft visibilities."""
    rng = np.random.default_rng(seed)
    mesh = rotate(ellipsoid(rng.uniform(0.5, 0.95, 3), 2), rng.normal(size=3),
                  rng.uniform(0.0, np.pi))
    gt = sample_mvpc(mesh, make_rig(n_views, resolution))
    pts = gt.points + rng.normal(0.0, noise, gt.shape + (3,))
    vis = rng.uniform(0.05, 0.95, gt.shape)
    return MVPC.from_arrays(gt.rig, pts, vis), gt


def nonsmooth_pixels(loss: GeoLoss, points: np.ndarray, h: float = DEFAULT_H) -> dict:
    """Per-term (N, H, W) masks of pixels within ``10 h`` of a kink.

    Kinks are zero distances (ptd, mv), zero signed volume terms (vol) and
    nearest-pixel rounding boundaries of the consistency lookup (mv).
    """
    margin = 10.0 * h
    shape = loss.shape
    diff = points - loss.target
    ptd = np.linalg.norm(diff, axis=-1) < margin
    term = loss.gt_vis * np.einsum("nhwk,nhwk->nhw", diff, loss.normals)
    vol = np.abs(term) < margin * np.linalg.norm(loss.normals, axis=-1)
    vol &= loss.gt_vis > 0
    mv = np.zeros(shape, dtype=bool)
    hh, ww = shape[1:]
    residual = loss.consistency == "residual"
    ai, aj, ar, ac = loss._a.T
    p = points[ai, ar, ac]
    u, v = loss._project_into(aj, p)
    slack = margin * ww / (2.0 * loss._hw[aj])
    bad = (_dist_to_half(u) < slack) | (_dist_to_half(v) < slack)
    r, c = _round_pixel(u, v)
    look = loss.gt_points[aj, np.clip(r, 0, hh - 1), np.clip(c, 0, ww - 1)]
    dist = np.linalg.norm(p - look, axis=-1)
    if residual:
        dist = np.abs(dist - np.linalg.norm(loss.gt_points[ai, ar, ac] - look, axis=-1))
    bad |= dist < margin
    mv[ai[bad], ar[bad], ac[bad]] = True
    bi, br, bc, bsrc = loss._b
    dist = np.linalg.norm(points[bi, br, bc] - bsrc, axis=-1)
    if residual:
        dist = np.abs(dist - loss._b_base)
    bad = dist < margin
    mv[bi[bad], br[bad], bc[bad]] = True
    return {"ptd": ptd, "vol": vol, "mv": mv}


def _dist_to_half(x):
    """Distance from ``x`` to the nearest rounding boundary ``k + 0.5``."""
    return np.abs(x - (np.floor(x) + 0.5))


def _rel_error(a, f):
    return float(np.max(np.abs(a - f) / np.maximum(np.maximum(np.abs(a), np.abs(f)), REL_FLOOR)))


def check_instance(pred: MVPC, gt: MVPC, h: float = DEFAULT_H, mv_coords: int | None = None,
                   seed: int = 0) -> dict:
    """Compare analytic and central-difference gradients term by term.

    ``mv_coords`` caps how many coordinates of the (comparatively expensive)
    consistency term are probed; a random subset is drawn with ``seed``.
    """
    loss = GeoLoss(gt, LossWeights(1.0, 1.0, 1.0))
    pts = pred.points
    vis = np.clip(pred.visibility, 2 * VIS_EPS, 1.0 - 2 * VIS_EPS)
    skip = nonsmooth_pixels(loss, pts, h)
    rng = np.random.default_rng(seed)
    out = {}
    for name in TERMS:
        if name == "vis_ce":
            x0, fn, excl = vis, loss.vis_ce, np.zeros(vis.shape, dtype=bool)
        else:
            x0, fn = pts, getattr(loss, name)
            excl = np.repeat(skip[name][..., None], 3, axis=-1)
        _, analytic = fn(x0)
        idx = np.flatnonzero(~excl.ravel())
        if name == "mv" and mv_coords is not None and len(idx) > mv_coords:
            idx = np.sort(rng.choice(idx, mv_coords, replace=False))
        flat = x0.ravel().copy()
        fd = np.empty(len(idx))
        for k, q in enumerate(idx):
            keep = flat[q]
            flat[q] = keep + h
            hi = fn(flat.reshape(x0.shape))[0]
            flat[q] = keep - h
            lo = fn(flat.reshape(x0.shape))[0]
            flat[q] = keep
            fd[k] = (hi - lo) / (2 * h)
        err = _rel_error(analytic.ravel()[idx], fd) if len(idx) else 0.0
        out[name] = TermCheck(name, err, len(idx), int(excl.sum()))
    return out


def run_suite(seed: int = 0, instances: int = 20, h: float = DEFAULT_H,
              mv_coords: int | None = None) -> dict:
    """Worst relative error per term over ``instances`` random 8x8, 4-view problems."""
    worst = {t: 0.0 for t in TERMS}
    for k in range(instances):
        pred, gt = random_instance(seed * 100_003 + k)
        for name, res in check_instance(pred, gt, h, mv_coords, seed + k).items():
            worst[name] = max(worst[name], res.max_rel_error)
    return worst
