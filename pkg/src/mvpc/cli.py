"""Command-line entry point: ``mvpc {sample,fit,loss,mesh,eval,gradcheck}``.

Every command prints ``key=value`` lines on stdout. Exit status is 0 on
success, 1 on a domain or I/O error and 2 on a usage error.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from .core import make_rig, merge_mvpc_to_mesh
from .exceptions import FitDivergedError, MvpcError
from .fitter import INIT_MODES, OPTIMIZERS, SCHEDULES, FitConfig, fit, init_mvpc
from .geoloss import GeoLoss, LossWeights
from .gradcheck import TERMS, run_suite
from .io_formats import (mvpc_file_size, read_mvpc, read_obj, write_mvpc, write_obj_mesh,
                         write_ply_points)
from .metrics import chamfer, coverage, mvpc_to_points, voxel_iou, voxelize
from .sampler import normalize_mesh, sample_mvpc
from .shapes import icosphere, stacked_quads, tilted_cup

log = logging.getLogger("mvpc")

BUILTIN_SHAPES = {
    "icosphere": lambda: icosphere(4),
    "stacked-quads": stacked_quads,
    "cup": tilted_cup,
}


def _positive_int(text):
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if k <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {k}")
    return k


def _nonneg_float(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (x >= 0 and math.isfinite(x)):
        raise argparse.ArgumentTypeError(f"must be finite and >= 0, got {text}")
    return x


def _emit(key, value):
    if isinstance(value, float):
        value = f"{value:.10g}"
    print(f"{key}={value}")


def _load_mesh(path):
    try:
        return read_obj(path)
    except OSError as exc:
        raise MvpcError(f"cannot read mesh {path}: {exc.strerror or exc}") from exc


def _load_mvpc(path, role):
    try:
        return read_mvpc(path)
    except OSError as exc:
        raise MvpcError(f"cannot read {role} MVPC {path}: {exc.strerror or exc}") from exc
    except MvpcError as exc:
        raise MvpcError(f"{path}: {exc}") from exc


def _safe_chamfer(a, b):
    pa, pb = mvpc_to_points(a), mvpc_to_points(b)
    if len(pa) == 0 or len(pb) == 0:
        return float("nan")
    return chamfer(pa, pb)


def cmd_sample(args):
    mesh = BUILTIN_SHAPES[args.shape]() if args.shape else _load_mesh(args.mesh)
    if not args.no_normalize:
        mesh = normalize_mesh(mesh)
    rig = make_rig(args.views, args.res)
    gt = sample_mvpc(mesh, rig)
    write_mvpc(gt, args.out)
    for i, view in enumerate(gt.views):
        _emit(f"view{i}_visible", int(view.visible.sum()))
    _emit("coverage", coverage(mesh, rig, args.coverage_samples, args.seed))
    _emit("bytes", mvpc_file_size(*gt.shape))
    _emit("out", args.out)
    return 0


def cmd_fit(args):
    gt = _load_mvpc(args.gt, "ground-truth")
    config = FitConfig(iterations=args.iters, step_size=args.step, warmup_steps=args.warmup,
                       weights=LossWeights(args.alpha, args.beta, args.vis_weight),
                       optimizer=args.optimizer, schedule=args.schedule, init_mode=args.init,
                       sigma=args.sigma, seed=args.seed)
    init = init_mvpc(gt, config.init_mode, config.sigma, config.seed)
    try:
        trace = fit(init, gt, config, trace_path=args.trace)
    except FitDivergedError as exc:
        _emit("diverged_at", exc.iteration)
        raise
    write_mvpc(trace.result, args.out)
    for key, value in trace.final.as_dict().items():
        _emit(key, value)
    _emit("chamfer_init", _safe_chamfer(init, gt))
    _emit("chamfer_final", _safe_chamfer(trace.result, gt))
    _emit("iterations", len(trace.history))
    _emit("wall_time", trace.wall_time)
    _emit("out", args.out)
    return 0


def cmd_loss(args):
    pred = _load_mvpc(args.pred, "predicted")
    gt = _load_mvpc(args.gt, "ground-truth")
    weights = LossWeights(args.alpha, args.beta, args.vis_weight)
    breakdown, _ = GeoLoss(gt, weights)(pred)
    scale = 1.0 / np.prod(gt.shape) if args.per_pixel else 1.0
    for key, value in breakdown.as_dict().items():
        _emit(key, value * scale)
    _emit("normalization", "per-pixel" if args.per_pixel else "sum")
    return 0


def cmd_mesh(args):
    m = _load_mvpc(args.mvpc, "input")
    mesh = merge_mvpc_to_mesh(m)
    write_obj_mesh(mesh, args.out)
    _emit("vertices", len(mesh.vertices))
    _emit("triangles", len(mesh.triangles))
    _emit("out", args.out)
    if args.ply:
        pts = mvpc_to_points(m)
        write_ply_points(pts, args.ply)
        _emit("points", len(pts))
        _emit("ply", args.ply)
    return 0


def cmd_eval(args):
    pred = _load_mvpc(args.pred, "predicted")
    gt = _load_mvpc(args.gt, "ground-truth")
    pp, pg = mvpc_to_points(pred), mvpc_to_points(gt)
    _emit("iou", voxel_iou(voxelize(pp, args.voxel_res), voxelize(pg, args.voxel_res)))
    _emit("chamfer", _safe_chamfer(pred, gt))
    if args.mesh:
        mesh = normalize_mesh(_load_mesh(args.mesh))
        cov = coverage(mesh, gt.rig, args.coverage_samples, args.seed)
    else:
        cov = float("nan")
    _emit("coverage", cov)
    return 0


def cmd_gradcheck(args):
    worst = run_suite(args.seed, args.instances)
    for term in TERMS:
        _emit(f"max_rel_{term}", worst[term])
    ok = all(worst[t] < args.tol for t in TERMS)
    _emit("status", "ok" if ok else "fail")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvpc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="ray-cast a mesh into a ground-truth MVPC file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--mesh", help="OBJ file")
    src.add_argument("--shape", choices=sorted(BUILTIN_SHAPES), help="built-in test shape")
    p.add_argument("--views", type=int, choices=(4, 6, 8), default=6)
    p.add_argument("--res", type=_positive_int, default=128)
    p.add_argument("--out", required=True)
    p.add_argument("--coverage-samples", type=_positive_int, default=20_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-normalize", action="store_true",
                   help="skip bounding-sphere normalization")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("fit", help="fit an MVPC to a ground truth by gradient descent")
    p.add_argument("--gt", required=True)
    p.add_argument("--init", choices=INIT_MODES, default="noisy-gt")
    p.add_argument("--sigma", type=_nonneg_float, default=0.05)
    p.add_argument("--alpha", type=_nonneg_float, default=100.0)
    p.add_argument("--beta", type=_nonneg_float, default=1.0)
    p.add_argument("--vis-weight", type=_nonneg_float, default=1.0)
    p.add_argument("--warmup", type=int, default=100)
    p.add_argument("--iters", type=_positive_int, default=500)
    p.add_argument("--step", type=float, default=1e-2)
    p.add_argument("--optimizer", choices=OPTIMIZERS, default="adam")
    p.add_argument("--schedule", choices=SCHEDULES, default="constant")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="write 'iter ptd vol mv vis total' lines here")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("loss", help="report the loss terms between two MVPC files")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--alpha", type=_nonneg_float, default=100.0)
    p.add_argument("--beta", type=_nonneg_float, default=1.0)
    p.add_argument("--vis-weight", type=_nonneg_float, default=1.0)
    p.add_argument("--per-pixel", action="store_true",
                   help="divide every term by the pixel count (reporting only)")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("mesh", help="export the visible triangulated grids as one OBJ")
    p.add_argument("--mvpc", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ply", help="also write the visible points as ASCII PLY")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("eval", help="voxel IoU, Chamfer distance and optional coverage")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mesh", help="ground-truth OBJ; enables the coverage figure")
    p.add_argument("--voxel-res", type=_positive_int, default=32)
    p.add_argument("--coverage-samples", type=_positive_int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of every loss gradient")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=_positive_int, default=20)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (MvpcError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
