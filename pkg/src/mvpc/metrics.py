"""Evaluation metrics: voxel IoU, Chamfer distance and rig surface coverage."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import MVPC, TriangleMesh, ViewRig, project
from .exceptions import EmptyInputError, MvpcError, ShapeMismatchError
from .raster import candidate_hits, project_triangles

COVERAGE_EPS = 1e-6


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Occupancy over [-1, 1]^3; cell (i, j, k) spans [-1 + 2i/R, -1 + 2(i+1)/R) per axis."""

    resolution: int
    occupancy: np.ndarray

    def __post_init__(self):
        occ = np.asarray(self.occupancy, dtype=bool)
        r = int(self.resolution)
        if occ.shape != (r, r, r):
            raise ShapeMismatchError(f"occupancy shape {occ.shape} does not match R={r}")
        object.__setattr__(self, "occupancy", occ)
        object.__setattr__(self, "resolution", r)

    @property
    def count(self) -> int:
        return int(self.occupancy.sum())


def _as_points(points) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64)
    if p.size == 0:
        return p.reshape(0, 3)
    if p.ndim != 2 or p.shape[1] != 3:
        raise MvpcError(f"expected an (n, 3) point array, got shape {p.shape}")
    return p


def voxelize(points, resolution: int = 32) -> VoxelGrid:
    """Mark every cell containing at least one point; points outside [-1, 1)^3 are dropped."""
    if resolution < 1:
        raise MvpcError("resolution must be >= 1")
    p = _as_points(points)
    occ = np.zeros((resolution,) * 3, dtype=bool)
    if len(p):
        idx = np.floor((p + 1.0) * (resolution / 2.0))
        ok = np.all((idx >= 0) & (idx < resolution), axis=1) & np.all(np.isfinite(p), axis=1)
        idx = idx[ok].astype(np.int64)
        occ[idx[:, 0], idx[:, 1], idx[:, 2]] = True
    return VoxelGrid(resolution, occ)


def voxel_iou(a: VoxelGrid, b: VoxelGrid) -> float:
    if a.resolution != b.resolution:
        raise ShapeMismatchError(f"voxel resolutions differ: {a.resolution} vs {b.resolution}")
    union = np.logical_or(a.occupancy, b.occupancy).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a.occupancy, b.occupancy).sum() / union)


def nearest_distances(source, target) -> np.ndarray:
    """Exact Euclidean distance from each source point to its nearest target point."""
    d, _ = cKDTree(_as_points(target)).query(_as_points(source), k=1)
    return d


def chamfer(p, q) -> float:
    """Symmetric Chamfer distance with per-point means in both directions."""
    p = _as_points(p)
    q = _as_points(q)
    if len(p) == 0 or len(q) == 0:
        raise EmptyInputError("chamfer distance needs two non-empty point sets")
    return float(nearest_distances(p, q).mean() + nearest_distances(q, p).mean())


def mvpc_to_points(m: MVPC, vis_threshold: float = 0.5) -> np.ndarray:
    """Concatenate every view's points whose visibility is >= ``vis_threshold``."""
    pts = m.points
    return pts[m.visibility >= vis_threshold].reshape(-1, 3)


def sample_surface(mesh: TriangleMesh, n: int, seed: int = 0):
    """Area-weighted uniform surface samples.

    Returns ``(points, triangle_ids, unit_normals)``.
    """
    if len(mesh.triangles) == 0:
        raise EmptyInputError("cannot sample an empty mesh")
    av = mesh.face_area_vectors()
    area = np.linalg.norm(av, axis=1)
    if not area.sum() > 0:
        raise EmptyInputError("mesh has zero surface area")
    rng = np.random.default_rng(seed)
    tri = rng.choice(len(area), size=n, p=area / area.sum())
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    c = mesh.corners[tri]
    pts = ((1 - r1)[:, None] * c[:, 0] + (r1 * (1 - r2))[:, None] * c[:, 1]
           + (r1 * r2)[:, None] * c[:, 2])
    with np.errstate(invalid="ignore", divide="ignore"):
        normals = av[tri] / area[tri][:, None]
    return pts, tri, np.nan_to_num(normals)


def visible_from(mesh: TriangleMesh, camera, points, tri_ids, normals,
                 eps: float = COVERAGE_EPS) -> np.ndarray:
    """Whether each oriented surface sample is seen by ``camera``.

    A sample counts when its normal faces the camera and the ray from
    ``point + eps * normal`` toward the camera meets no other triangle.
    """
    toward = -camera.view_dir
    origin = points + eps * normals
    u, v, d = project(camera, origin)
    uv, tdepth, usable = project_triangles(camera, mesh.corners)
    q, t, depth = candidate_hits(uv, tdepth, usable, np.stack([u, v], axis=1))
    blocked = (t != tri_ids[q]) & (depth < d[q])
    out = (normals @ toward) > 0
    out[q[blocked]] = False
    return out


def coverage(gt_mesh: TriangleMesh, rig: ViewRig, samples: int = 100_000, seed: int = 0) -> float:
    """Fraction of area-uniform surface samples visible from at least one rig camera."""
    if len(gt_mesh.triangles) == 0:
        raise EmptyInputError("cannot compute coverage of an empty mesh")
    if samples < 1:
        raise MvpcError("samples must be positive")
    pts, tri, normals = sample_surface(gt_mesh, samples, seed)
    seen = np.zeros(samples, dtype=bool)
    for cam in rig.cameras:
        todo = ~seen
        if not todo.any():
            break
        seen[todo] = visible_from(gt_mesh, cam, pts[todo], tri[todo], normals[todo])
    return float(seen.mean())


def depth_discontinuity_mask(m: MVPC, jump: float | None = None) -> np.ndarray:
    """Visible pixels whose depth differs from a 4-neighbour by more than ``jump``.

    Invisible neighbours carry far-plane depth, so silhouette pixels count too.
    ``jump`` defaults to four pixel pitches. Returns an (N, H, W) boolean array.
    """
    out = np.zeros(m.shape, dtype=bool)
    for i, view in enumerate(m.views):
        cam = view.camera
        tol = 4.0 * cam.pixel_pitch if jump is None else float(jump)
        d = project(cam, view.points)[2]
        pad = np.pad(d, 1, mode="edge")
        h, w = d.shape
        for dr, dc in ((0, 1), (1, 0), (0, -1), (-1, 0)):
            nb = pad[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]
            out[i] |= np.abs(nb - d) > tol
        out[i] &= view.visible
    return out


def boundary_error(pred: MVPC, gt: MVPC, mask: np.ndarray | None = None) -> float:
    """Mean 3D distance between predicted and ground-truth points over ``mask``
    (default: the ground truth's depth-discontinuity pixels)."""
    if mask is None:
        mask = depth_discontinuity_mask(gt)
    if not mask.any():
        raise EmptyInputError("no depth-discontinuity pixels to evaluate")
    return float(np.linalg.norm(pred.points - gt.points, axis=-1)[mask].mean())
