"""Ground-truth MVPC generation by orthographic ray casting, plus overlap masks."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import (MVPC, PointGridMap, TriangleMesh, ViewRig, backproject, far_plane_grid,
                   pixel_centers, project, triangulate)
from .exceptions import EmptyInputError, MvpcError
from .raster import nearest_hits

log = logging.getLogger(__name__)


def bounding_sphere(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Ritter's bounding sphere followed by exact containment growth.

    Not minimal in general, but exact for symmetric inputs such as meshes
    already centered with their extreme vertices antipodal.
    """
    pts = np.asarray(points, dtype=np.float64)
    # start from the center of the axis-aligned box; tight for symmetric shapes
    center = 0.5 * (pts.min(axis=0) + pts.max(axis=0))
    radius = float(np.sqrt(((pts - center) ** 2).sum(axis=1).max()))
    # Ritter-style refinement from the farthest pair, keep whichever is tighter
    p0 = pts[0]
    p1 = pts[np.argmax(((pts - p0) ** 2).sum(axis=1))]
    p2 = pts[np.argmax(((pts - p1) ** 2).sum(axis=1))]
    c = 0.5 * (p1 + p2)
    r = 0.5 * float(np.linalg.norm(p2 - p1))
    for p in pts:
        dist = float(np.linalg.norm(p - c))
        if dist > r:
            r_new = 0.5 * (r + dist)
            c = c + (dist - r_new) / dist * (p - c)
            r = r_new
    r = float(np.sqrt(((pts - c) ** 2).sum(axis=1).max()))
    if r < radius:
        return c, r
    return center, radius


def normalize_mesh(mesh: TriangleMesh) -> TriangleMesh:
    """Translate the bounding-sphere center to the origin and scale its radius to 1."""
    if len(mesh.triangles) == 0:
        raise EmptyInputError("cannot normalize a mesh without triangles")
    center, radius = bounding_sphere(mesh.vertices)
    if not radius > 1e-12:
        raise MvpcError("mesh has zero extent; cannot normalize")
    return TriangleMesh((mesh.vertices - center) / radius, mesh.triangles, mesh.source)


def _cast_view(corners: np.ndarray, camera):
    u, v = pixel_centers(camera)
    query = np.stack([u.ravel(), v.ravel()], axis=1)
    depth, tri = nearest_hits(camera, corners, query, depth_range=(camera.near, camera.far))
    hit = np.isfinite(depth).reshape(camera.shape)
    pts = far_plane_grid(camera)
    if hit.any():
        d = depth.reshape(camera.shape)
        pts[hit] = backproject(camera, u[hit], v[hit], d[hit])
    return pts, hit.astype(np.float64)


def sample_mvpc(mesh: TriangleMesh, rig: ViewRig, resolution=None) -> MVPC:
    """Ray-cast ``mesh`` from every camera of ``rig``.

    Each pixel stores the nearest hit of the ray through its center (visibility
    1) or its far-plane point (visibility 0). Edge-on triangles never register a
    hit. ``resolution`` (H, W) overrides the rig's own.
    """
    if len(mesh.triangles) == 0:
        raise EmptyInputError("cannot sample an empty mesh")
    if resolution is not None:
        if isinstance(resolution, (int, np.integer)):
            resolution = (int(resolution), int(resolution))
        rig = rig.with_resolution(*resolution)
    corners = mesh.corners
    views = []
    for cam in rig.cameras:
        u, v, d = project(cam, mesh.vertices)
        outside = ((u < -0.5 - 1e-9) | (u > cam.width - 0.5 + 1e-9) | (v < -0.5 - 1e-9)
                   | (v > cam.height - 0.5 + 1e-9) | (d < cam.near) | (d > cam.far))
        if outside.any():
            log.warning("mesh extends beyond the view frustum of %r; clipping", cam)
        pts, vis = _cast_view(corners, cam)
        views.append(PointGridMap(cam, pts, vis))
    return MVPC(rig, tuple(views))


@dataclass(frozen=True, eq=False)
class OverlapMask:
    """Pixels of views ``i`` and ``j`` whose ground-truth surface both views see."""

    view_i: int
    view_j: int
    mask_i_on_i: np.ndarray
    mask_j_on_j: np.ndarray


def render_depth(mesh: TriangleMesh, camera) -> np.ndarray:
    """Z-buffer depth of ``mesh`` at every pixel center of ``camera``; inf where empty."""
    u, v = pixel_centers(camera)
    if len(mesh.triangles) == 0:
        return np.full(camera.shape, np.inf)
    query = np.stack([u.ravel(), v.ravel()], axis=1)
    depth, _ = nearest_hits(camera, mesh.corners, query)
    return depth.reshape(camera.shape)


def _overlap_on(target, source, depth_tol):
    cam = target.camera
    rendered = render_depth(triangulate(source, respect_visibility=True), cam)
    own = project(cam, target.points)[2]
    return target.visible & np.isfinite(rendered) & (np.abs(rendered - own) <= depth_tol)


def overlap_masks(gt: MVPC, i: int, j: int, depth_tol: float | None = None) -> OverlapMask:
    """Render ground-truth view ``j`` into view ``i`` (and vice versa) and keep
    pixels where the rendered depth agrees with the view's own stored depth.

    ``depth_tol`` defaults to four pixel pitches.
    """
    if i == j:
        raise MvpcError("overlap masks need two distinct views")
    n = len(gt)
    if not (0 <= i < n and 0 <= j < n):
        raise MvpcError(f"view index out of range for a {n}-view MVPC")
    if depth_tol is None:
        depth_tol = 4.0 * gt.rig[i].pixel_pitch
    vi, vj = gt.views[i], gt.views[j]
    return OverlapMask(i, j, _overlap_on(vi, vj, depth_tol), _overlap_on(vj, vi, depth_tol))


def all_overlap_masks(gt: MVPC, depth_tol: float | None = None) -> list[OverlapMask]:
    """Masks for every ordered pair (i, j), i != j."""
    n = len(gt)
    # the (j, i) mask is the (i, j) mask with its two halves swapped
    out = {}
    for i in range(n):
        for j in range(i + 1, n):
            m = overlap_masks(gt, i, j, depth_tol)
            out[(i, j)] = m
            out[(j, i)] = OverlapMask(j, i, m.mask_j_on_j, m.mask_i_on_i)
    return [out[(i, j)] for i in range(n) for j in range(n) if i != j]
