"""Orthographic ray casting by 2D point-in-triangle tests.

For parallel rays along ``view_dir`` a ray through image point ``q`` hits a
triangle iff ``q`` lies inside the triangle's projection; the hit depth is the
barycentric interpolation of the corner depths. Candidate (query, triangle)
pairs come from a uniform 2D bin grid over the queries.
"""
from __future__ import annotations

import numpy as np

from .core import ViewCamera, project

GRAZING_EPS = 1e-9
EDGE_TOL = 1e-9
_MAX_PAIRS = 4_000_000


def project_triangles(camera: ViewCamera, corners: np.ndarray):
    """Project (T, 3, 3) corners; returns uv (T, 3, 2), depth (T, 3) and a usable mask.

    Triangles seen edge-on (|unit normal . view_dir| < GRAZING_EPS) or with zero
    area are flagged unusable.
    """
    u, v, d = project(camera, corners)
    uv = np.stack([u, v], axis=-1)
    n = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    norm = np.linalg.norm(n, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.abs(n @ camera.view_dir) / norm
    usable = (norm > 0) & (cos >= GRAZING_EPS)
    return uv, d, usable


def _expand(counts: np.ndarray):
    """For groups of sizes ``counts``: (group id, offset within group) per element."""
    total = int(counts.sum())
    group = np.repeat(np.arange(counts.size), counts)
    starts = np.cumsum(counts) - counts
    offset = np.arange(total) - np.repeat(starts, counts)
    return group, offset


def candidate_hits(tri_uv: np.ndarray, tri_depth: np.ndarray, usable: np.ndarray,
                   query_uv: np.ndarray):
    """All (query, triangle, depth) incidences of query points inside projected triangles."""
    empty = (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))
    tri_ids = np.flatnonzero(usable)
    nq = len(query_uv)
    if nq == 0 or tri_ids.size == 0:
        return empty

    lo = query_uv.min(axis=0)
    hi = query_uv.max(axis=0)
    g = int(np.clip(np.sqrt(nq), 1, 1024))
    cell = np.maximum((hi - lo) / g, 1e-12) * (1 + 1e-9)
    qc = np.minimum(((query_uv - lo) / cell).astype(np.int64), g - 1)
    qcell = qc[:, 1] * g + qc[:, 0]
    order = np.argsort(qcell, kind="stable")
    cell_count = np.bincount(qcell, minlength=g * g)
    cell_start = np.cumsum(cell_count) - cell_count

    tuv = tri_uv[tri_ids]
    tmin = np.floor((tuv.min(axis=1) - EDGE_TOL - lo) / cell).astype(np.int64)
    tmax = np.floor((tuv.max(axis=1) + EDGE_TOL - lo) / cell).astype(np.int64)
    tmin = np.clip(tmin, 0, g - 1)
    tmax = np.clip(tmax, -1, g - 1)
    inside = (tuv.max(axis=1) >= lo - EDGE_TOL).all(axis=1) & \
             (tuv.min(axis=1) <= hi + EDGE_TOL).all(axis=1)
    span = np.where(inside[:, None], tmax - tmin + 1, 0).clip(min=0)
    ncell = span[:, 0] * span[:, 1]

    out_q, out_t, out_d = [], [], []
    # chunk triangles so the expanded pair arrays stay bounded
    tri_cells_t, off = _expand(ncell)
    cx = tmin[tri_cells_t, 0] + off % np.maximum(span[tri_cells_t, 0], 1)
    cy = tmin[tri_cells_t, 1] + off // np.maximum(span[tri_cells_t, 0], 1)
    cells = cy * g + cx
    counts = cell_count[cells]
    bounds = np.searchsorted(np.cumsum(counts), np.arange(0, counts.sum() + _MAX_PAIRS, _MAX_PAIRS),
                             side="right")
    bounds = np.unique(np.concatenate([[0], bounds.clip(max=len(cells)), [len(cells)]]))
    for a, b in zip(bounds[:-1], bounds[1:]):
        if b <= a:
            continue
        c = cells[a:b]
        grp, k = _expand(cell_count[c])
        q = order[cell_start[c][grp] + k]
        t_local = tri_cells_t[a:b][grp]
        d, ok = _barycentric_depth(tuv[t_local], tri_depth[tri_ids[t_local]], query_uv[q])
        out_q.append(q[ok])
        out_t.append(tri_ids[t_local][ok])
        out_d.append(d[ok])
    if not out_q:
        return empty
    return np.concatenate(out_q), np.concatenate(out_t), np.concatenate(out_d)


def _barycentric_depth(tuv, tdepth, q):
    a, b, c = tuv[:, 0], tuv[:, 1], tuv[:, 2]

    def cross(e, f):
        return e[:, 0] * f[:, 1] - e[:, 1] * f[:, 0]

    area = cross(b - a, c - a)
    wa = cross(c - b, q - b) / area
    wb = cross(a - c, q - c) / area
    wc = cross(b - a, q - a) / area
    ok = (wa >= -EDGE_TOL) & (wb >= -EDGE_TOL) & (wc >= -EDGE_TOL)
    depth = wa * tdepth[:, 0] + wb * tdepth[:, 1] + wc * tdepth[:, 2]
    return depth, ok


def nearest_hits(camera: ViewCamera, corners: np.ndarray, query_uv: np.ndarray,
                 depth_range=None):
    """Nearest hit depth and triangle per query (inf / -1 on miss).

    Equal depths resolve toward the smaller triangle index.
    """
    uv, d, usable = project_triangles(camera, corners)
    q, t, depth = candidate_hits(uv, d, usable, query_uv)
    if depth_range is not None:
        keep = (depth >= depth_range[0]) & (depth <= depth_range[1])
        q, t, depth = q[keep], t[keep], depth[keep]
    best_d = np.full(len(query_uv), np.inf)
    best_t = np.full(len(query_uv), -1, dtype=np.int64)
    if q.size:
        order = np.lexsort((t, depth, q))
        q, t, depth = q[order], t[order], depth[order]
        first = np.ones(q.size, dtype=bool)
        first[1:] = q[1:] != q[:-1]
        best_d[q[first]] = depth[first]
        best_t[q[first]] = t[first]
    return best_d, best_t

