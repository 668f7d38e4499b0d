"""Procedural meshes used by the CLI demos and the test suite."""
from __future__ import annotations

import numpy as np

from .core import TriangleMesh


def icosphere(subdivisions: int = 4, radius: float = 1.0) -> TriangleMesh:
    """Subdivided icosahedron with vertices on the sphere, outward winding."""
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    v = [np.array(p, dtype=np.float64) / np.linalg.norm(p) for p in verts]
    f = [tuple(x) for x in faces]
    for _ in range(subdivisions):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = v[a] + v[b]
                v.append(m / np.linalg.norm(m))
                cache[key] = len(v) - 1
            return cache[key]

        nf = []
        for a, b, c in f:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        f = nf
    return TriangleMesh(np.array(v) * radius, np.array(f))


def quad(center=(0.0, 0.0, 0.0), half_size=1.0, normal_axis: int = 2) -> TriangleMesh:
    """Axis-aligned square with normal along +``normal_axis``."""
    a1, a2 = [(normal_axis + 1) % 3, (normal_axis + 2) % 3]
    corners = []
    for s1, s2 in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
        p = np.array(center, dtype=np.float64)
        p[a1] += s1 * half_size
        p[a2] += s2 * half_size
        corners.append(p)
    return TriangleMesh(np.array(corners), np.array([[0, 1, 2], [0, 2, 3]]))


def concatenate(*meshes: TriangleMesh) -> TriangleMesh:
    verts, tris, off = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + off)
        off += len(m.vertices)
    return TriangleMesh(np.concatenate(verts), np.concatenate(tris))


def stacked_quads(top_half=0.35, bottom_half=0.7, gap=0.6) -> TriangleMesh:
    """Two parallel z-facing squares; the smaller one floats above the larger."""
    return concatenate(quad((0, 0, gap / 2), top_half), quad((0, 0, -gap / 2), bottom_half))


def _panel(origin, e1, e2, segments=1) -> TriangleMesh:
    """Parallelogram grid; winding gives normal along e1 x e2."""
    n = segments
    s = np.linspace(0.0, 1.0, n + 1)
    g1, g2 = np.meshgrid(s, s, indexing="ij")
    pts = (np.asarray(origin, dtype=np.float64)[None, None] + g1[..., None] * np.asarray(e1)
           + g2[..., None] * np.asarray(e2)).reshape(-1, 3)
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    return TriangleMesh(pts, np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)]))


def open_box(half_width=0.5, height=1.0, thickness=0.05, segments=2) -> TriangleMesh:
    """Closed thick-walled cup open toward +z, all normals pointing out of the solid.

    Outer box ``[-w, w]^2 x [-h/2, h/2]`` minus the cavity
    ``[-w+t, w-t]^2 x [-h/2+t, h/2]``, joined by a rim at ``z = h/2``.
    """
    w, h, t = half_width, height, thickness
    if not 0 < t < min(w, h):
        raise ValueError("thickness must be positive and smaller than the box")
    z0, z1 = -h / 2, h / 2
    iw, zb = w - t, -h / 2 + t
    ih = z1 - zb
    n = segments
    parts = [
        # outside
        _panel((-w, -w, z0), (0, 2 * w, 0), (2 * w, 0, 0), n),
        _panel((w, -w, z0), (0, 2 * w, 0), (0, 0, h), n),
        _panel((-w, -w, z0), (0, 0, h), (0, 2 * w, 0), n),
        _panel((-w, w, z0), (0, 0, h), (2 * w, 0, 0), n),
        _panel((-w, -w, z0), (2 * w, 0, 0), (0, 0, h), n),
        # cavity
        _panel((-iw, -iw, zb), (2 * iw, 0, 0), (0, 2 * iw, 0), n),
        _panel((iw, -iw, zb), (0, 0, ih), (0, 2 * iw, 0), n),
        _panel((-iw, -iw, zb), (0, 2 * iw, 0), (0, 0, ih), n),
        _panel((-iw, iw, zb), (2 * iw, 0, 0), (0, 0, ih), n),
        _panel((-iw, -iw, zb), (0, 0, ih), (2 * iw, 0, 0), n),
        # rim
        _panel((-w, iw, z1), (2 * w, 0, 0), (0, t, 0), 1),
        _panel((-w, -w, z1), (2 * w, 0, 0), (0, t, 0), 1),
        _panel((iw, -iw, z1), (t, 0, 0), (0, 2 * iw, 0), 1),
        _panel((-w, -iw, z1), (t, 0, 0), (0, 2 * iw, 0), 1),
    ]
    return concatenate(*parts)


def rotate(mesh: TriangleMesh, axis, angle: float) -> TriangleMesh:
    """Rodrigues rotation of all vertices about ``axis`` by ``angle`` radians."""
    k = np.asarray(axis, dtype=np.float64)
    k = k / np.linalg.norm(k)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    r = np.eye(3) + np.sin(angle) * kx + (1 - np.cos(angle)) * kx @ kx
    return TriangleMesh(mesh.vertices @ r.T, mesh.triangles)


def ellipsoid(axes=(1.0, 0.8, 0.6), subdivisions: int = 2) -> TriangleMesh:
    s = icosphere(subdivisions)
    return TriangleMesh(s.vertices * np.asarray(axes, dtype=np.float64), s.triangles)


def tilted_cup(height: float = 0.4, tilt: float = 0.5) -> TriangleMesh:
    """Shallow thick-walled cup, tilted off the rig axes and normalized to the unit sphere.

    The tilt keeps the cavity floor from lining up with any octahedron view, so
    coverage grows with the number of views instead of saturating.
    """
    from .sampler import normalize_mesh

    return normalize_mesh(rotate(open_box(0.5, height), (2.0, -1.0, 1.0), tilt))
