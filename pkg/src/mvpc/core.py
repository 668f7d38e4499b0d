"""Core MVPC types: orthographic cameras, viewpoint rigs, point grids and meshes.

Pixel convention (shared by every module):

* ``right = view_dir x up``; column index grows along ``right``, row index
  grows along ``-up``.
* Continuous pixel coordinates ``(u, v)`` put the center of pixel
  ``(row, col)`` at ``u = col``, ``v = row``. The window edge sits at -0.5 and
  ``W - 0.5`` (resp. ``H - 0.5``).
* Depth ``d`` is measured along ``view_dir`` from the eye, which sits at
  ``-view_dir * (near + far) / 2`` so the origin is centered in the depth range.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .exceptions import MvpcError, ShapeMismatchError

VIS_THRESHOLD = 0.5
CAMERA_DISTANCE = 3.0
DEPTH_HALF_RANGE = 2.0
ORTHO_HALF_WIDTH = 1.0


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


def default_up(view_dir) -> np.ndarray:
    """Global +y projected orthogonal to ``view_dir``; +x when they are parallel."""
    d = np.asarray(view_dir, dtype=np.float64)
    d = d / np.linalg.norm(d)
    for ref in (np.array([0.0, 1.0, 0.0]), np.array([1.0, 0.0, 0.0])):
        up = ref - np.dot(ref, d) * d
        n = np.linalg.norm(up)
        if n > 1e-9:
            # second pass: a nearly parallel ref leaves a short, poorly orthogonal residue
            up = up / n
            up = up - np.dot(up, d) * d
            return up / np.linalg.norm(up)
    raise MvpcError("cannot build an up vector")  # pragma: no cover


@dataclass(frozen=True, eq=False)
class ViewCamera:
    """Orthographic camera looking along ``view_dir``."""

    view_dir: np.ndarray
    up: np.ndarray
    ortho_half_width: float
    near: float
    far: float
    height: int
    width: int

    def __post_init__(self):
        d = np.asarray(self.view_dir, dtype=np.float64)
        u = np.asarray(self.up, dtype=np.float64)
        if d.shape != (3,) or u.shape != (3,):
            raise MvpcError("view_dir and up must be 3-vectors")
        if abs(np.linalg.norm(d) - 1.0) > 1e-9 or abs(np.linalg.norm(u) - 1.0) > 1e-9:
            raise MvpcError("view_dir and up must be unit vectors")
        if abs(np.dot(d, u)) > 1e-9:
            raise MvpcError("view_dir and up must be orthogonal")
        if not self.far > self.near:
            raise MvpcError("far must exceed near")
        if self.ortho_half_width <= 0:
            raise MvpcError("ortho_half_width must be positive")
        if int(self.height) < 1 or int(self.width) < 1:
            raise MvpcError("resolution must be positive")
        object.__setattr__(self, "view_dir", _readonly(d))
        object.__setattr__(self, "up", _readonly(u))
        object.__setattr__(self, "ortho_half_width", float(self.ortho_half_width))
        object.__setattr__(self, "near", float(self.near))
        object.__setattr__(self, "far", float(self.far))
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "_right", _readonly(np.cross(d, u)))
        object.__setattr__(self, "_eye", _readonly(-d * (0.5 * (self.near + self.far))))

    @classmethod
    def looking_at_origin(cls, direction, resolution=(128, 128), *,
                          distance=CAMERA_DISTANCE, half_width=ORTHO_HALF_WIDTH,
                          depth_half_range=DEPTH_HALF_RANGE, up=None) -> "ViewCamera":
        """Camera placed along ``direction`` (unit-normalized) looking at the origin."""
        pos = np.asarray(direction, dtype=np.float64)
        pos = pos / np.linalg.norm(pos)
        view_dir = -pos
        if up is None:
            up = default_up(view_dir)
        h, w = resolution
        return cls(view_dir, up, half_width, distance - depth_half_range,
                   distance + depth_half_range, h, w)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def right(self) -> np.ndarray:
        return self._right

    @property
    def eye(self) -> np.ndarray:
        return self._eye

    @property
    def pixel_pitch(self) -> float:
        """World-space width of one pixel (columns)."""
        return 2.0 * self.ortho_half_width / self.width

    def with_resolution(self, height: int, width: int) -> "ViewCamera":
        return ViewCamera(self.view_dir, self.up, self.ortho_half_width,
                          self.near, self.far, height, width)

    def __eq__(self, other):
        if not isinstance(other, ViewCamera):
            return NotImplemented
        return (np.array_equal(self.view_dir, other.view_dir)
                and np.array_equal(self.up, other.up)
                and self.ortho_half_width == other.ortho_half_width
                and self.near == other.near and self.far == other.far
                and self.shape == other.shape)

    def __hash__(self):
        return hash((tuple(self.view_dir), tuple(self.up), self.ortho_half_width,
                     self.near, self.far, self.shape))

    def __repr__(self):
        d = np.round(self.view_dir, 4).tolist()
        return f"ViewCamera(view_dir={d}, res={self.height}x{self.width})"


def project(camera: ViewCamera, p):
    """Orthographic projection of point(s) ``p`` (..., 3) to ``(u, v, d)``."""
    p = np.asarray(p, dtype=np.float64)
    rel = p - camera.eye
    hw = camera.ortho_half_width
    x = rel @ camera.right
    y = rel @ camera.up
    d = rel @ camera.view_dir
    u = (x + hw) * (camera.width / (2.0 * hw)) - 0.5
    v = (hw - y) * (camera.height / (2.0 * hw)) - 0.5
    return u, v, d


def backproject(camera: ViewCamera, u, v, d) -> np.ndarray:
    """Inverse of :func:`project`; broadcasts over array inputs."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    hw = camera.ortho_half_width
    x = (u + 0.5) * (2.0 * hw / camera.width) - hw
    y = hw - (v + 0.5) * (2.0 * hw / camera.height)
    return (camera.eye + x[..., None] * camera.right + y[..., None] * camera.up
            + d[..., None] * camera.view_dir)


def pixel_centers(camera: ViewCamera) -> tuple[np.ndarray, np.ndarray]:
    """Continuous ``(u, v)`` of every pixel center, each shaped (H, W)."""
    rows, cols = np.meshgrid(np.arange(camera.height, dtype=np.float64),
                             np.arange(camera.width, dtype=np.float64), indexing="ij")
    return cols, rows


def far_point(camera: ViewCamera, pixel) -> np.ndarray:
    """Backprojection of the center of ``pixel = (row, col)`` onto the far plane."""
    row, col = pixel
    if not (0 <= row < camera.height and 0 <= col < camera.width):
        raise MvpcError(f"pixel {pixel} outside {camera.height}x{camera.width} grid")
    return backproject(camera, float(col), float(row), camera.far)


def far_plane_grid(camera: ViewCamera) -> np.ndarray:
    """Far points of every pixel, (H, W, 3)."""
    u, v = pixel_centers(camera)
    return backproject(camera, u, v, np.full(u.shape, camera.far))


@dataclass(frozen=True)
class ViewRig:
    cameras: tuple

    def __post_init__(self):
        object.__setattr__(self, "cameras", tuple(self.cameras))
        if not self.cameras:
            raise MvpcError("a rig needs at least one camera")
        shapes = {c.shape for c in self.cameras}
        if len(shapes) != 1:
            raise MvpcError("all rig cameras must share one resolution")

    def __len__(self):
        return len(self.cameras)

    def __iter__(self) -> Iterator[ViewCamera]:
        return iter(self.cameras)

    def __getitem__(self, i) -> ViewCamera:
        return self.cameras[i]

    @property
    def shape(self) -> tuple[int, int]:
        return self.cameras[0].shape

    def with_resolution(self, height: int, width: int) -> "ViewRig":
        return ViewRig(tuple(c.with_resolution(height, width) for c in self.cameras))


_S3 = 1.0 / np.sqrt(3.0)

RIG_DIRECTIONS = {
    # alternating cube vertices (even number of minus signs)
    4: np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64) * _S3,
    6: np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]],
                dtype=np.float64),
    8: np.array([[sx, sy, sz] for sx in (1, -1) for sy in (1, -1) for sz in (1, -1)],
                dtype=np.float64) * _S3,
}


def make_rig(n: int, resolution=(128, 128)) -> ViewRig:
    """Platonic-solid rig: tetrahedron (4), octahedron (6) or cube (8).

    ``RIG_DIRECTIONS[n]`` lists camera positions (unit vectors); each camera looks
    back at the origin, so its ``view_dir`` is the negated position.
    """
    if n not in RIG_DIRECTIONS:
        raise MvpcError(f"unsupported view count {n!r}; expected 4, 6 or 8")
    if isinstance(resolution, (int, np.integer)):
        resolution = (int(resolution), int(resolution))
    return ViewRig(tuple(ViewCamera.looking_at_origin(d, resolution)
                         for d in RIG_DIRECTIONS[n]))


@dataclass(frozen=True, eq=False)
class PointGridMap:
    """One view's point grid (a 1-VPC): per-pixel 3D point and visibility."""

    camera: ViewCamera
    points: np.ndarray
    visibility: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        vis = np.asarray(self.visibility, dtype=np.float64)
        h, w = self.camera.shape
        if pts.shape != (h, w, 3) or vis.shape != (h, w):
            raise ShapeMismatchError(
                f"grid arrays {pts.shape}/{vis.shape} do not match camera {h}x{w}")
        if not np.all(np.isfinite(pts)):
            raise MvpcError("grid points must be finite")
        object.__setattr__(self, "points", _readonly(pts))
        object.__setattr__(self, "visibility", _readonly(vis))

    @property
    def shape(self) -> tuple[int, int]:
        return self.camera.shape

    @property
    def visible(self) -> np.ndarray:
        return self.visibility >= VIS_THRESHOLD


@dataclass(frozen=True, eq=False)
class MVPC:
    """Multi-view point cloud: N grids sharing one rig and resolution."""

    rig: ViewRig
    views: tuple

    def __post_init__(self):
        views = tuple(self.views)
        object.__setattr__(self, "views", views)
        if len(views) != len(self.rig):
            raise ShapeMismatchError(f"{len(views)} views for a {len(self.rig)}-camera rig")
        for cam, view in zip(self.rig.cameras, views):
            if view.camera != cam:
                raise ShapeMismatchError("view camera does not match rig camera")

    @classmethod
    def from_arrays(cls, rig: ViewRig, points, visibility) -> "MVPC":
        points = np.asarray(points, dtype=np.float64)
        visibility = np.asarray(visibility, dtype=np.float64)
        n = len(rig)
        h, w = rig.shape
        if points.shape != (n, h, w, 3) or visibility.shape != (n, h, w):
            raise ShapeMismatchError(
                f"expected ({n},{h},{w},3)/({n},{h},{w}); got {points.shape}/{visibility.shape}")
        return cls(rig, tuple(PointGridMap(c, points[i], visibility[i])
                              for i, c in enumerate(rig.cameras)))

    def __len__(self):
        return len(self.views)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (len(self.views),) + self.rig.shape

    @property
    def points(self) -> np.ndarray:
        """Stacked (N, H, W, 3) copy of all view points."""
        return np.stack([v.points for v in self.views])

    @property
    def visibility(self) -> np.ndarray:
        return np.stack([v.visibility for v in self.views])


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Indexed triangle mesh; ``source`` optionally tags vertices with (view, row, col)."""

    vertices: np.ndarray
    triangles: np.ndarray
    source: np.ndarray | None = field(default=None)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MvpcError("triangle index out of range")
        if t.size and np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
            raise MvpcError("degenerate triangle with repeated index")
        object.__setattr__(self, "vertices", _readonly(v))
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "triangles", t)
        if self.source is not None:
            s = np.asarray(self.source, dtype=np.int64).reshape(-1, 3)
            if len(s) != len(v):
                raise MvpcError("source tags must match vertex count")
            object.__setattr__(self, "source", s)

    def __len__(self):
        return len(self.triangles)

    @property
    def corners(self) -> np.ndarray:
        """(T, 3, 3) triangle corner coordinates."""
        return self.vertices[self.triangles]

    def face_area_vectors(self) -> np.ndarray:
        """Right-hand-rule normals scaled by triangle area, (T, 3)."""
        return _area_vectors(self.corners)

    def face_areas(self) -> np.ndarray:
        return np.linalg.norm(self.face_area_vectors(), axis=1)


def _area_vectors(corners: np.ndarray) -> np.ndarray:
    a, b, c = corners[..., 0, :], corners[..., 1, :], corners[..., 2, :]
    return 0.5 * np.cross(b - a, c - a)


def grid_triangles(height: int, width: int) -> np.ndarray:
    """Flat-index triangles of the full H x W grid, TL-BR diagonal.

    Each quad yields (TL, BL, BR) then (TL, BR, TR); quads are ordered row-major.
    """
    if height < 2 or width < 2:
        raise MvpcError(f"triangulation needs a grid of at least 2x2, got {height}x{width}")
    idx = np.arange(height * width).reshape(height, width)
    tl = idx[:-1, :-1].ravel()
    tr = idx[:-1, 1:].ravel()
    bl = idx[1:, :-1].ravel()
    br = idx[1:, 1:].ravel()
    tris = np.empty((2 * tl.size, 3), dtype=np.int64)
    tris[0::2] = np.stack([tl, bl, br], axis=1)
    tris[1::2] = np.stack([tl, br, tr], axis=1)
    return tris


def triangulate(grid: PointGridMap, respect_visibility: bool = True,
                view_index: int = 0) -> TriangleMesh:
    """Mesh a point grid along its 2D connectivity.

    With ``respect_visibility`` only triangles whose three corners are visible
    are kept and unused vertices are dropped; otherwise every pixel becomes a
    vertex and the full grid mesh (fake edges included) is returned.
    """
    h, w = grid.shape
    tris = grid_triangles(h, w)
    pts = grid.points.reshape(-1, 3)
    rows, cols = np.divmod(np.arange(h * w), w)
    source = np.stack([np.full(h * w, view_index), rows, cols], axis=1)
    if not respect_visibility:
        return TriangleMesh(pts, tris, source)
    vis = grid.visible.ravel()
    tris = tris[vis[tris].all(axis=1)]
    used = np.unique(tris)
    remap = np.full(h * w, -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    return TriangleMesh(pts[used], remap[tris], source[used])


def area_weighted_normals(grid: PointGridMap) -> np.ndarray:
    """Per-pixel sum of |triangle| * unit normal over the full-grid 1-ring, (H, W, 3)."""
    return _area_weighted_normals(grid.points)


def _area_weighted_normals(points: np.ndarray) -> np.ndarray:
    h, w = points.shape[:2]
    tris = grid_triangles(h, w)
    av = _area_vectors(points.reshape(-1, 3)[tris])
    out = np.zeros((h * w, 3))
    for k in range(3):
        np.add.at(out, tris[:, k], av)
    return out.reshape(h, w, 3)


def merge_mvpc_to_mesh(m: MVPC) -> TriangleMesh:
    """Concatenate each view's visibility-filtered mesh; vertices are not welded."""
    verts, tris, tags = [], [], []
    offset = 0
    for i, view in enumerate(m.views):
        mesh = triangulate(view, respect_visibility=True, view_index=i)
        verts.append(mesh.vertices)
        tris.append(mesh.triangles + offset)
        tags.append(mesh.source)
        offset += len(mesh.vertices)
    if offset == 0:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64),
                            np.zeros((0, 3), dtype=np.int64))
    return TriangleMesh(np.concatenate(verts), np.concatenate(tris), np.concatenate(tags))


def far_plane_mvpc(rig: ViewRig, visibility: float = 0.0) -> MVPC:
    """MVPC whose every pixel stores its far point."""
    n = len(rig)
    h, w = rig.shape
    pts = np.stack([far_plane_grid(c) for c in rig.cameras])
    return MVPC.from_arrays(rig, pts, np.full((n, h, w), float(visibility)))


def check_same_layout(a: MVPC, b: MVPC) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"MVPC shapes differ: {a.shape} vs {b.shape}")
    for ca, cb in zip(a.rig.cameras, b.rig.cameras):
        if ca != cb:
            raise ShapeMismatchError("MVPCs use different rigs")


def stack_views(views: Sequence[PointGridMap]) -> tuple[np.ndarray, np.ndarray]:
    return (np.stack([v.points for v in views]), np.stack([v.visibility for v in views]))
