"""File formats: OBJ meshes, ASCII PLY points, the binary MVPC container and voxel bitsets.

MVPC container (all little-endian)::

    offset  size  field
    0       4     magic b"MVPC"
    4       2     u16 version (= 1)
    6       2     u16 N (views)
    8       2     u16 H
    10      2     u16 W
    12      2     u16 channels (= 4)
    -- per view, 64 bytes --
    +0      24    view_dir, 3 x f64
    +24     24    up, 3 x f64
    +48     8     ortho_half_width, f64
    +56     4     near, f32
    +60     4     far, f32
    -- then per view, H*W*4 x f32, row-major, channels (x, y, z, v) --

Total size is ``14 + N * (64 + H * W * 16)`` bytes; readers reject any other size.
Background pixels (``v == 0``) whose stored point is the f32-rounded far-plane
point are read back as the exact f64 far-plane point, so a ground truth loaded
from disk has the same loss targets as the one that was written.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .core import MVPC, TriangleMesh, ViewCamera, ViewRig, far_plane_grid
from .exceptions import (MvpcError, MvpcFormatError, NotAnMvpcFileError, ObjParseError,
                         TrailingBytesError, UnexpectedEOFError, UnsupportedVersionError)
from .metrics import VoxelGrid

MAGIC = b"MVPC"
VERSION = 1
CHANNELS = 4
_HEADER = struct.Struct("<4sHHHHH")
_CAMERA = struct.Struct("<3d3ddff")
HEADER_SIZE = _HEADER.size
CAMERA_SIZE = _CAMERA.size
VOXEL_MAGIC = b"VOX0"

assert HEADER_SIZE == 14 and CAMERA_SIZE == 64


def mvpc_file_size(n: int, h: int, w: int) -> int:
    return HEADER_SIZE + n * (CAMERA_SIZE + h * w * 4 * CHANNELS)


def encode_mvpc(m: MVPC) -> bytes:
    n, h, w = m.shape
    if max(n, h, w) > 0xFFFF:
        raise MvpcFormatError("MVPC dimensions exceed the u16 header fields")
    parts = [_HEADER.pack(MAGIC, VERSION, n, h, w, CHANNELS)]
    for cam in m.rig.cameras:
        parts.append(_CAMERA.pack(*cam.view_dir, *cam.up, cam.ortho_half_width,
                                  cam.near, cam.far))
    for view in m.views:
        payload = np.concatenate([view.points, view.visibility[..., None]], axis=-1)
        parts.append(payload.astype("<f4").tobytes(order="C"))
    data = b"".join(parts)
    assert len(data) == mvpc_file_size(n, h, w)
    return data


def decode_mvpc(data: bytes) -> MVPC:
    if len(data) < 4 or data[:4] != MAGIC:
        raise NotAnMvpcFileError()
    if len(data) < HEADER_SIZE:
        raise UnexpectedEOFError()
    _, version, n, h, w, channels = _HEADER.unpack_from(data, 0)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported MVPC version {version}")
    if channels != CHANNELS:
        raise MvpcFormatError(f"expected {CHANNELS} channels, found {channels}")
    expected = mvpc_file_size(n, h, w)
    if len(data) < expected:
        raise UnexpectedEOFError()
    if len(data) > expected:
        raise TrailingBytesError(f"{len(data) - expected} trailing bytes after MVPC payload")
    cams = []
    off = HEADER_SIZE
    try:
        for _ in range(n):
            vals = _CAMERA.unpack_from(data, off)
            off += CAMERA_SIZE
            cams.append(ViewCamera(np.array(vals[0:3]), np.array(vals[3:6]), vals[6],
                                   vals[7], vals[8], h, w))
        raw = np.frombuffer(data, dtype="<f4", offset=off).reshape(n, h, w, CHANNELS)
        pts = raw[..., :3].astype(np.float64)
        # background pixels hold the far-plane point; restore its f64 value when
        # the stored f32 is exactly that point rounded
        for i, cam in enumerate(cams):
            far = far_plane_grid(cam)
            bg = (raw[i, ..., 3] == 0) & np.all(raw[i, ..., :3] == far.astype("<f4"), axis=-1)
            pts[i][bg] = far[bg]
        return MVPC.from_arrays(ViewRig(tuple(cams)), pts, raw[..., 3].astype(np.float64))
    except MvpcFormatError:
        raise
    except MvpcError as exc:
        raise MvpcFormatError(f"invalid MVPC content: {exc}") from exc


def write_mvpc(m: MVPC, path) -> None:
    Path(path).write_bytes(encode_mvpc(m))


def read_mvpc(path) -> MVPC:
    return decode_mvpc(Path(path).read_bytes())


def _parse_index(token: str, nverts: int, lineno: int) -> int:
    head = token.split("/")[0]
    try:
        k = int(head)
    except ValueError:
        raise ObjParseError(lineno, f"bad vertex reference {token!r}") from None
    if k == 0:
        raise ObjParseError(lineno, "vertex index 0 is invalid in OBJ")
    idx = k - 1 if k > 0 else nverts + k
    if not 0 <= idx < nverts:
        raise ObjParseError(lineno, f"vertex index {k} out of range ({nverts} vertices)")
    return idx


def read_obj(path) -> TriangleMesh:
    """Read ``v`` and ``f`` records; polygons are fan-triangulated, other records ignored."""
    verts, tris = [], []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            tag = fields[0]
            if tag == "v":
                if len(fields) < 4:
                    raise ObjParseError(lineno, "vertex needs three coordinates")
                try:
                    xyz = [float(x) for x in fields[1:4]]
                except ValueError:
                    raise ObjParseError(lineno, "non-numeric vertex coordinate") from None
                if not np.all(np.isfinite(xyz)):
                    raise ObjParseError(lineno, "non-finite vertex coordinate")
                verts.append(xyz)
            elif tag == "f":
                if len(fields) < 4:
                    raise ObjParseError(lineno, "face needs at least three vertices")
                idx = [_parse_index(tok, len(verts), lineno) for tok in fields[1:]]
                for k in range(1, len(idx) - 1):
                    tri = (idx[0], idx[k], idx[k + 1])
                    if len(set(tri)) < 3:
                        raise ObjParseError(lineno, "face repeats a vertex")
                    tris.append(tri)
    return TriangleMesh(np.array(verts, dtype=np.float64).reshape(-1, 3),
                        np.array(tris, dtype=np.int64).reshape(-1, 3))


def write_obj_mesh(mesh: TriangleMesh, path) -> None:
    lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def write_ply_points(points, path, normals=None) -> None:
    """ASCII PLY with ``x y z`` (and ``nx ny nz`` when normals are given)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    header = ["ply", "format ascii 1.0", f"element vertex {len(pts)}",
              "property float x", "property float y", "property float z"]
    cols = pts
    if normals is not None:
        nrm = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
        if len(nrm) != len(pts):
            raise MvpcError(f"{len(nrm)} normals for {len(pts)} points")
        header += ["property float nx", "property float ny", "property float nz"]
        cols = np.concatenate([pts, nrm], axis=1)
    header.append("end_header")
    body = [" ".join(f"{v:.9g}" for v in row) for row in cols]
    Path(path).write_text("\n".join(header + body) + "\n", encoding="utf-8")


def encode_voxels(grid: VoxelGrid) -> bytes:
    """``b"VOX0"`` + u32 R + occupancy bits, x fastest, LSB first within a byte."""
    bits = grid.occupancy.transpose(2, 1, 0).ravel()
    return VOXEL_MAGIC + struct.pack("<I", grid.resolution) + \
        np.packbits(bits, bitorder="little").tobytes()


def decode_voxels(data: bytes) -> VoxelGrid:
    if data[:4] != VOXEL_MAGIC:
        raise MvpcFormatError("not a voxel file")
    if len(data) < 8:
        raise UnexpectedEOFError()
    (r,) = struct.unpack_from("<I", data, 4)
    nbytes = (r ** 3 + 7) // 8
    if len(data) < 8 + nbytes:
        raise UnexpectedEOFError()
    if len(data) > 8 + nbytes:
        raise TrailingBytesError("trailing bytes after voxel payload")
    bits = np.unpackbits(np.frombuffer(data, np.uint8, offset=8), bitorder="little")[:r ** 3]
    return VoxelGrid(r, bits.astype(bool).reshape(r, r, r).transpose(2, 1, 0))


def write_voxels(grid: VoxelGrid, path) -> None:
    Path(path).write_bytes(encode_voxels(grid))


def read_voxels(path) -> VoxelGrid:
    return decode_voxels(Path(path).read_bytes())
