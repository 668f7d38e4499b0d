import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from mvpc.core import (MVPC, PointGridMap, ViewCamera, _area_vectors, _area_weighted_normals,
                       backproject, grid_triangles, make_rig, project, triangulate)
from mvpc.io_formats import decode_mvpc, decode_voxels, encode_mvpc, encode_voxels
from mvpc.metrics import VoxelGrid, chamfer, voxel_iou

finite = st.floats(-2, 2, allow_nan=False, allow_infinity=False)
unit_dirs = arrays(np.float64, 3, elements=st.floats(-1, 1)).filter(
    lambda d: np.linalg.norm(d) > 0.2)
clouds = st.integers(1, 30).flatmap(lambda n: arrays(np.float64, (n, 3), elements=finite))


@given(unit_dirs, arrays(np.float64, (10, 3), elements=st.floats(-0.9, 0.9)))
def test_project_backproject_round_trip(direction, pts):
    cam = ViewCamera.looking_at_origin(direction, (8, 8))
    u, v, d = project(cam, pts)
    np.testing.assert_allclose(backproject(cam, u, v, d), pts, atol=1e-12)


@given(clouds, clouds)
def test_chamfer_symmetric_and_nonnegative(p, q):
    a, b = chamfer(p, q), chamfer(q, p)
    assert a >= 0 and abs(a - b) <= 1e-12 * max(1.0, a)
    assert chamfer(p, p) == 0


@given(arrays(bool, (4, 4, 4)), arrays(bool, (4, 4, 4)))
def test_iou_bounds(a, b):
    ga, gb = VoxelGrid(4, a), VoxelGrid(4, b)
    iou = voxel_iou(ga, gb)
    assert 0 <= iou <= 1
    assert iou == voxel_iou(gb, ga)
    assert voxel_iou(ga, ga) == 1.0


@given(arrays(bool, st.sampled_from([(1, 1, 1), (5, 5, 5), (7, 7, 7)])))
def test_voxel_encoding_round_trip(occ):
    g = VoxelGrid(occ.shape[0], occ)
    np.testing.assert_array_equal(decode_voxels(encode_voxels(g)).occupancy, occ)


@given(st.integers(2, 9), st.integers(2, 9))
def test_grid_triangle_count(h, w):
    tris = grid_triangles(h, w)
    assert tris.shape == (2 * (h - 1) * (w - 1), 3)
    assert np.unique(tris).size == h * w


@given(st.integers(2, 6), st.integers(2, 6), st.data())
def test_normal_sum_identity(h, w, data):
    pts = data.draw(arrays(np.float64, (h, w, 3), elements=finite))
    n = _area_weighted_normals(pts)
    corners = pts.reshape(-1, 3)[grid_triangles(h, w)]
    # every triangle contributes its area vector to each of its three corners
    np.testing.assert_allclose(n.sum(axis=(0, 1)), 3 * _area_vectors(corners).sum(0),
                               atol=1e-9)


@given(st.data())
def test_triangulate_keeps_only_visible(data):
    cam = ViewCamera.looking_at_origin((0, 0, 1), (5, 5))
    vis = data.draw(arrays(bool, (5, 5)))
    pts = data.draw(arrays(np.float64, (5, 5, 3), elements=finite))
    mesh = triangulate(PointGridMap(cam, pts, vis.astype(float)))
    full = grid_triangles(5, 5)
    assert len(mesh.triangles) == int(vis.ravel()[full].all(axis=1).sum())


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([4, 6, 8]), st.integers(2, 6), st.data())
def test_mvpc_encode_decode(n, res, data):
    rig = make_rig(n, res)
    pts = data.draw(arrays(np.float32, (n, res, res, 3), elements=st.floats(-3, 3, width=32)))
    vis = data.draw(arrays(np.float32, (n, res, res), elements=st.floats(0, 1, width=32)))
    m = MVPC.from_arrays(rig, pts.astype(np.float64), vis.astype(np.float64))
    back = decode_mvpc(encode_mvpc(m))
    np.testing.assert_array_equal(back.points, m.points)
    np.testing.assert_array_equal(back.visibility, m.visibility)
    assert encode_mvpc(back) == encode_mvpc(m)
