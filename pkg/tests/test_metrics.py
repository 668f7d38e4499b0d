import numpy as np
import pytest

from oracles import brute_force_chamfer
from mvpc.core import MVPC, make_rig
from mvpc.exceptions import EmptyInputError, MvpcError, ShapeMismatchError
from mvpc.metrics import (VoxelGrid, boundary_error, chamfer, coverage, depth_discontinuity_mask,
                          mvpc_to_points, sample_surface, voxel_iou, voxelize)
from mvpc.shapes import icosphere, quad


class TestVoxels:
    def test_shape_and_count(self):
        g = voxelize([[0.0, 0.0, 0.0], [0.01, 0.01, 0.01], [-1.0, -1.0, -1.0]], 16)
        assert g.occupancy.shape == (16, 16, 16)
        assert g.count == 2
        assert g.occupancy[8, 8, 8] and g.occupancy[0, 0, 0]

    def test_outside_points_dropped(self):
        g = voxelize([[1.0, 0, 0], [0, 2, 0], [np.nan, 0, 0]], 8)
        assert g.count == 0

    def test_empty_input(self):
        assert voxelize(np.zeros((0, 3)), 4).count == 0

    def test_binning_oracle(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-1, 1, (100_000, 3))
        g = voxelize(pts, 8)
        expect = np.zeros((8, 8, 8), dtype=bool)
        for p in pts[:2000]:
            i, j, k = (int((c + 1) // 0.25) for c in p)
            expect[i, j, k] = True
        assert g.occupancy[expect].all()
        assert g.count == 512

    def test_bad_resolution(self):
        with pytest.raises(MvpcError):
            voxelize([[0, 0, 0]], 0)
        with pytest.raises(ShapeMismatchError):
            VoxelGrid(4, np.zeros((4, 4, 3)))


class TestIoU:
    def test_identical(self):
        g = voxelize(np.random.default_rng(1).uniform(-1, 1, (50, 3)), 8)
        assert voxel_iou(g, g) == 1.0

    def test_both_empty(self):
        e = VoxelGrid(4, np.zeros((4, 4, 4)))
        assert voxel_iou(e, e) == 1.0

    def test_disjoint_and_partial(self):
        a = voxelize([[-0.9, -0.9, -0.9], [0.1, 0.1, 0.1]], 4)
        b = voxelize([[0.1, 0.1, 0.1]], 4)
        c = voxelize([[0.9, 0.9, 0.9]], 4)
        assert voxel_iou(a, b) == 0.5
        assert voxel_iou(b, c) == 0.0

    def test_resolution_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            voxel_iou(VoxelGrid(4, np.zeros((4,) * 3)), VoxelGrid(8, np.zeros((8,) * 3)))


class TestChamfer:
    def test_two_points(self):
        assert chamfer([[0, 0, 0]], [[1, 0, 0]]) == 2.0

    def test_identity_and_symmetry(self):
        rng = np.random.default_rng(2)
        p, q = rng.normal(size=(200, 3)), rng.normal(size=(150, 3))
        assert chamfer(p, p) == 0
        assert chamfer(p, q) == pytest.approx(chamfer(q, p), rel=1e-14)
        assert chamfer(p, q) == pytest.approx(brute_force_chamfer(p, q), rel=1e-12)

    def test_means_not_sums(self):
        p = np.zeros((10, 3))
        q = np.array([[0.0, 0.0, 1.0]])
        assert chamfer(p, q) == pytest.approx(2.0)

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            chamfer(np.zeros((0, 3)), [[0, 0, 0]])

    def test_bad_shape(self):
        with pytest.raises(MvpcError):
            chamfer(np.zeros((4, 2)), np.zeros((4, 2)))


class TestMvpcPoints:
    def test_visible_count_sphere(self, sphere_mesh):
        from mvpc.sampler import sample_mvpc
        gt = sample_mvpc(sphere_mesh, make_rig(6, 128))
        pts = mvpc_to_points(gt)
        assert len(pts) == int(gt.visibility.sum())
        assert gt.points.reshape(-1, 3).shape[0] == 98304

    def test_threshold_is_inclusive(self, small_gt):
        v = np.full(small_gt.shape, 0.4)
        v[0, 0, 0] = 0.6
        v[1, 2, 3] = 0.5
        m = MVPC.from_arrays(small_gt.rig, small_gt.points, v)
        assert len(mvpc_to_points(m)) == 2
        assert len(mvpc_to_points(m, 0.4)) == v.size


class TestCoverage:
    def test_sphere_full(self, sphere_mesh):
        assert coverage(sphere_mesh, make_rig(6, 32), samples=5000) == 1.0

    def test_single_sided_sheet(self):
        # the quad's normal faces +z; only a rig camera on that side sees it
        cov = coverage(quad(half_size=0.5), make_rig(4, 16), samples=2000)
        assert cov == 1.0
        from mvpc.core import ViewCamera, ViewRig
        back = ViewRig((ViewCamera.looking_at_origin((0, 0, -1), (8, 8)),))
        assert coverage(quad(half_size=0.5), back, samples=2000) == 0.0

    def test_errors(self, sphere_mesh):
        from mvpc.core import TriangleMesh
        with pytest.raises(EmptyInputError):
            coverage(TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3))), make_rig(4, 8))
        with pytest.raises(MvpcError):
            coverage(sphere_mesh, make_rig(4, 8), samples=0)

    def test_samples_on_surface(self, sphere_mesh):
        pts, tri, nrm = sample_surface(sphere_mesh, 1000, seed=3)
        c = sphere_mesh.corners[tri]
        off = np.einsum("nk,nk->n", pts - c[:, 0], nrm)
        assert np.abs(off).max() < 1e-12
        np.testing.assert_allclose(np.linalg.norm(nrm, axis=1), 1.0)


class TestDiscontinuity:
    def test_sphere_rim_only(self, sphere_gt4):
        mask = depth_discontinuity_mask(sphere_gt4)
        vis = sphere_gt4.visibility.astype(bool)
        assert mask.shape == sphere_gt4.shape
        assert mask.any() and not (mask & ~vis).any()
        assert not mask[:, 14:18, 14:18].any()

    def test_boundary_error(self, sphere_gt4):
        assert boundary_error(sphere_gt4, sphere_gt4) == 0.0
        moved = MVPC.from_arrays(sphere_gt4.rig, sphere_gt4.points + [0.1, 0, 0],
                                 sphere_gt4.visibility)
        assert boundary_error(moved, sphere_gt4) == pytest.approx(0.1)

    def test_boundary_error_empty(self, sphere_gt4):
        with pytest.raises(EmptyInputError):
            boundary_error(sphere_gt4, sphere_gt4, np.zeros(sphere_gt4.shape, dtype=bool))

    def test_full_view_flat_has_no_edges(self):
        from conftest import depth_grid, mvpc_from, single_view
        rig = single_view(shape=(6, 6))
        pts, vis = depth_grid(rig[0], np.full((6, 6), 3.0))
        assert not depth_discontinuity_mask(mvpc_from(rig, pts, vis)).any()


def test_icosphere_vertices_on_unit_sphere():
    v = icosphere(3).vertices
    np.testing.assert_allclose(np.linalg.norm(v, axis=1), 1.0)
