"""Independent reference implementations used only by the tests."""
import numpy as np


def ray_hits_any(origins, direction, corners, t_min=0.0, chunk=4000):
    """Möller–Trumbore against every triangle; True where some hit has t > t_min."""
    direction = np.asarray(direction, dtype=np.float64)
    v0, v1, v2 = corners[:, 0], corners[:, 1], corners[:, 2]
    e1, e2 = v1 - v0, v2 - v0
    pvec = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    keep = np.abs(det) > 1e-14
    e1, e2, v0, pvec, det = e1[keep], e2[keep], v0[keep], pvec[keep], det[keep]
    inv = 1.0 / det
    out = np.zeros(len(origins), dtype=bool)
    for s in range(0, len(origins), chunk):
        tvec = origins[s:s + chunk, None, :] - v0[None]
        uu = np.einsum("qtk,tk->qt", tvec, pvec) * inv
        qvec = np.cross(tvec, e1[None])
        vv = (qvec @ direction) * inv
        tt = np.einsum("qtk,tk->qt", qvec, e2) * inv
        out[s:s + chunk] = ((uu >= 0) & (vv >= 0) & (uu + vv <= 1) & (tt > t_min)).any(axis=1)
    return out


def brute_force_vol(camera, pred_pts, gt_pts, gt_vis):
    """Quasi-volume loss by explicit 1-ring enumeration, one pixel at a time.

    Triangles come from the TL-BR split of each quad; each normal is flipped to
    face the camera rather than trusting the winding.
    """
    h, w = gt_vis.shape
    toward = -np.asarray(camera.view_dir, dtype=np.float64)
    total = 0.0
    for r in range(h):
        for c in range(w):
            if gt_vis[r, c] == 0:
                continue
            n = np.zeros(3)
            for r0 in (r - 1, r):
                for c0 in (c - 1, c):
                    if not (0 <= r0 < h - 1 and 0 <= c0 < w - 1):
                        continue
                    tl, bl, br, tr = (r0, c0), (r0 + 1, c0), (r0 + 1, c0 + 1), (r0, c0 + 1)
                    for tri in ((tl, bl, br), (tl, br, tr)):
                        if (r, c) not in tri:
                            continue
                        a, b, d = (gt_pts[p] for p in tri)
                        cross = np.cross(b - a, d - a)
                        area = 0.5 * np.linalg.norm(cross)
                        if area == 0:
                            continue
                        unit = cross / np.linalg.norm(cross)
                        if unit @ toward < 0:
                            unit = -unit
                        n += area * unit
            total += abs(gt_vis[r, c] * (pred_pts[r, c] - gt_pts[r, c]) @ n)
    return total


def brute_force_chamfer(p, q):
    d = np.sqrt(((p[:, None, :] - q[None, :, :]) ** 2).sum(-1))
    return d.min(axis=1).mean() + d.min(axis=0).mean()


def sample_triangles(corners, n, seed):
    """Area-uniform samples with outward (winding) unit normals."""
    rng = np.random.default_rng(seed)
    cross = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    area = np.linalg.norm(cross, axis=1)
    tri = rng.choice(len(corners), size=n, p=area / area.sum())
    a, b = rng.random(n), rng.random(n)
    flip = a + b > 1
    a[flip], b[flip] = 1 - a[flip], 1 - b[flip]
    c = corners[tri]
    pts = c[:, 0] + a[:, None] * (c[:, 1] - c[:, 0]) + b[:, None] * (c[:, 2] - c[:, 0])
    return pts, cross[tri] / area[tri, None]


def brute_force_coverage(mesh, rig, n, seed=0, eps=1e-6):
    corners = mesh.vertices[mesh.triangles]
    pts, normals = sample_triangles(corners, n, seed)
    seen = np.zeros(n, dtype=bool)
    for cam in rig.cameras:
        toward = -np.asarray(cam.view_dir)
        facing = (normals @ toward > 0) & ~seen
        idx = np.flatnonzero(facing)
        blocked = ray_hits_any(pts[idx] + eps * normals[idx], toward, corners)
        seen[idx[~blocked]] = True
    return float(seen.mean())
