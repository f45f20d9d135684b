"""Triangle/box overlap tests used by voxelization."""

import numpy as np

_BOX_NORMALS = np.eye(3)


def triangle_box_overlap(centers, half, tri) -> np.ndarray:
    """Closed separating-axis test of one triangle against many cubes.

    ``centers`` is (M, 3), ``half`` the cube half-extent (scalar or 3-vector),
    ``tri`` a (3, 3) array of vertices. Touching counts as overlap.
    Returns a boolean mask of length M.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    half = np.broadcast_to(np.asarray(half, dtype=np.float64), (3,))
    tri = np.asarray(tri, dtype=np.float64)
    v = tri[None, :, :] - centers[:, None, :]  # (M, 3, 3)
    edges = np.array([tri[1] - tri[0], tri[2] - tri[1], tri[0] - tri[2]])
    normal = np.cross(edges[0], edges[1] if np.any(edges[1]) else edges[2])
    axes = [_BOX_NORMALS[i] for i in range(3)] + [normal]
    for e in edges:
        for b in _BOX_NORMALS:
            axes.append(np.cross(e, b))
    hit = np.ones(len(centers), dtype=bool)
    for a in axes:
        r = float(np.abs(a) @ half)
        p = v @ a  # (M, 3)
        separated = (p.min(axis=1) > r) | (p.max(axis=1) < -r)
        hit &= ~separated
    return hit


def box_voxel_range(lo, hi, n):
    """Index range [k0, k1] of voxels whose open interior overlaps ``(lo, hi)``.

    Voxel k spans ``[k/n - 0.5, (k+1)/n - 0.5]``. Returns clipped arrays;
    an empty range has k0 > k1.
    """
    a = (np.asarray(lo, dtype=np.float64) + 0.5) * n
    b = (np.asarray(hi, dtype=np.float64) + 0.5) * n
    k0 = np.maximum(np.floor(a).astype(np.int64), 0)
    k1 = np.minimum(np.ceil(b).astype(np.int64) - 1, n - 1)
    return k0, k1


def closed_voxel_range(lo, hi, n):
    """Index range of voxels whose closed cube touches ``[lo, hi]``."""
    a = (np.asarray(lo, dtype=np.float64) + 0.5) * n
    b = (np.asarray(hi, dtype=np.float64) + 0.5) * n
    k0 = np.maximum(np.ceil(a).astype(np.int64) - 1, 0)
    k1 = np.minimum(np.floor(b).astype(np.int64), n - 1)
    return k0, k1


def triangle_mesh_volume(triangles) -> float:
    """Absolute signed volume enclosed by a triangle soup (0 for open sheets)."""
    t = np.asarray(triangles, dtype=np.float64).reshape(-1, 3, 3)
    if len(t) == 0:
        return 0.0
    return abs(float(np.einsum("ij,ij->i", t[:, 0], np.cross(t[:, 1], t[:, 2])).sum()) / 6.0)
