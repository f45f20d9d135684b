"""Rest-pose voxelization of articulated objects."""

from __future__ import annotations

import numpy as np

from ..artgrid import ArticulatedVoxelGrid, grid_from_arrays
from ..errors import EmptyResult, ValidationError
from .geometry import box_voxel_range, closed_voxel_range, triangle_box_overlap
from .objects import ArticulatedObject, Part


def part_voxels(part: Part, n: int) -> np.ndarray:
    """Flat indices of voxels touched by a part's geometry.

    Boxes are solid and must overlap a voxel's interior; triangles use the
    closed separating-axis test.
    """
    hits = []
    g = part.geometry
    for box in g.boxes:
        k0, k1 = box_voxel_range(box[:3] - box[3:] / 2, box[:3] + box[3:] / 2, n)
        if (k0 > k1).any():
            continue
        xs, ys, zs = (np.arange(k0[d], k1[d] + 1) for d in range(3))
        hits.append(((xs[:, None, None] * n + ys[None, :, None]) * n + zs[None, None, :]).ravel())
    half = 0.5 / n
    for tri in g.triangles:
        k0, k1 = closed_voxel_range(tri.min(axis=0), tri.max(axis=0), n)
        if (k0 > k1).any():
            continue
        grid = np.stack(
            np.meshgrid(*(np.arange(k0[d], k1[d] + 1) for d in range(3)), indexing="ij"), axis=-1
        ).reshape(-1, 3)
        centers = (grid + 0.5) / n - 0.5
        inside = triangle_box_overlap(centers, half, tri)
        g_in = grid[inside]
        hits.append((g_in[:, 0] * n + g_in[:, 1]) * n + g_in[:, 2])
    if not hits:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.concatenate(hits))


def voxel_owners(obj: ArticulatedObject, n: int):
    """Return (flat voxel indices, owning part ids, per-voxel hit counts).

    Where parts overlap, the part with the smaller rest-state volume owns the
    voxel; equal volumes fall back to the lower part id.
    """
    flats, owners = [], []
    for p in obj.parts:
        f = part_voxels(p, n)
        flats.append(f)
        owners.append(np.full(len(f), p.part_id))
    if not flats or sum(len(f) for f in flats) == 0:
        raise EmptyResult(f"object {obj.name!r} does not intersect the grid")
    flat = np.concatenate(flats)
    owner = np.concatenate(owners)
    volume = np.array([p.geometry.volume() for p in obj.parts])
    # sort by voxel, then by (volume, part id) so the first entry per voxel wins
    order = np.lexsort((owner, volume[owner], flat))
    flat, owner = flat[order], owner[order]
    uniq, first, counts = np.unique(flat, return_index=True, return_counts=True)
    return uniq, owner[first], counts


def voxelize(obj: ArticulatedObject, n: int, provenance: str = "") -> ArticulatedVoxelGrid:
    """Voxelize a canonical object at resolution ``n``.

    Each part's bbox attribute is the axis-aligned box spanned by the cubes of
    the voxels it owns.
    """
    if n < 8:
        raise ValidationError(f"resolution must be >= 8, got {n}")
    flat, owner, _ = voxel_owners(obj, n)
    idx = np.column_stack(np.unravel_index(flat, (n, n, n)))
    v = len(flat)
    labels = np.empty(v, dtype=np.int64)
    jtypes = np.empty(v, dtype=np.int64)
    axes = np.empty((v, 3))
    origins = np.empty((v, 3))
    ranges = np.empty((v, 2))
    pitches = np.empty(v)
    bboxes = np.empty((v, 6))
    lo_corner = idx / n - 0.5
    for p in obj.parts:
        rows = owner == p.part_id
        if not rows.any():
            continue
        j = p.joint
        labels[rows] = int(p.label)
        jtypes[rows] = int(j.joint_type)
        axes[rows] = j.axis
        origins[rows] = j.origin
        ranges[rows] = j.range
        pitches[rows] = j.pitch
        lo = lo_corner[rows].min(axis=0)
        hi = lo_corner[rows].max(axis=0) + 1.0 / n
        bboxes[rows] = np.concatenate([(lo + hi) / 2, hi - lo])
    return grid_from_arrays(
        n, idx, labels, jtypes, axes, origins, ranges, pitches, bboxes, owner,
        provenance=provenance or obj.name,
    )


def contact_fraction(obj: ArticulatedObject, n: int) -> float:
    """Fraction of active voxels touched by more than one part."""
    _, _, counts = voxel_owners(obj, n)
    return float((counts > 1).mean())
