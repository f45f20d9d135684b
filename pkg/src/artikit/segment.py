"""Inference-time part extraction from decoded voxel grids.

Voxels are grouped by predicted label, split by DBSCAN on their bounding-box
attributes, and every resulting part gets one averaged set of articulation
parameters written back to all of its voxels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .artgrid import ArticulatedVoxelGrid, JointType
from .errors import DegenerateAxis, EmptyGrid

DEFAULT_EPS = 0.1
DEFAULT_MIN_PTS = 4


class _UnionFind:
    def __init__(self, n):
        self.parent = np.arange(n)

    def find(self, i):
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _sets_within(a, b, eps) -> bool:
    if len(a) * len(b) <= 250_000:
        d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
        return bool((d <= eps).any())
    dist, _ = cKDTree(b).query(a, k=1, distance_upper_bound=eps * (1 + 1e-12))
    return bool(np.isfinite(dist).any() and (dist[np.isfinite(dist)] <= eps).any())


def dbscan(points, eps: float, min_pts: int):
    """Deterministic DBSCAN.

    A point is core when at least ``min_pts`` points (itself included) lie
    within Euclidean distance ``eps``. Clusters are the connected components
    of core points, numbered by their lowest input index. A non-core point
    joins the cluster of its lowest-indexed core neighbor, or is noise.

    Core connectivity is resolved on a grid of cells with diagonal ``eps``:
    core points sharing a cell are always linked, so only pairs of nearby
    cells need an explicit distance check. This keeps dense clusters of
    near-identical features linear in memory.

    Returns ``(labels, noise)`` with ``labels[i] = -1`` for noise.
    """
    if eps <= 0 or min_pts < 1:
        raise ValueError("eps must be > 0 and min_pts >= 1")
    x = np.asarray(points, dtype=np.float64)
    n = len(x)
    x = x.reshape(n, -1)
    labels = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return labels, np.zeros(0, dtype=np.int64)
    d = x.shape[1]
    counts = cKDTree(x).query_ball_point(x, eps, return_length=True)
    core_idx = np.flatnonzero(counts >= min_pts)
    if len(core_idx):
        cx = x[core_idx]
        side = eps / math.sqrt(d)
        cells = np.floor(cx / side).astype(np.int64)
        ucells, cell_of = np.unique(cells, axis=0, return_inverse=True)
        cell_of = cell_of.ravel()
        members = [[] for _ in range(len(ucells))]
        for i, c in enumerate(cell_of):
            members[c].append(i)
        members = [np.array(m) for m in members]
        uf = _UnionFind(len(ucells))
        if len(ucells) > 1:
            pairs = cKDTree(ucells.astype(np.float64)).query_pairs(2 * math.sqrt(d) + 1e-9, output_type="ndarray")
            gap = np.maximum(np.abs(ucells[pairs[:, 0]] - ucells[pairs[:, 1]]) - 1, 0)
            pairs = pairs[(gap ** 2).sum(axis=1) * side * side <= eps * eps * (1 + 1e-12)]
            for a, b in pairs:
                if uf.find(a) != uf.find(b) and _sets_within(cx[members[a]], cx[members[b]], eps):
                    uf.union(a, b)
        roots = np.array([uf.find(c) for c in cell_of])
        # number components by first appearance in input order (core_idx is sorted)
        _, first = np.unique(roots, return_index=True)
        order = np.argsort(first)
        cluster_of_root = {int(r): k for k, r in enumerate(roots[first[order]])}
        labels[core_idx] = [cluster_of_root[int(r)] for r in roots]
        border = np.flatnonzero(counts < min_pts)
        if len(border):
            core_tree = cKDTree(cx)
            for i, nbrs in zip(border, core_tree.query_ball_point(x[border], eps)):
                if nbrs:
                    labels[i] = labels[core_idx[min(nbrs)]]
    return labels, np.flatnonzero(labels < 0)


def dbscan_reference(points, eps: float, min_pts: int) -> np.ndarray:
    """O(n^2) dense-matrix DBSCAN with the same conventions as :func:`dbscan`."""
    x = np.asarray(points, dtype=np.float64)
    n = len(x)
    x = x.reshape(n, -1)
    adj = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1)) <= eps
    core = adj.sum(axis=1) >= min_pts
    labels = np.full(n, -1, dtype=np.int64)
    next_id = 0
    for i in range(n):
        if not core[i] or labels[i] >= 0:
            continue
        stack = [i]
        labels[i] = next_id
        while stack:
            j = stack.pop()
            for k in np.flatnonzero(adj[j] & core):
                if labels[k] < 0:
                    labels[k] = next_id
                    stack.append(k)
        next_id += 1
    for i in np.flatnonzero(~core):
        nbrs = np.flatnonzero(adj[i] & core)
        if len(nbrs):
            labels[i] = labels[nbrs[0]]
    return labels


@dataclass(frozen=True, eq=False)
class PartAssignment:
    part_of: np.ndarray  # (V,) part id per grid row
    n_parts: int
    noise: np.ndarray  # grid rows that DBSCAN marked as noise before merging


def segment_parts(grid: ArticulatedVoxelGrid, eps: float = DEFAULT_EPS, min_pts: int = DEFAULT_MIN_PTS) -> PartAssignment:
    """Split voxels into parts: label groups first, then DBSCAN on bbox features.

    Noise voxels join the nearest cluster of their label in feature space.
    A label with no cluster at all is split into eps-connected components.
    Part ids are assigned by (label index, cluster discovery order).
    """
    if grid.active_count == 0:
        raise EmptyGrid("cannot segment an empty grid")
    part_of = np.full(grid.active_count, -1, dtype=np.int64)
    noise_rows = []
    next_id = 0
    for label in np.unique(grid.labels):
        rows = np.flatnonzero(grid.labels == label)
        feats = grid.bboxes[rows]
        lab, noise = dbscan(feats, eps, min_pts)
        if len(noise):
            noise_rows.append(rows[noise])
            clustered = np.flatnonzero(lab >= 0)
            if len(clustered):
                _, nearest = cKDTree(feats[clustered]).query(feats[noise], k=1)
                lab[noise] = lab[clustered[nearest]]
            else:
                lab, _ = dbscan(feats, eps, 1)
        part_of[rows] = lab + next_id
        next_id += int(lab.max()) + 1
    noise = np.sort(np.concatenate(noise_rows)) if noise_rows else np.zeros(0, dtype=np.int64)
    return PartAssignment(part_of, next_id, noise)


def _vote(values, n_classes) -> int:
    return int(np.argmax(np.bincount(values, minlength=n_classes)))


def _shifted_mean(a: np.ndarray) -> np.ndarray:
    # exact for constant columns
    return a[0] + (a - a[0]).mean(axis=0)


def aggregate_params(grid: ArticulatedVoxelGrid, assignment: PartAssignment) -> ArticulatedVoxelGrid:
    """Average articulation attributes within each part and write them back."""
    part_of = np.asarray(assignment.part_of)
    if (part_of < 0).any():
        raise ValueError("assignment must cover every voxel")
    labels = grid.labels.copy()
    jtypes = grid.joint_types.copy()
    axes = grid.axes.copy()
    origins = grid.origins.copy()
    ranges = grid.ranges.copy()
    pitches = grid.pitches.copy()
    bboxes = grid.bboxes.copy()
    for pid in range(assignment.n_parts):
        rows = np.flatnonzero(part_of == pid)
        if not len(rows):
            continue
        labels[rows] = _vote(grid.labels[rows], 8)
        jt = _vote(grid.joint_types[rows], 5)
        jtypes[rows] = jt
        a = grid.axes[rows].copy()
        a[a @ a[0] < 0] *= -1.0
        if (a == a[0]).all():
            axis = a[0]
        else:
            axis = a.mean(axis=0)
            if jt != JointType.FIXED:
                norm = np.linalg.norm(axis)
                if norm < 1e-6:
                    raise DegenerateAxis(f"part {pid}: averaged axis has norm {norm:.3g}")
                axis = axis / norm
        axes[rows] = axis
        origins[rows] = _shifted_mean(grid.origins[rows])
        ranges[rows] = _shifted_mean(grid.ranges[rows])
        pitches[rows] = _shifted_mean(grid.pitches[rows])
        bboxes[rows] = _shifted_mean(grid.bboxes[rows])
    return grid.replace(
        labels=labels, joint_types=jtypes, axes=axes, origins=origins, ranges=ranges,
        pitches=pitches, bboxes=bboxes, part_ids=part_of,
    )


def segment_and_aggregate(grid, eps=DEFAULT_EPS, min_pts=DEFAULT_MIN_PTS) -> ArticulatedVoxelGrid:
    return aggregate_params(grid, segment_parts(grid, eps, min_pts))
