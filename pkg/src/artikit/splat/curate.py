"""Multi-state data curation: render articulated splats and read colours back per voxel.

For every state and view, each rest-state voxel's articulated center is
projected to its nearest pixel. The sample counts when the pixel is covered
(alpha >= 0.5) and the rendered depth agrees with the voxel's depth within
1.5 voxel sizes, i.e. the voxel is at the visible surface. The sampled
colour is un-premultiplied (rgb / alpha). All samples of a voxel across
views and states are averaged; voxels never seen keep a zero feature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..artgrid import ArticulatedVoxelGrid
from ..kinematics import ArticulationState, articulate_points, articulate_splats, sample_states
from .camera import N_VIEWS, fibonacci_cameras
from .render import render
from .splats import SplatSet

K_STATES = 8
DEPTH_TOL = 1.5
MIN_ALPHA = 0.5


@dataclass
class MultiStateSample:
    object_id: str
    state: ArticulationState
    views: list  # (Camera, Image)
    features: np.ndarray  # (V, 3) average over this state's views
    counts: np.ndarray  # (V,) samples per voxel


@dataclass
class Curation:
    samples: list
    features: np.ndarray  # (V, 3) average over every view and state
    seen: np.ndarray  # (V,) bool
    counts: np.ndarray = field(default=None)


def readback(grid: ArticulatedVoxelGrid, points: np.ndarray, cam, image):
    """Colour samples of the voxels at ``points`` visible in ``image``: (rows, rgb)."""
    u, v, z = cam.project(points)
    ok = np.isfinite(u) & np.isfinite(v) & (z > 0)
    j = np.full(len(points), -1)
    i = np.full(len(points), -1)
    j[ok] = np.round(u[ok]).astype(np.int64)
    i[ok] = np.round(v[ok]).astype(np.int64)
    ok &= (j >= 0) & (j < cam.width) & (i >= 0) & (i < cam.height)
    rows = np.flatnonzero(ok)
    a = image.alpha[i[rows], j[rows]]
    d = image.depth[i[rows], j[rows]]
    vis = (a >= MIN_ALPHA) & (np.abs(d - z[rows]) <= DEPTH_TOL * grid.voxel_size)
    rows = rows[vis]
    rgb = image.rgb[i[rows], j[rows]] / image.alpha[i[rows], j[rows], None]
    return rows, rgb


def curate_multistate(grid: ArticulatedVoxelGrid, splats: SplatSet, k: int = K_STATES, n: int = N_VIEWS,
                      states=None, width: int = 64, height: int = 64, radius: float = 2.0,
                      object_id: str = "") -> Curation:
    """Per-voxel colour features averaged over ``k`` states and ``n`` views."""
    if k < 1 or n < 1:
        raise ValueError("k and n must be >= 1")
    states = sample_states(grid, k) if states is None else list(states)
    cams = fibonacci_cameras(n, radius, width=width, height=height)
    total = np.zeros((grid.active_count, 3))
    count = np.zeros(grid.active_count)
    samples = []
    for state in states:
        moved = articulate_splats(splats, state, grid)
        pts = articulate_points(grid, state).points
        acc, cnt, views = np.zeros_like(total), np.zeros_like(count), []
        for cam in cams:
            image = render(moved, cam)
            rows, rgb = readback(grid, pts, cam, image)
            np.add.at(acc, rows, rgb)
            np.add.at(cnt, rows, 1.0)
            views.append((cam, image))
        with np.errstate(invalid="ignore", divide="ignore"):
            feats = np.where(cnt[:, None] > 0, acc / cnt[:, None], 0.0)
        samples.append(MultiStateSample(object_id, state, views, feats, cnt))
        total += acc
        count += cnt
    seen = count > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        features = np.where(seen[:, None], total / count[:, None], 0.0)
    return Curation(samples, features, seen, count)
