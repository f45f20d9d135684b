"""Procedural voxel colours and reference splats built from a grid."""

from __future__ import annotations

import numpy as np

from ..artgrid import ArticulatedVoxelGrid, PartLabel
from .splats import SplatSet

PALETTE = np.array([
    [0.72, 0.58, 0.42],  # base
    [0.20, 0.45, 0.80],  # drawer
    [0.80, 0.30, 0.25],  # door
    [0.92, 0.85, 0.20],  # handle
    [0.30, 0.80, 0.30],  # knob
    [0.60, 0.30, 0.70],  # tray
    [0.55, 0.55, 0.55],  # shelf
    [0.15, 0.15, 0.15],  # wheel
])
INTERIOR = np.array([0.95, 0.55, 0.10])
SLIDING = (PartLabel.DRAWER, PartLabel.TRAY)


def voxel_colors(grid: ArticulatedVoxelGrid) -> np.ndarray:
    """Label colour per voxel; drawers and trays are a different colour behind their front face."""
    colors = PALETTE[grid.labels].copy()
    for pid, rows in grid.part_rows().items():
        if grid.labels[rows[0]] in SLIDING:
            y = grid.indices[rows, 1]
            colors[rows[y < y.max()]] = INTERIOR
    return colors


def gt_splats(grid: ArticulatedVoxelGrid, colors=None, per_axis: int = 2, opacity: float = 0.95) -> SplatSet:
    """``per_axis^3`` isotropic Gaussians on a sub-lattice of every voxel."""
    colors = voxel_colors(grid) if colors is None else np.asarray(colors, dtype=np.float64)
    vs = grid.voxel_size
    step = vs / per_axis
    offs = (np.stack(np.meshgrid(*[np.arange(per_axis)] * 3, indexing="ij"), -1).reshape(-1, 3) + 0.5) * step - vs / 2
    k = len(offs)
    means = (grid.centers()[:, None, :] + offs[None]).reshape(-1, 3)
    g = len(means)
    return SplatSet(
        means, np.full((g, 3), 0.6 * step), np.tile([1.0, 0.0, 0.0, 0.0], (g, 1)),
        np.full(g, opacity), np.repeat(colors, k, axis=0), np.repeat(np.arange(grid.active_count), k),
    )
