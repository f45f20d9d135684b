"""Rigid joint transforms and their application to voxels and Gaussians.

Geometry is stored in the rest pose (every joint at ``lo``), so articulating
a part to joint value ``v`` applies ``joint_transform(j, v - lo)``. All
supported joints are one-parameter subgroups, hence
``T(v) T(lo)^-1 = T(v - lo)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .artgrid import ArticulatedVoxelGrid, JointSpec, JointType
from .errors import OutOfRange, UnassignedPart

RANGE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """``self ∘ other``: apply ``other`` first."""
        return RigidTransform(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def is_identity(self) -> bool:
        return np.array_equal(self.rotation, np.eye(3)) and not self.translation.any()


def axis_angle_matrix(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    k = np.asarray(axis, dtype=np.float64)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle) * kx + (1.0 - math.cos(angle)) * (kx @ kx)


def _motion(joint: JointSpec, value: float) -> RigidTransform:
    jt = joint.joint_type
    if jt == JointType.FIXED:
        return RigidTransform.identity()
    axis = np.asarray(joint.axis, dtype=np.float64)
    if jt == JointType.PRISMATIC:
        return RigidTransform(np.eye(3), value * axis)
    origin = np.asarray(joint.origin, dtype=np.float64)
    rot = axis_angle_matrix(axis, value)
    trans = origin - rot @ origin
    if jt == JointType.SCREW:
        trans = trans + joint.pitch * value * axis
    return RigidTransform(rot, trans)


def check_value(joint: JointSpec, value: float, clamp: bool = False) -> float:
    if joint.joint_type == JointType.CONTINUOUS:
        return float(value)
    lo, hi = joint.range
    if lo - RANGE_TOL <= value <= hi + RANGE_TOL:
        return float(value)
    if clamp:
        return float(min(max(value, lo), hi))
    raise OutOfRange(f"joint value {value} outside [{lo}, {hi}]")


def joint_transform(joint: JointSpec, value: float, clamp: bool = False) -> RigidTransform:
    """Rigid motion of a joint at ``value`` relative to its zero configuration.

    Prismatic: translate by ``value * axis``. Revolute/continuous: rotate by
    ``value`` about the axis through the origin. Screw: that rotation plus a
    translation of ``pitch * value`` along the axis.
    """
    if joint.joint_type == JointType.FIXED:
        return RigidTransform.identity()
    return _motion(joint, check_value(joint, value, clamp))


def state_transform(joint: JointSpec, value: float, clamp: bool = False) -> RigidTransform:
    """Transform taking a rest-pose part to joint value ``value``."""
    if joint.joint_type == JointType.FIXED:
        return RigidTransform.identity()
    value = check_value(joint, value, clamp)
    return _motion(joint, value - joint.range[0])


@dataclass(frozen=True)
class ArticulationState:
    values: dict

    def __post_init__(self):
        object.__setattr__(self, "values", {int(k): float(v) for k, v in dict(self.values).items()})

    def get(self, part_id: int, default=None):
        return self.values.get(part_id, default)

    @classmethod
    def parse(cls, text: str) -> "ArticulationState":
        """Parse ``"1:0.3,2:1.57"``."""
        values = {}
        for item in filter(None, (s.strip() for s in text.split(","))):
            pid, val = item.split(":")
            values[int(pid)] = float(val)
        return cls(values)

    def format(self) -> str:
        return ",".join(f"{k}:{v!r}" for k, v in sorted(self.values.items()))


def rest_state(grid: ArticulatedVoxelGrid) -> ArticulationState:
    return ArticulationState({pid: j.range[0] for pid, j in grid.part_joints().items() if j.movable})


def part_transforms(grid: ArticulatedVoxelGrid, state: ArticulationState, clamp: bool = False) -> dict:
    """part_id -> transform for ``state``; parts absent from the state stay at rest."""
    if grid.active_count and (grid.part_ids < 0).any():
        raise UnassignedPart("grid has voxels without a part assignment")
    out = {}
    for pid, joint in grid.part_joints().items():
        value = state.get(pid)
        if value is None or not joint.movable:
            out[pid] = RigidTransform.identity()
        else:
            out[pid] = state_transform(joint, value, clamp)
    return out


def _per_row_transforms(grid, state, clamp):
    tf = part_transforms(grid, state, clamp)
    rots = np.empty((grid.active_count, 3, 3))
    trans = np.empty((grid.active_count, 3))
    for pid, rows in grid.part_rows().items():
        rots[rows] = tf[pid].rotation
        trans[rows] = tf[pid].translation
    return rots, trans, tf


@dataclass(frozen=True, eq=False)
class AttributedPointCloud:
    points: np.ndarray  # (V, 3)
    part_ids: np.ndarray
    labels: np.ndarray


def articulate_points(grid: ArticulatedVoxelGrid, state: ArticulationState, clamp: bool = False) -> AttributedPointCloud:
    """Voxel centers moved by their part's joint."""
    centers = grid.centers()
    rots, trans, _ = _per_row_transforms(grid, state, clamp)
    pts = np.einsum("vij,vj->vi", rots, centers) + trans
    return AttributedPointCloud(pts, grid.part_ids.copy(), grid.labels.copy())


# --- quaternions (w, x, y, z) ----------------------------------------------

def quat_to_matrix(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = np.moveaxis(q, -1, 0)
    m = np.stack([
        1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
    ], axis=-1)
    return m.reshape(q.shape[:-1] + (3, 3))


def matrix_to_quat(m) -> np.ndarray:
    """Unit quaternion with non-negative w for a rotation matrix (Shepperd's method)."""
    m = np.asarray(m, dtype=np.float64)
    tr = np.trace(m)
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2
        q = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    q /= np.linalg.norm(q)
    return -q if q[0] < 0 else q


def quat_left_matrix(p) -> np.ndarray:
    """4x4 matrix ``L`` with ``L @ q == p ∘ q`` (Hamilton product)."""
    w, x, y, z = p
    return np.array([
        [w, -x, -y, -z],
        [x, w, -z, y],
        [y, z, w, -x],
        [z, -y, x, w],
    ])


def quat_mul(p, q) -> np.ndarray:
    return np.asarray(q) @ quat_left_matrix(p).T


def covariance(scales, quats) -> np.ndarray:
    """Σ = R diag(s²) Rᵀ for arrays of scales (G, 3) and quaternions (G, 4)."""
    r = quat_to_matrix(quats)
    m = r * np.asarray(scales)[..., None, :]
    return m @ np.swapaxes(m, -1, -2)


def articulate_splats(splats, state: ArticulationState, grid: ArticulatedVoxelGrid, clamp: bool = False):
    """Move each Gaussian with the part of the voxel it was decoded from.

    Means map to ``R μ + t``; rotations compose on the left with ``quat(R)``.
    Gaussians of parts whose transform is the identity are left untouched.
    """
    _, _, tf = _per_row_transforms(grid, state, clamp)
    gauss_part = grid.part_ids[splats.voxel_index]
    means = splats.means.copy()
    quats = splats.quats.copy()
    for pid, t in tf.items():
        if t.is_identity():
            continue
        sel = gauss_part == pid
        means[sel] = t.apply(splats.means[sel])
        q = splats.quats[sel] @ quat_left_matrix(matrix_to_quat(t.rotation)).T
        quats[sel] = q / np.linalg.norm(q, axis=1, keepdims=True)
    return splats.replace(means=means, quats=quats)


def sample_states(grid: ArticulatedVoxelGrid, k: int, mode: str = "uniform", seed: int = 0) -> list:
    """Articulation states spanning every movable part's range.

    ``uniform`` moves all parts in lockstep from ``lo`` to ``hi``; ``random``
    draws each value independently.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    joints = {pid: j for pid, j in grid.part_joints().items() if j.movable}
    if mode == "uniform":
        fracs = [0.0] if k == 1 else [i / (k - 1) for i in range(k)]
        return [
            ArticulationState({pid: j.sampling_range[0] + f * (j.sampling_range[1] - j.sampling_range[0])
                               for pid, j in joints.items()})
            for f in fracs
        ]
    if mode == "random":
        rng = np.random.default_rng(seed)
        return [
            ArticulationState({pid: rng.uniform(*j.sampling_range) for pid, j in joints.items()})
            for _ in range(k)
        ]
    raise ValueError(f"unknown sampling mode {mode!r}")
