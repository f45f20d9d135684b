"""Articulation-aware sparse voxel grids.

A grid stores its active voxels as parallel arrays (structure of arrays) so
that channel encoding, kinematics and segmentation stay vectorized. The
per-voxel :class:`VoxelRecord` view exists for construction and inspection.

Canonical space is the cube ``[-0.5, 0.5]^3``; voxel ``(x, y, z)`` of an
``N``-grid has its center at ``(idx + 0.5) / N - 0.5``.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    BadChannelCount,
    DegenerateAxis,
    DuplicateVoxel,
    FormatError,
    InconsistentPart,
    OutOfBounds,
    ValidationError,
)


class PartLabel(enum.IntEnum):
    BASE = 0
    DRAWER = 1
    DOOR = 2
    HANDLE = 3
    KNOB = 4
    TRAY = 5
    SHELF = 6
    WHEEL = 7

    @classmethod
    def parse(cls, name: str) -> "PartLabel":
        return cls[name.strip().upper()]


class JointType(enum.IntEnum):
    FIXED = 0
    REVOLUTE = 1
    PRISMATIC = 2
    CONTINUOUS = 3
    SCREW = 4

    @classmethod
    def parse(cls, name: str) -> "JointType":
        return cls[name.strip().upper()]

    @property
    def is_rotational(self) -> bool:
        return self in (JointType.REVOLUTE, JointType.CONTINUOUS, JointType.SCREW)


N_LABELS = len(PartLabel)
N_JOINTS = len(JointType)

# channel layout of the dense encoding
CH_OCC = 0
CH_LABEL = slice(1, 9)
CH_JOINT = slice(9, 14)
CH_AXIS = slice(14, 17)
CH_ORIGIN = slice(17, 20)
CH_RANGE = slice(20, 22)
CH_BBOX = slice(22, 28)
N_CHANNELS = 28

AXIS_TOL = 1e-6


@dataclass(frozen=True)
class JointSpec:
    joint_type: JointType = JointType.FIXED
    axis: tuple = (0.0, 0.0, 0.0)
    origin: tuple = (0.0, 0.0, 0.0)
    range: tuple = (0.0, 0.0)
    pitch: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "joint_type", JointType(self.joint_type))
        object.__setattr__(self, "axis", tuple(float(v) for v in self.axis))
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "range", tuple(float(v) for v in self.range))
        object.__setattr__(self, "pitch", float(self.pitch))

    @property
    def movable(self) -> bool:
        return self.joint_type != JointType.FIXED

    @property
    def sampling_range(self) -> tuple:
        """Range used when drawing articulation states."""
        if self.joint_type == JointType.CONTINUOUS:
            return (-math.pi, math.pi)
        return self.range

    def validate(self) -> None:
        lo, hi = self.range
        if not lo <= hi:
            raise ValidationError(f"joint range lo > hi: {self.range}")
        if self.joint_type == JointType.FIXED:
            if self.range != (0.0, 0.0):
                raise ValidationError("fixed joint must have range (0, 0)")
            return
        norm = math.sqrt(sum(a * a for a in self.axis))
        if abs(norm - 1.0) > AXIS_TOL:
            raise ValidationError(f"joint axis is not unit length (|a| = {norm:.9g})")


@dataclass(frozen=True)
class VoxelRecord:
    index: tuple
    label: PartLabel
    bbox: tuple
    joint: JointSpec
    part_id: int = -1


@dataclass(frozen=True)
class ChannelVolume:
    """Dense ``[C, N, N, N]`` attribute volume indexed ``data[c, x, y, z]``."""

    data: np.ndarray

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def resolution(self) -> int:
        return self.data.shape[1]

    @property
    def occupancy(self) -> np.ndarray:
        return self.data[CH_OCC]


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ArticulatedVoxelGrid:
    """Active voxels of an ``N^3`` grid with per-voxel articulation attributes.

    Arrays have one row per active voxel, in record order.
    """

    resolution: int
    indices: np.ndarray  # (V, 3) int
    labels: np.ndarray  # (V,) int
    joint_types: np.ndarray  # (V,) int
    axes: np.ndarray  # (V, 3)
    origins: np.ndarray  # (V, 3)
    ranges: np.ndarray  # (V, 2)
    pitches: np.ndarray  # (V,)
    bboxes: np.ndarray  # (V, 6) center xyz, size xyz
    part_ids: np.ndarray  # (V,) int, -1 = unassigned
    provenance: str = field(default="")

    def __post_init__(self):
        v = len(self.indices)
        specs = {
            "indices": (np.int64, (v, 3)),
            "labels": (np.int64, (v,)),
            "joint_types": (np.int64, (v,)),
            "axes": (np.float64, (v, 3)),
            "origins": (np.float64, (v, 3)),
            "ranges": (np.float64, (v, 2)),
            "pitches": (np.float64, (v,)),
            "bboxes": (np.float64, (v, 6)),
            "part_ids": (np.int64, (v,)),
        }
        for name, (dtype, shape) in specs.items():
            arr = _frozen(getattr(self, name), dtype).reshape(shape)
            object.__setattr__(self, name, arr)

    @property
    def active_count(self) -> int:
        return len(self.indices)

    @property
    def voxel_size(self) -> float:
        return 1.0 / self.resolution

    def __len__(self) -> int:
        return self.active_count

    def centers(self) -> np.ndarray:
        return (self.indices + 0.5) / self.resolution - 0.5

    def joint(self, i: int) -> JointSpec:
        return JointSpec(
            JointType(int(self.joint_types[i])),
            tuple(self.axes[i]),
            tuple(self.origins[i]),
            tuple(self.ranges[i]),
            float(self.pitches[i]),
        )

    def record(self, i: int) -> VoxelRecord:
        return VoxelRecord(
            tuple(int(c) for c in self.indices[i]),
            PartLabel(int(self.labels[i])),
            tuple(float(b) for b in self.bboxes[i]),
            self.joint(i),
            int(self.part_ids[i]),
        )

    @property
    def records(self) -> list:
        return [self.record(i) for i in range(self.active_count)]

    def part_rows(self) -> dict:
        """Map part_id -> row indices, for assigned voxels only."""
        out = {}
        for pid in np.unique(self.part_ids):
            if pid >= 0:
                out[int(pid)] = np.flatnonzero(self.part_ids == pid)
        return out

    def part_joints(self) -> dict:
        return {pid: self.joint(int(rows[0])) for pid, rows in self.part_rows().items()}

    def replace(self, **changes) -> "ArticulatedVoxelGrid":
        fields = {
            name: getattr(self, name)
            for name in (
                "resolution", "indices", "labels", "joint_types", "axes", "origins",
                "ranges", "pitches", "bboxes", "part_ids", "provenance",
            )
        }
        fields.update(changes)
        return ArticulatedVoxelGrid(**fields)

    def attribute_matrix(self) -> np.ndarray:
        """(V, 20) float block [label, joint, axis, origin, range, pitch, bbox]."""
        return np.column_stack(
            [self.labels, self.joint_types, self.axes, self.origins, self.ranges,
             self.pitches, self.bboxes]
        )

    def same_as(self, other: "ArticulatedVoxelGrid", *, part_ids=True, pitch=True, atol=0.0) -> bool:
        if self.resolution != other.resolution or self.active_count != other.active_count:
            return False
        if not (np.array_equal(self.indices, other.indices)
                and np.array_equal(self.labels, other.labels)
                and np.array_equal(self.joint_types, other.joint_types)):
            return False
        if part_ids and not np.array_equal(self.part_ids, other.part_ids):
            return False
        pairs = [(self.axes, other.axes), (self.origins, other.origins),
                 (self.ranges, other.ranges), (self.bboxes, other.bboxes)]
        if pitch:
            pairs.append((self.pitches, other.pitches))
        return all(np.allclose(a, b, rtol=0.0, atol=atol) for a, b in pairs)


def grid_from_arrays(resolution, indices, labels, joint_types, axes, origins, ranges,
                     pitches=None, bboxes=None, part_ids=None, provenance="",
                     validate=True) -> ArticulatedVoxelGrid:
    v = len(indices)
    grid = ArticulatedVoxelGrid(
        resolution=int(resolution),
        indices=np.asarray(indices).reshape(v, 3),
        labels=labels,
        joint_types=joint_types,
        axes=axes,
        origins=origins,
        ranges=ranges,
        pitches=np.zeros(v) if pitches is None else pitches,
        bboxes=np.zeros((v, 6)) if bboxes is None else bboxes,
        part_ids=np.full(v, -1) if part_ids is None else part_ids,
        provenance=provenance,
    )
    if validate:
        validate_grid(grid)
    return grid


def build_grid(resolution: int, records: Sequence[VoxelRecord], provenance: str = "") -> ArticulatedVoxelGrid:
    if resolution < 8:
        raise ValidationError(f"resolution must be >= 8, got {resolution}")
    if not records:
        raise ValidationError("records must be nonempty")
    return grid_from_arrays(
        resolution,
        indices=[r.index for r in records],
        labels=[int(r.label) for r in records],
        joint_types=[int(r.joint.joint_type) for r in records],
        axes=[r.joint.axis for r in records],
        origins=[r.joint.origin for r in records],
        ranges=[r.joint.range for r in records],
        pitches=[r.joint.pitch for r in records],
        bboxes=[r.bbox for r in records],
        part_ids=[r.part_id for r in records],
        provenance=provenance,
    )


def validate_grid(grid: ArticulatedVoxelGrid) -> None:
    """Raise on any violation of the grid invariants."""
    n = grid.resolution
    idx = grid.indices
    bad = np.flatnonzero(((idx < 0) | (idx >= n)).any(axis=1))
    if len(bad):
        raise OutOfBounds(f"voxel index {tuple(idx[bad[0]])} outside [0, {n})")
    flat = (idx[:, 0] * n + idx[:, 1]) * n + idx[:, 2]
    uniq, counts = np.unique(flat, return_counts=True)
    if len(uniq) != len(flat):
        dup = uniq[counts > 1][0]
        where = np.flatnonzero(flat == dup)
        raise DuplicateVoxel(f"duplicate voxel index {tuple(idx[where[0]])}")
    if grid.active_count and not np.isin(grid.labels, range(N_LABELS)).all():
        raise ValidationError("label out of range")
    if grid.active_count and not np.isin(grid.joint_types, range(N_JOINTS)).all():
        raise ValidationError("joint type out of range")
    if (grid.bboxes[:, 3:] <= 0).any():
        raise ValidationError("bbox sizes must be positive")
    attrs = grid.attribute_matrix()
    for pid, rows in grid.part_rows().items():
        if not (attrs[rows] == attrs[rows[0]]).all():
            raise InconsistentPart(f"part {pid} has voxels with differing attributes")


def to_channels(grid: ArticulatedVoxelGrid, dtype=np.float64) -> ChannelVolume:
    n = grid.resolution
    data = np.zeros((N_CHANNELS, n, n, n), dtype=dtype)
    x, y, z = grid.indices.T
    data[CH_OCC, x, y, z] = 1.0
    data[1 + grid.labels, x, y, z] = 1.0
    data[9 + grid.joint_types, x, y, z] = 1.0
    data[CH_AXIS, x, y, z] = grid.axes.T
    data[CH_ORIGIN, x, y, z] = grid.origins.T
    data[CH_RANGE, x, y, z] = grid.ranges.T
    data[CH_BBOX, x, y, z] = grid.bboxes.T
    return ChannelVolume(data)


def from_channels(vol: ChannelVolume, occ_threshold: float = 0.5, provenance: str = "") -> ArticulatedVoxelGrid:
    """Decode a (possibly soft) channel volume back into a sparse grid.

    Fixed joints keep their decoded axis as-is and get range ``(0, 0)``;
    movable joints get a renormalized axis and a sorted range. ``part_id`` is
    left unassigned.
    """
    data = np.asarray(vol.data)
    if data.ndim != 4 or data.shape[0] != N_CHANNELS:
        raise BadChannelCount(f"expected {N_CHANNELS} channels, got shape {data.shape}")
    if not 0.0 < occ_threshold < 1.0:
        raise ValueError("occ_threshold must lie in (0, 1)")
    n = data.shape[1]
    active = data[CH_OCC] >= occ_threshold
    idx = np.argwhere(active)
    x, y, z = idx.T
    feats = data[:, x, y, z].T.astype(np.float64)  # (V, 28)
    labels = np.argmax(feats[:, CH_LABEL], axis=1)
    jtypes = np.argmax(feats[:, CH_JOINT], axis=1)
    axes = feats[:, CH_AXIS].copy()
    ranges = np.sort(feats[:, CH_RANGE], axis=1)
    movable = jtypes != JointType.FIXED
    norms = np.linalg.norm(axes, axis=1)
    degenerate = movable & (norms < 1e-12)
    if degenerate.any():
        raise DegenerateAxis(f"zero-norm axis at voxel {tuple(idx[np.flatnonzero(degenerate)[0]])}")
    axes[movable] /= norms[movable, None]
    ranges[~movable] = 0.0
    bboxes = feats[:, CH_BBOX].copy()
    # bbox sizes must stay positive for the grid invariant
    bboxes[:, 3:] = np.maximum(bboxes[:, 3:], 1.0 / n)
    return grid_from_arrays(
        n, idx, labels, jtypes, axes, feats[:, CH_ORIGIN], ranges,
        bboxes=bboxes, provenance=provenance, validate=False,
    )


# --- AVOX1 binary format -------------------------------------------------

AVOX_MAGIC = b"AVOX"
AVOX_VERSION = 1
_AVOX_HEADER = struct.Struct("<4sIIQ")
AVOX_RECORD = np.dtype(
    [
        ("x", "<u2"), ("y", "<u2"), ("z", "<u2"),
        ("label", "u1"), ("joint_type", "u1"),
        ("axis", "<f4", (3,)), ("origin", "<f4", (3,)), ("range", "<f4", (2,)),
        ("pitch", "<f4"), ("bbox", "<f4", (6,)), ("part_id", "<i4"),
    ]
)


def avox_bytes(grid: ArticulatedVoxelGrid) -> bytes:
    recs = np.zeros(grid.active_count, dtype=AVOX_RECORD)
    recs["x"], recs["y"], recs["z"] = grid.indices.T
    recs["label"] = grid.labels
    recs["joint_type"] = grid.joint_types
    recs["axis"] = grid.axes
    recs["origin"] = grid.origins
    recs["range"] = grid.ranges
    recs["pitch"] = grid.pitches
    recs["bbox"] = grid.bboxes
    recs["part_id"] = grid.part_ids
    header = _AVOX_HEADER.pack(AVOX_MAGIC, AVOX_VERSION, grid.resolution, grid.active_count)
    return header + recs.tobytes()


def grid_from_avox_bytes(buf: bytes, provenance: str = "", validate: bool = True) -> ArticulatedVoxelGrid:
    if len(buf) < _AVOX_HEADER.size:
        raise FormatError("truncated AVOX header")
    magic, version, n, count = _AVOX_HEADER.unpack_from(buf)
    if magic != AVOX_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != AVOX_VERSION:
        raise FormatError(f"unsupported AVOX version {version}")
    expected = _AVOX_HEADER.size + count * AVOX_RECORD.itemsize
    if len(buf) != expected:
        raise FormatError(f"AVOX payload is {len(buf)} bytes, expected {expected}")
    recs = np.frombuffer(buf, dtype=AVOX_RECORD, count=count, offset=_AVOX_HEADER.size)
    f64 = lambda a: a.astype(np.float64)  # noqa: E731
    return grid_from_arrays(
        n,
        indices=np.column_stack([recs["x"], recs["y"], recs["z"]]).astype(np.int64),
        labels=recs["label"],
        joint_types=recs["joint_type"],
        axes=f64(recs["axis"]),
        origins=f64(recs["origin"]),
        ranges=f64(recs["range"]),
        pitches=f64(recs["pitch"]),
        bboxes=f64(recs["bbox"]),
        part_ids=recs["part_id"],
        provenance=provenance,
        validate=validate,
    )


def write_avox(grid: ArticulatedVoxelGrid, path) -> None:
    Path(path).write_bytes(avox_bytes(grid))


def read_avox(path, validate: bool = True) -> ArticulatedVoxelGrid:
    path = Path(path)
    return grid_from_avox_bytes(path.read_bytes(), provenance=str(path), validate=validate)
