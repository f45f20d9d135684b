"""Procedural articulated furniture with exact ground-truth joints.

Frame convention: z is up, +y is the front direction, the object stands on
z = 0. Drawers slide along +y; doors swing outward about a vertical hinge;
handles sit on their parent's front face and copy its joint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..artgrid import JointSpec, JointType, PartLabel
from .objects import ArticulatedObject, Part, PartGeometry, canonicalize, validate_object
from .voxelize import voxelize

CATEGORIES = ("cabinet", "table", "dishwasher", "microwave")

GAP = 0.035
SHELL = 0.04
FRONT = (0.0, 1.0, 0.0)
UP = (0.0, 0.0, 1.0)
FIXED = JointSpec()


@dataclass(frozen=True)
class ProceduralSpec:
    category: str = "cabinet"
    n_drawers: int = 1
    n_doors: int = 0
    handle_per_part: bool = True
    jitter: float = 0.1

    def validate(self) -> None:
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if self.n_drawers < 0 or self.n_doors < 0:
            raise ValueError("part counts must be non-negative")
        if self.n_drawers + self.n_doors < 1:
            raise ValueError("need at least one drawer or door")
        if not 0.0 <= self.jitter < 0.5:
            raise ValueError("jitter must lie in [0, 0.5)")
        if self.category == "table" and self.n_doors:
            raise ValueError("tables only carry drawers")
        if self.category == "microwave" and self.n_drawers:
            raise ValueError("microwaves only carry doors")
        if self.category == "cabinet" and (self.n_drawers > 4 or self.n_doors > 3):
            raise ValueError("cabinets hold at most 4 drawers and 3 doors")
        if self.category == "table" and self.n_drawers > 3:
            raise ValueError("tables hold at most 3 drawers")
        if self.category in ("dishwasher", "microwave") and self.n_doors > 1:
            raise ValueError(f"{self.category} has a single door")
        if self.category == "dishwasher" and self.n_drawers > 2:
            raise ValueError("dishwashers hold at most 2 trays")


def _box(lo, hi):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    return np.concatenate([(lo + hi) / 2, hi - lo])


class _Builder:
    def __init__(self, rng, jitter):
        self.rng = rng
        self.jitter = jitter
        self.base_boxes = []
        self.parts = []  # (label, boxes, joint)

    def j(self):
        return 1.0 + self.rng.uniform(-self.jitter, self.jitter)

    def add(self, label, boxes, joint):
        self.parts.append((label, np.array(boxes).reshape(-1, 6), joint))

    def shell(self, w, d, h):
        t = SHELL
        self.base_boxes += [
            _box((-w / 2, -d / 2, 0), (w / 2, d / 2, t)),
            _box((-w / 2, -d / 2, h - t), (w / 2, d / 2, h)),
            _box((-w / 2, -d / 2, t), (-w / 2 + t, d / 2, h - t)),
            _box((w / 2 - t, -d / 2, t), (w / 2, d / 2, h - t)),
            _box((-w / 2 + t, -d / 2, t), (w / 2 - t, -d / 2 + t, h - t)),
        ]

    def drawer(self, x0, x1, z0, z1, y_front, depth, handle, label=PartLabel.DRAWER):
        box = _box((x0 + GAP, y_front - depth, z0 + GAP), (x1 - GAP, y_front, z1 - GAP))
        travel = 0.75 * depth * (1.0 + self.rng.uniform(0.0, self.jitter))
        joint = JointSpec(JointType.PRISMATIC, FRONT, (box[0], y_front, box[2]), (0.0, travel))
        self.add(label, [box], joint)
        if handle:
            hw = max(0.3 * (x1 - x0), 0.08)
            self.add(PartLabel.HANDLE, [_box((box[0] - hw / 2, y_front, box[2] - 0.025),
                                             (box[0] + hw / 2, y_front + 0.04, box[2] + 0.025))], joint)

    def door(self, x0, x1, z0, z1, y_front, hinge_left, handle):
        x0, x1, z0, z1 = x0 + GAP, x1 - GAP, z0 + GAP, z1 - GAP
        panel = _box((x0, y_front - 0.03, z0), (x1, y_front, z1))
        zc = (z0 + z1) / 2
        limit = math.pi / 2 * (1.0 + self.rng.uniform(0.0, self.jitter))
        if hinge_left:
            joint = JointSpec(JointType.REVOLUTE, UP, (x0, y_front, zc), (0.0, limit))
            hx = x1 - 0.06
        else:
            joint = JointSpec(JointType.REVOLUTE, (0.0, 0.0, -1.0), (x1, y_front, zc), (0.0, limit))
            hx = x0 + 0.06
        self.add(PartLabel.DOOR, [panel], joint)
        if handle:
            self.add(PartLabel.HANDLE, [_box((hx - 0.025, y_front, zc - 0.06),
                                             (hx + 0.025, y_front + 0.04, zc + 0.06))], joint)

    def build(self, name, category):
        parts = [Part(0, PartGeometry(PartLabel.BASE, np.array(self.base_boxes)), FIXED)]
        for label, boxes, joint in self.parts:
            parts.append(Part(len(parts), PartGeometry(label, boxes), joint))
        return ArticulatedObject(name, tuple(parts), category)


def _cabinet(b: _Builder, spec: ProceduralSpec):
    w, d, h = 0.8 * b.j(), 0.5 * b.j(), 1.0 * b.j()
    b.shell(w, d, h)
    xa, xb, za, zb = -w / 2 + SHELL, w / 2 - SHELL, SHELL, h - SHELL
    weights = [1.0] * spec.n_drawers + ([2.0] if spec.n_doors else [])
    edges = zb - (zb - za) * np.concatenate([[0.0], np.cumsum(weights)]) / sum(weights)
    depth = 0.9 * (d - SHELL)
    for i in range(spec.n_drawers):
        b.drawer(xa, xb, edges[i + 1], edges[i], d / 2, depth, spec.handle_per_part)
    if spec.n_doors:
        z1, z0 = edges[spec.n_drawers], edges[spec.n_drawers + 1]
        cols = np.linspace(xa, xb, spec.n_doors + 1)
        for c in range(spec.n_doors):
            b.door(cols[c], cols[c + 1], z0, z1, d / 2, c % 2 == 0, spec.handle_per_part)


def _table(b: _Builder, spec: ProceduralSpec):
    w, d, h = 1.0 * b.j(), 0.6 * b.j(), 0.7 * b.j()
    t, leg = SHELL, 0.05
    b.base_boxes.append(_box((-w / 2, -d / 2, h - t), (w / 2, d / 2, h)))
    for sx in (-1, 1):
        for sy in (-1, 1):
            cx, cy = sx * (w / 2 - leg / 2), sy * (d / 2 - leg / 2)
            b.base_boxes.append(_box((cx - leg / 2, cy - leg / 2, 0), (cx + leg / 2, cy + leg / 2, h - t)))
    cols = np.linspace(-w / 2 + leg, w / 2 - leg, spec.n_drawers + 1)
    dh = 0.12 * b.j()
    for c in range(spec.n_drawers):
        b.drawer(cols[c], cols[c + 1], h - t - dh, h - t, d / 2 - leg / 2, 0.8 * d, spec.handle_per_part)


def _dishwasher(b: _Builder, spec: ProceduralSpec):
    w, d, h = 0.6 * b.j(), 0.6 * b.j(), 0.85 * b.j()
    b.shell(w, d, h)
    xa, xb, za, zb = -w / 2 + SHELL, w / 2 - SHELL, SHELL, h - SHELL
    if spec.n_doors:
        b.door(xa, xb, za, zb, d / 2, True, spec.handle_per_part)
    inner_front = d / 2 - 0.03 - GAP
    depth = 0.85 * (d - SHELL - 0.03)
    rows = np.linspace(zb, za, spec.n_drawers + 1)
    for i in range(spec.n_drawers):
        z1 = rows[i]
        z0 = max(rows[i + 1], z1 - 0.12)
        b.drawer(xa, xb, z0, z1, inner_front, depth, False, label=PartLabel.TRAY)


def _microwave(b: _Builder, spec: ProceduralSpec):
    w, d, h = 0.5 * b.j(), 0.35 * b.j(), 0.3 * b.j()
    b.shell(w, d, h)
    xa, xb, za, zb = -w / 2 + SHELL, w / 2 - SHELL, SHELL, h - SHELL
    split = xa + 0.7 * (xb - xa)
    b.base_boxes.append(_box((split, d / 2 - 0.03, za), (xb, d / 2, zb)))
    b.door(xa, split, za, zb, d / 2, True, spec.handle_per_part)
    n_knobs = int(b.rng.integers(1, 3))
    kx = (split + xb) / 2
    for k in range(n_knobs):
        kz = zb - (k + 1) * (zb - za) / (n_knobs + 1)
        joint = JointSpec(JointType.CONTINUOUS, FRONT, (kx, d / 2, kz), (-math.pi, math.pi))
        b.add(PartLabel.KNOB, [_box((kx - 0.025, d / 2, kz - 0.025), (kx + 0.025, d / 2 + 0.03, kz + 0.025))], joint)


_BUILDERS = {"cabinet": _cabinet, "table": _table, "dishwasher": _dishwasher, "microwave": _microwave}


def gen_procedural(seed: int, spec: ProceduralSpec) -> ArticulatedObject:
    """Deterministic object for ``(seed, spec)``; geometry is in the rest pose."""
    spec.validate()
    b = _Builder(np.random.default_rng(seed), spec.jitter)
    _BUILDERS[spec.category](b, spec)
    obj = b.build(f"{spec.category}_{seed}", spec.category)
    validate_object(obj)
    return obj


def sample_spec(rng: np.random.Generator, categories=CATEGORIES) -> ProceduralSpec:
    category = categories[int(rng.integers(len(categories)))]
    if category == "cabinet":
        drawers = int(rng.integers(0, 4))
        doors = int(rng.integers(0 if drawers else 1, 3))
    elif category == "table":
        drawers, doors = int(rng.integers(1, 4)), 0
    elif category == "dishwasher":
        drawers, doors = int(rng.integers(0, 3)), 1
    else:
        drawers, doors = 0, 1
    return ProceduralSpec(category, drawers, doors, bool(rng.random() < 0.8))


def procedural_dataset(seed: int, count: int, resolution: int, categories=CATEGORIES):
    """``count`` canonical (object, grid) pairs drawn from one seed."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        spec = sample_spec(rng, categories)
        obj = canonicalize(gen_procedural(int(rng.integers(2**31)), spec))
        out.append((obj, voxelize(obj, resolution)))
    return out
