"""Articulated object descriptions: data model, JSON I/O and canonicalization.

Part geometry is authored in the rest pose, i.e. with every joint at the
lower end of its range.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..artgrid import JointSpec, JointType, PartLabel
from ..errors import BadJoint, DegenerateExtent, ParseError, UnknownLabel, ValidationError

AXIS_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class PartGeometry:
    label: PartLabel
    boxes: np.ndarray = field(default_factory=lambda: np.zeros((0, 6)))  # (K, 6) center, size
    triangles: np.ndarray = field(default_factory=lambda: np.zeros((0, 3, 3)))

    def __post_init__(self):
        object.__setattr__(self, "label", PartLabel(self.label))
        object.__setattr__(self, "boxes", np.asarray(self.boxes, dtype=np.float64).reshape(-1, 6))
        object.__setattr__(self, "triangles", np.asarray(self.triangles, dtype=np.float64).reshape(-1, 3, 3))

    def __eq__(self, other):
        return (
            isinstance(other, PartGeometry)
            and self.label == other.label
            and np.array_equal(self.boxes, other.boxes)
            and np.array_equal(self.triangles, other.triangles)
        )

    def points(self) -> np.ndarray:
        """Every box corner and triangle vertex."""
        corners = []
        if len(self.boxes):
            signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]) * 0.5
            corners.append((self.boxes[:, None, :3] + signs[None] * self.boxes[:, None, 3:]).reshape(-1, 3))
        if len(self.triangles):
            corners.append(self.triangles.reshape(-1, 3))
        return np.concatenate(corners) if corners else np.zeros((0, 3))

    def volume(self) -> float:
        from .geometry import triangle_mesh_volume

        vol = float(np.prod(self.boxes[:, 3:], axis=1).sum()) + triangle_mesh_volume(self.triangles)
        if vol == 0.0 and len(self.triangles):
            pts = self.points()
            ext = pts.max(axis=0) - pts.min(axis=0)
            vol = float(np.prod(ext))
        return vol


@dataclass(frozen=True)
class Part:
    part_id: int
    geometry: PartGeometry
    joint: JointSpec

    @property
    def label(self) -> PartLabel:
        return self.geometry.label


@dataclass(frozen=True)
class ArticulatedObject:
    name: str
    parts: tuple
    category: str = ""

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    def part(self, part_id: int) -> Part:
        return self.parts[part_id]

    def points(self) -> np.ndarray:
        return np.concatenate([p.geometry.points() for p in self.parts])

    def bounds(self):
        pts = self.points()
        return pts.min(axis=0), pts.max(axis=0)


def validate_object(obj: ArticulatedObject) -> None:
    if not obj.parts:
        raise ValidationError("object has no parts")
    ids = [p.part_id for p in obj.parts]
    if ids != list(range(len(ids))):
        raise ValidationError(f"part ids must be contiguous from 0 in order, got {ids}")
    roots = [p for p in obj.parts if p.label == PartLabel.BASE and p.joint.joint_type == JointType.FIXED]
    if len(roots) != 1:
        raise ValidationError(f"expected exactly one fixed base part, found {len(roots)}")
    for p in obj.parts:
        g = p.geometry
        if len(g.boxes) == 0 and len(g.triangles) == 0:
            raise ValidationError(f"part {p.part_id} has no geometry")
        if not (np.isfinite(g.boxes).all() and np.isfinite(g.triangles).all()):
            raise ValidationError(f"part {p.part_id} has non-finite coordinates")
        if (g.boxes[:, 3:] <= 0).any():
            raise ValidationError(f"part {p.part_id} has a box with non-positive size")
        _check_joint(p.joint, p.part_id)


def _check_joint(joint: JointSpec, part_id) -> None:
    lo, hi = joint.range
    if lo > hi:
        raise BadJoint(f"part {part_id}: joint range lo > hi ({lo} > {hi})")
    if joint.joint_type == JointType.FIXED:
        if (lo, hi) != (0.0, 0.0):
            raise BadJoint(f"part {part_id}: fixed joint must have range [0, 0]")
        return
    norm = math.sqrt(sum(a * a for a in joint.axis))
    if abs(norm - 1.0) > AXIS_TOL:
        raise BadJoint(f"part {part_id}: joint axis must be unit length, |a| = {norm:.9g}")
    if not all(math.isfinite(v) for v in (*joint.axis, *joint.origin, lo, hi, joint.pitch)):
        raise BadJoint(f"part {part_id}: non-finite joint parameter")


# --- JSON description format ----------------------------------------------

def _vec(value, n, what, part_id):
    try:
        out = [float(v) for v in value]
    except (TypeError, ValueError) as exc:
        raise ParseError(f"part {part_id}: {what} must be a list of {n} numbers") from exc
    if len(out) != n:
        raise ParseError(f"part {part_id}: {what} must have {n} components, got {len(out)}")
    return out


def parse_object(text: str) -> ArticulatedObject:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    if not isinstance(doc, dict) or "parts" not in doc:
        raise ParseError("document must be an object with a 'parts' list")
    parts = []
    for entry in doc["parts"]:
        try:
            pid = int(entry["id"])
            label_name = entry["label"]
            jdoc = entry.get("joint", {"type": "fixed"})
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed part entry: {exc}") from exc
        try:
            label = PartLabel.parse(label_name)
        except KeyError:
            raise UnknownLabel(f"part {pid}: unknown label {label_name!r}") from None
        try:
            jtype = JointType.parse(jdoc.get("type", "fixed"))
        except KeyError:
            raise BadJoint(f"part {pid}: unknown joint type {jdoc.get('type')!r}") from None
        boxes = [_vec(b, 6, "box", pid) for b in entry.get("boxes", [])]
        tris = [[_vec(v, 3, "vertex", pid) for v in t] for t in entry.get("triangles", [])]
        if any(len(t) != 3 for t in tris):
            raise ParseError(f"part {pid}: triangles need exactly 3 vertices")
        joint = JointSpec(
            jtype,
            _vec(jdoc.get("axis", [0, 0, 0]), 3, "axis", pid),
            _vec(jdoc.get("origin", [0, 0, 0]), 3, "origin", pid),
            _vec(jdoc.get("range", [0, 0]), 2, "range", pid),
            float(jdoc.get("pitch", 0.0)),
        )
        _check_joint(joint, pid)
        geom = PartGeometry(label, np.array(boxes).reshape(-1, 6), np.array(tris).reshape(-1, 3, 3))
        parts.append(Part(pid, geom, joint))
    parts.sort(key=lambda p: p.part_id)
    obj = ArticulatedObject(str(doc.get("name", "")), tuple(parts), str(doc.get("category", "")))
    validate_object(obj)
    return obj


def object_to_dict(obj: ArticulatedObject) -> dict:
    doc = {"name": obj.name}
    if obj.category:
        doc["category"] = obj.category
    doc["parts"] = []
    for p in obj.parts:
        j = p.joint
        entry = {"id": p.part_id, "label": p.label.name.lower()}
        if len(p.geometry.boxes):
            entry["boxes"] = p.geometry.boxes.tolist()
        if len(p.geometry.triangles):
            entry["triangles"] = p.geometry.triangles.tolist()
        entry["joint"] = {
            "type": j.joint_type.name.lower(),
            "axis": list(j.axis),
            "origin": list(j.origin),
            "range": list(j.range),
            "pitch": j.pitch,
        }
        doc["parts"].append(entry)
    return doc


def write_object(obj: ArticulatedObject) -> str:
    return json.dumps(object_to_dict(obj), indent=1) + "\n"


def load_object(path) -> ArticulatedObject:
    with open(path, encoding="utf-8") as fh:
        return parse_object(fh.read())


def save_object(obj: ArticulatedObject, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_object(obj))


# --- canonicalization -----------------------------------------------------

def _scale_joint(joint: JointSpec, center, s) -> JointSpec:
    lo, hi = joint.range
    if joint.joint_type == JointType.PRISMATIC:
        lo, hi = lo * s, hi * s
    origin = tuple((np.asarray(joint.origin) - center) * s) if joint.movable else joint.origin
    return replace(joint, origin=origin, range=(lo, hi), pitch=joint.pitch * s)


def canonicalize(obj: ArticulatedObject) -> ArticulatedObject:
    """Center the rest-pose bounding box at the origin and scale its longest edge to 1."""
    lo, hi = obj.bounds()
    extent = hi - lo
    longest = float(extent.max())
    if not math.isfinite(longest) or longest <= 0.0:
        raise DegenerateExtent(f"object {obj.name!r} has zero extent")
    center = (lo + hi) / 2.0
    s = 1.0 / longest
    parts = []
    for p in obj.parts:
        g = p.geometry
        boxes = g.boxes.copy()
        boxes[:, :3] = (boxes[:, :3] - center) * s
        boxes[:, 3:] *= s
        tris = (g.triangles - center) * s
        parts.append(Part(p.part_id, PartGeometry(g.label, boxes, tris), _scale_joint(p.joint, center, s)))
    return ArticulatedObject(obj.name, tuple(parts), obj.category)
