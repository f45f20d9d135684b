import json
import math

import numpy as np
import pytest

from artikit.artgrid import JointType, PartLabel
from artikit.errors import BadJoint, DegenerateExtent, EmptyResult, ParseError, UnknownLabel
from artikit.ingest import (
    CATEGORIES,
    ProceduralSpec,
    canonicalize,
    contact_fraction,
    gen_procedural,
    parse_object,
    validate_object,
    voxelize,
    write_object,
)
from artikit.ingest.geometry import triangle_box_overlap


def doc(axis=(0, 0, 1), label="drawer", rng=(0.0, 0.3)):
    return json.dumps({
        "name": "toy",
        "parts": [
            {"id": 0, "label": "base", "boxes": [[0, 0, 0, 2, 2, 2]], "joint": {"type": "fixed"}},
            {"id": 1, "label": label, "boxes": [[0, 0, 1.2, 1, 1, 0.4]],
             "joint": {"type": "prismatic", "axis": list(axis), "origin": [0, 0, 0], "range": list(rng)}},
        ],
    })


def test_parse_minimal_document():
    obj = parse_object(doc())
    assert len(obj.parts) == 2
    assert obj.part(1).joint.joint_type == JointType.PRISMATIC


def test_non_unit_axis_rejected():
    with pytest.raises(BadJoint):
        parse_object(doc(axis=(0, 0, 2)))


def test_inverted_range_rejected():
    with pytest.raises(BadJoint):
        parse_object(doc(rng=(0.3, 0.0)))


def test_unknown_label_rejected():
    with pytest.raises(UnknownLabel):
        parse_object(doc(label="lid"))


def test_malformed_json():
    with pytest.raises(ParseError):
        parse_object('{"name": "x",\n "parts": [')


def test_write_parse_round_trip():
    for seed in range(50):
        spec = ProceduralSpec(CATEGORIES[seed % len(CATEGORIES)], 1 if seed % 4 != 3 else 0, 1)
        spec = spec if spec.category not in ("table", "microwave") else ProceduralSpec(
            spec.category, 1 if spec.category == "table" else 0, 0 if spec.category == "table" else 1)
        obj = gen_procedural(seed, spec)
        assert parse_object(write_object(obj)) == obj


def test_canonicalize_scales_uniformly():
    obj = parse_object(json.dumps({
        "name": "box",
        "parts": [
            {"id": 0, "label": "base", "boxes": [[1, 1, 1, 2, 2, 2]], "joint": {"type": "fixed"}},
            {"id": 1, "label": "drawer", "boxes": [[1, 1, 1, 0.5, 0.5, 0.5]],
             "joint": {"type": "prismatic", "axis": [0, 1, 0], "origin": [0, 0, 0], "range": [0, 0.6]}},
            {"id": 2, "label": "door", "boxes": [[1, 1, 1, 0.5, 0.5, 0.5]],
             "joint": {"type": "revolute", "axis": [0, 0, 1], "origin": [0, 0, 0], "range": [0, math.pi / 2]}},
        ],
    }))
    canon = canonicalize(obj)
    lo, hi = canon.bounds()
    np.testing.assert_allclose(lo, -0.5, atol=1e-12)
    np.testing.assert_allclose(hi, 0.5, atol=1e-12)
    np.testing.assert_allclose(canon.part(1).joint.range, (0, 0.3))
    np.testing.assert_allclose(canon.part(2).joint.range, (0, math.pi / 2))
    np.testing.assert_allclose(canon.part(2).joint.origin, (-0.5, -0.5, -0.5))


def test_canonicalize_is_idempotent(cabinet):
    again = canonicalize(cabinet)
    for a, b in zip(cabinet.parts, again.parts):
        np.testing.assert_allclose(a.geometry.boxes, b.geometry.boxes, atol=1e-9)
        np.testing.assert_allclose(a.joint.origin, b.joint.origin, atol=1e-9)


def test_degenerate_extent():
    point = parse_object(json.dumps({"name": "point", "parts": [
        {"id": 0, "label": "base", "triangles": [[[1, 1, 1], [1, 1, 1], [1, 1, 1]]], "joint": {"type": "fixed"}}]}))
    with pytest.raises(DegenerateExtent):
        canonicalize(point)


def test_solid_cube_fills_grid():
    obj = parse_object(json.dumps({"name": "cube", "parts": [
        {"id": 0, "label": "base", "boxes": [[0, 0, 0, 1, 1, 1]], "joint": {"type": "fixed"}}]}))
    assert voxelize(obj, 8).active_count == 512


def test_single_triangle_matches_brute_force():
    tri = np.array([[0.01, 0.02, 0.0], [0.05, 0.01, 0.0], [0.03, 0.06, 0.0]])
    obj = parse_object(json.dumps({"name": "tri", "parts": [
        {"id": 0, "label": "base", "triangles": [tri.tolist()], "joint": {"type": "fixed"}}]}))
    n = 8
    grid = voxelize(obj, n)
    idx = np.stack(np.meshgrid(*[np.arange(n)] * 3, indexing="ij"), -1).reshape(-1, 3)
    centers = (idx + 0.5) / n - 0.5
    hit = triangle_box_overlap(centers, 0.5 / n, tri)
    assert {tuple(i) for i in idx[hit]} == {tuple(i) for i in grid.indices}
    assert grid.active_count == 2  # the triangle lies on the z = 0 face shared by two layers


def test_empty_voxelization():
    obj = parse_object(json.dumps({"name": "far", "parts": [
        {"id": 0, "label": "base", "boxes": [[5, 5, 5, 0.1, 0.1, 0.1]], "joint": {"type": "fixed"}}]}))
    with pytest.raises(EmptyResult):
        voxelize(obj, 8)


def test_drawer_joints_point_out_of_the_front():
    obj = gen_procedural(1, ProceduralSpec("cabinet", 2, 0))
    drawers = [p for p in obj.parts if p.label == PartLabel.DRAWER]
    assert len(obj.parts) >= 3 and len(drawers) == 2
    for p in drawers:
        assert p.joint.joint_type == JointType.PRISMATIC
        np.testing.assert_allclose(p.joint.axis, (0, 1, 0))


def test_generator_is_deterministic():
    spec = ProceduralSpec("dishwasher", 1, 1)
    assert write_object(gen_procedural(5, spec)) == write_object(gen_procedural(5, spec))


def test_generated_objects_are_valid():
    rng = np.random.default_rng(0)
    from artikit.ingest import sample_spec
    for i in range(200):
        obj = gen_procedural(i, sample_spec(rng))
        validate_object(obj)
        for p in obj.parts:
            if p.joint.joint_type == JointType.REVOLUTE:
                assert 0 <= p.joint.range[0] <= p.joint.range[1] <= math.pi / 2 * 1.5


def test_parts_partition_voxels(cabinet_grid):
    assert len(np.unique(cabinet_grid.indices, axis=0)) == cabinet_grid.active_count
    assert set(np.unique(cabinet_grid.part_ids)) == set(range(len(cabinet_grid.part_rows())))


def test_contact_voxels_are_rare():
    from artikit.ingest import sample_spec
    rng = np.random.default_rng(0)
    fractions = [contact_fraction(canonicalize(gen_procedural(i, sample_spec(rng))), 32) for i in range(30)]
    assert max(fractions) < 0.02
