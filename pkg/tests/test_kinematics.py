import math

import numpy as np
import pytest

from artikit.artgrid import JointSpec, JointType
from artikit.errors import OutOfRange, UnassignedPart
from artikit.kinematics import (
    ArticulationState,
    articulate_points,
    articulate_splats,
    covariance,
    joint_transform,
    rest_state,
    sample_states,
)
from artikit.splat.appearance import gt_splats


def revolute(origin=(0, 0, 0), axis=(0, 0, 1), rng=(-10.0, 10.0)):
    return JointSpec(JointType.REVOLUTE, axis, origin, rng)


def test_revolute_quarter_turn():
    np.testing.assert_allclose(joint_transform(revolute(), math.pi / 2).apply([[1, 0, 0]]), [[0, 1, 0]], atol=1e-12)


def test_prismatic_translation():
    j = JointSpec(JointType.PRISMATIC, (0, 1, 0), (0, 0, 0), (0, 1))
    p = np.array([[0.2, -0.1, 0.4]])
    np.testing.assert_allclose(joint_transform(j, 0.3).apply(p), p + [0, 0.3, 0], atol=1e-12)


def test_point_on_axis_is_fixed():
    np.testing.assert_allclose(joint_transform(revolute(origin=(1, 0, 0)), math.pi).apply([[1, 0, 0]]), [[1, 0, 0]],
                               atol=1e-12)


def test_screw_full_turn():
    j = JointSpec(JointType.SCREW, (0, 0, 1), (0, 0, 0), (0, 10), pitch=0.1)
    t = joint_transform(j, 2 * math.pi)
    np.testing.assert_allclose(t.rotation, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(t.translation, (0, 0, 0.2 * math.pi), atol=1e-12)


def test_out_of_range_needs_clamp():
    j = JointSpec(JointType.PRISMATIC, (0, 1, 0), (0, 0, 0), (0, 0.3))
    with pytest.raises(OutOfRange):
        joint_transform(j, 0.5)
    np.testing.assert_allclose(joint_transform(j, 0.5, clamp=True).translation, (0, 0.3, 0))


def test_fixed_joint_is_identity():
    assert joint_transform(JointSpec(), 0.0).is_identity()


def test_state_parse_format_round_trip():
    s = ArticulationState.parse("1:0.3,2:1.57")
    assert s.values == {1: 0.3, 2: 1.57}
    assert ArticulationState.parse(s.format()) == s


def test_unassigned_grid_rejected(cabinet_grid):
    loose = cabinet_grid.replace(part_ids=np.full(cabinet_grid.active_count, -1))
    with pytest.raises(UnassignedPart):
        articulate_points(loose, rest_state(loose))


def test_rest_state_is_exact(cabinet_grid):
    pc = articulate_points(cabinet_grid, rest_state(cabinet_grid))
    np.testing.assert_array_equal(pc.points, cabinet_grid.centers())


def test_rest_state_splats_are_byte_identical(cabinet_grid):
    splats = gt_splats(cabinet_grid)
    moved = articulate_splats(splats, rest_state(cabinet_grid), cabinet_grid)
    assert moved.means.tobytes() == splats.means.tobytes()
    assert moved.quats.tobytes() == splats.quats.tobytes()


def test_within_part_distances_preserved(cabinet_grid):
    for state in sample_states(cabinet_grid, 6, mode="random", seed=3):
        pc = articulate_points(cabinet_grid, state)
        for rows in cabinet_grid.part_rows().values():
            a, b = cabinet_grid.centers()[rows], pc.points[rows]
            da = np.linalg.norm(a[:, None] - a[None], axis=-1)
            db = np.linalg.norm(b[:, None] - b[None], axis=-1)
            np.testing.assert_allclose(da, db, atol=1e-9)


def test_covariance_follows_rotation(drawer_grid, rng):
    base = gt_splats(drawer_grid)
    q = rng.normal(size=(len(base), 4))
    splats = base.replace(quats=q / np.linalg.norm(q, axis=1, keepdims=True),
                          scales=rng.uniform(0.01, 0.05, size=(len(base), 3)))
    grid = drawer_grid.replace(joint_types=np.where(drawer_grid.joint_types == JointType.PRISMATIC,
                                                    JointType.REVOLUTE, drawer_grid.joint_types))
    state = sample_states(grid, 3)[1]
    moved = articulate_splats(splats, state, grid)
    from artikit.kinematics import part_transforms
    tf = part_transforms(grid, state)
    part = grid.part_ids[splats.voxel_index]
    before, after = covariance(splats.scales, splats.quats), covariance(moved.scales, moved.quats)
    for pid, t in tf.items():
        sel = part == pid
        expect = t.rotation @ before[sel] @ t.rotation.T
        np.testing.assert_allclose(after[sel], expect, atol=1e-12)


def test_uniform_states_hit_endpoints(drawer_grid):
    states = sample_states(drawer_grid, 2)
    joints = {p: j for p, j in drawer_grid.part_joints().items() if j.movable}
    for pid, j in joints.items():
        assert states[0].values[pid] == j.range[0]
        assert states[1].values[pid] == j.range[1]


def test_default_state_count_and_bounds(cabinet_grid):
    for s in sample_states(cabinet_grid, 1000, mode="random", seed=1):
        for pid, v in s.values.items():
            lo, hi = cabinet_grid.part_joints()[pid].sampling_range
            assert lo <= v <= hi
    assert len(sample_states(cabinet_grid, 8)) == 8
