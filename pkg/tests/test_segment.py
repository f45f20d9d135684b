import numpy as np

from artikit.artgrid import JointType, PartLabel, from_channels, grid_from_arrays, to_channels
from artikit.eval import intra_part_std
from artikit.segment import aggregate_params, dbscan, dbscan_reference, segment_and_aggregate, segment_parts


def test_two_separated_groups():
    pts = np.concatenate([np.zeros((10, 2)), np.ones((10, 2))])
    labels, noise = dbscan(pts, 0.1, 3)
    assert len(set(labels)) == 2 and len(noise) == 0


def test_isolated_point_is_noise():
    labels, noise = dbscan(np.array([[0.0, 0.0]]), 0.5, 2)
    assert labels[0] < 0 and list(noise) == [0]


def test_matches_reference_on_random_points(rng):
    for _ in range(10):
        pts = rng.uniform(size=(200, 3))
        labels, _ = dbscan(pts, 0.12, 4)
        np.testing.assert_array_equal(labels, dbscan_reference(pts, 0.12, 4))


def test_segment_recovers_drawers(cabinet_grid):
    decoded = from_channels(to_channels(cabinet_grid))
    assignment = segment_parts(decoded)
    drawer_parts = {assignment.part_of[i] for i in np.flatnonzero(decoded.labels == PartLabel.DRAWER)}
    assert len(drawer_parts) == 2
    assert assignment.n_parts == len(cabinet_grid.part_rows())


def test_identical_bboxes_form_one_part(cabinet_grid):
    g = cabinet_grid.replace(labels=np.zeros(cabinet_grid.active_count, int),
                             bboxes=np.tile(cabinet_grid.bboxes[0], (cabinet_grid.active_count, 1)))
    assert segment_parts(g).n_parts == 1


def test_aggregation_is_a_fixed_point(cabinet_grid):
    decoded = from_channels(to_channels(cabinet_grid))
    out = segment_and_aggregate(decoded)
    assert out.same_as(cabinet_grid, part_ids=False, pitch=False, atol=1e-6)
    again = aggregate_params(out, segment_parts(out))
    assert again.same_as(out)
    assert all(np.all(v == 0) for v in intra_part_std(out).values())


def test_axis_sign_alignment():
    g = grid_from_arrays(
        8, [[0, 0, 0], [0, 0, 1]], [1, 1], [JointType.REVOLUTE] * 2, [[0, 0, 1], [0, 0, -1]],
        np.zeros((2, 3)), [[0, 1], [0, 1]], bboxes=np.tile([0, 0, 0, 0.2, 0.2, 0.2], (2, 1)), validate=False,
    )
    out = aggregate_params(g, segment_parts(g, min_pts=1))
    np.testing.assert_allclose(out.axes, [[0, 0, 1], [0, 0, 1]])


def test_noisy_axes_aggregate_close_to_truth(cabinet_grid, rng):
    noisy = from_channels(to_channels(cabinet_grid))
    axes = noisy.axes + rng.normal(0, 0.01, noisy.axes.shape)
    axes[noisy.joint_types == JointType.FIXED] = noisy.axes[noisy.joint_types == JointType.FIXED]
    out = aggregate_params(noisy.replace(axes=axes), segment_parts(noisy))
    for rows in cabinet_grid.part_rows().values():
        if cabinet_grid.joint_types[rows[0]] == JointType.FIXED:
            continue
        cos = abs(float(out.axes[rows[0]] @ cabinet_grid.axes[rows[0]]))
        assert np.degrees(np.arccos(min(1.0, cos))) < 2.0
