"""Geometry and articulation-parameter metrics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree

from .artgrid import ArticulatedVoxelGrid, JointType
from .errors import EmptySet, NoMatch, ShapeMismatch
from .kinematics import ArticulationState, articulate_points, sample_states

N_EVAL_STATES = 5
ROTATIONAL = (JointType.REVOLUTE, JointType.CONTINUOUS, JointType.SCREW)


def _points(x) -> np.ndarray:
    p = np.asarray(x, dtype=np.float64).reshape(-1, 3) if np.size(x) else np.zeros((0, 3))
    if len(p) == 0:
        raise EmptySet("chamfer distance needs two non-empty point sets")
    return p


def _nearest_sq(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared distance from each row of ``a`` to its nearest row of ``b``.

    The tree proposes candidates; distances are then recomputed with the
    same expression as the brute-force form so both agree to the last bit.
    """
    tree = cKDTree(b)
    k = min(4, len(b))
    dist, idx = tree.query(a, k=k)
    dist, idx = dist.reshape(len(a), k), idx.reshape(len(a), k)
    sq = ((a[:, None, :] - b[idx]) ** 2).sum(-1)
    best = sq.min(axis=1)
    # with k candidates all near-tied, more equidistant points may exist
    unsure = np.flatnonzero((k < len(b)) & (dist[:, -1] <= dist[:, 0] * (1 + 1e-9) + 1e-12))
    for i in unsure:
        cand = tree.query_ball_point(a[i], dist[i, 0] * (1 + 1e-9) + 1e-12)
        best[i] = ((a[i] - b[cand]) ** 2).sum(-1).min()
    return best


def chamfer(a, b) -> float:
    """Symmetric mean of squared nearest-neighbour distances."""
    a, b = _points(a), _points(b)
    return float(_nearest_sq(a, b).mean() + _nearest_sq(b, a).mean())


def chamfer_brute(a, b) -> float:
    a, b = _points(a), _points(b)
    d = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
    return float(d.min(axis=1).mean() + d.min(axis=0).mean())


def _states(grid: ArticulatedVoxelGrid, states) -> list:
    if isinstance(states, (int, np.integer)):
        return sample_states(grid, int(states))
    return list(states)


def eval_states(pred: ArticulatedVoxelGrid, gt: ArticulatedVoxelGrid, states=N_EVAL_STATES) -> tuple:
    """(rs_cd, as_cd) over voxel centers.

    An integer ``states`` places each grid at the same fractions of its own
    joint ranges; an explicit list of states is applied to both grids.
    """
    rs = chamfer(pred.centers(), gt.centers())
    ps, gs = _states(pred, states), _states(gt, states)
    if len(ps) != len(gs):
        raise ShapeMismatch("pred and gt need the same number of states")
    cds = [chamfer(articulate_points(pred, p).points, articulate_points(gt, g).points) for p, g in zip(ps, gs)]
    return rs, float(np.mean(cds)) if cds else rs


@dataclass(frozen=True)
class EvalReport:
    rs_cd: float = 0.0
    as_cd: float = 0.0
    occupancy_recall: float = 1.0
    part_type_acc: float = 1.0
    joint_type_acc: float = 1.0
    axis_err_deg: float = 0.0
    origin_err: float = 0.0
    range_angle_err_deg: float = 0.0
    range_trans_err: float = 0.0
    bbox_center_err: float = 0.0
    bbox_size_err: float = 0.0
    matched_parts: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def axis_error_deg(a, b) -> float:
    """Angle between two lines; sign of either axis is ignored."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    c = abs(float(a @ b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return math.degrees(math.acos(min(1.0, c)))


def _row_lookup(grid: ArticulatedVoxelGrid) -> dict:
    return {tuple(ix): i for i, ix in enumerate(grid.indices.tolist())}


def overlap_rows(pred: ArticulatedVoxelGrid, gt: ArticulatedVoxelGrid) -> tuple:
    """Row pairs (pred rows, gt rows) of voxels active in both grids."""
    if pred.resolution != gt.resolution:
        raise ShapeMismatch(f"resolutions differ: {pred.resolution} vs {gt.resolution}")
    lookup = _row_lookup(pred)
    pairs = [(lookup[ix], j) for j, ix in enumerate(map(tuple, gt.indices.tolist())) if ix in lookup]
    if not pairs:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    p, g = np.array(pairs).T
    return p, g


def match_parts(pred: ArticulatedVoxelGrid, gt: ArticulatedVoxelGrid) -> dict:
    """gt part -> pred part, greedily by bbox-center distance within the same label."""
    prows, grows = pred.part_rows(), gt.part_rows()
    cands = []
    for g, gr in grows.items():
        for p, pr in prows.items():
            if pred.labels[pr[0]] == gt.labels[gr[0]]:
                d = float(np.linalg.norm(pred.bboxes[pr[0], :3] - gt.bboxes[gr[0], :3]))
                cands.append((d, g, p))
    out, used = {}, set()
    for d, g, p in sorted(cands):
        if g not in out and p not in used:
            out[g] = p
            used.add(p)
    missing = sorted(set(grows) - set(out))
    if missing:
        raise NoMatch(f"ground-truth parts without a prediction of the same label: {missing}")
    return out


def _mean(xs) -> float:
    return float(np.mean(xs)) if len(xs) else 0.0


def param_report(pred: ArticulatedVoxelGrid, gt: ArticulatedVoxelGrid, matching: dict | None = None,
                 states=N_EVAL_STATES) -> EvalReport:
    """Per-part parameter errors plus voxel-level recall and type accuracies."""
    pr, gr = overlap_rows(pred, gt)
    n_gt = gt.active_count
    recall = len(gr) / n_gt if n_gt else 1.0
    part_acc = float((pred.labels[pr] == gt.labels[gr]).mean()) if len(gr) else 0.0
    joint_acc = float((pred.joint_types[pr] == gt.joint_types[gr]).mean()) if len(gr) else 0.0
    matching = match_parts(pred, gt) if matching is None else matching
    prows, grows = pred.part_rows(), gt.part_rows()
    axis, origin, rang, rtrans, bc, bs = [], [], [], [], [], []
    for g, p in sorted(matching.items()):
        i, j = prows[p][0], grows[g][0]
        bc.append(np.linalg.norm(pred.bboxes[i, :3] - gt.bboxes[j, :3]))
        bs.append(np.linalg.norm(pred.bboxes[i, 3:] - gt.bboxes[j, 3:]))
        jt = JointType(int(gt.joint_types[j]))
        if jt == JointType.FIXED:
            continue
        if np.linalg.norm(pred.axes[i]) > 0:
            axis.append(axis_error_deg(pred.axes[i], gt.axes[j]))
        else:
            axis.append(90.0)
        dr = np.abs(pred.ranges[i] - gt.ranges[j]).mean()
        if jt in ROTATIONAL:
            origin.append(np.linalg.norm(pred.origins[i] - gt.origins[j]))
            rang.append(math.degrees(dr))
        else:
            rtrans.append(dr)
    rs, as_ = eval_states(pred, gt, states)
    return EvalReport(
        rs, as_, recall, part_acc, joint_acc, _mean(axis), _mean(origin), _mean(rang), _mean(rtrans),
        _mean(bc), _mean(bs), len(matching),
    )


ATTRIBUTES = {"axis": "axes", "origin": "origins", "range": "ranges", "pitch": "pitches", "bbox": "bboxes"}


def intra_part_std(grid: ArticulatedVoxelGrid, part_of=None) -> dict:
    """Population std of each attribute component within a part, averaged over parts.

    ``part_of`` overrides the grid's own part ids (e.g. a raw assignment
    before aggregation).
    """
    part_of = grid.part_ids if part_of is None else np.asarray(part_of)
    parts = [np.flatnonzero(part_of == p) for p in np.unique(part_of) if p >= 0]
    out = {}
    for name, attr in ATTRIBUTES.items():
        vals = np.asarray(getattr(grid, attr), dtype=np.float64).reshape(grid.active_count, -1)
        if not parts:
            out[name] = np.zeros(vals.shape[1])
            continue
        # shifting by the first row keeps constant columns exactly zero
        stds = [np.std(vals[rows] - vals[rows[0]], axis=0) for rows in parts]
        out[name] = np.mean(stds, axis=0)
    return out
