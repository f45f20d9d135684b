"""Articulation-aware fine-tuning of the Gaussian decoder and its appearance prior.

A training step decodes Gaussians in the rest state, moves them with the
part transforms of one articulation state, renders one view and takes

    L = l1(I_gt, I) + lam * (mean scale + mean opacity)

Rigid transforms are constants applied by tensor ops, so gradients reach
the decoder through the articulation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..artgrid import ArticulatedVoxelGrid
from ..kinematics import ArticulationState, _per_row_transforms, articulate_splats, matrix_to_quat, quat_left_matrix
from ..numerics import Adam, Tensor, no_grad
from ..splat.appearance import gt_splats, voxel_colors
from ..splat.camera import fibonacci_cameras
from ..splat.curate import curate_multistate
from ..splat.render import render, render_tensors
from ..kinematics import sample_states
from .flow import FlowConfig, FlowModel, flow_checkpoint, flow_from_checkpoint, fm_sample, fm_train
from .gaussians import DecoderConfig, encode_features, forward_tensors, init_decoder, voxel_features
from .layers import DTYPE, Params

LAMBDA_REG = 0.01


@dataclass
class View:
    state: ArticulationState
    camera: object
    rgb: np.ndarray  # ground-truth image


@dataclass
class TrainObject:
    grid: ArticulatedVoxelGrid
    features: np.ndarray
    views: list


@dataclass
class FinetuneResult:
    params: Params
    config: DecoderConfig
    history: list = field(default_factory=list)  # dicts with recon, reg, total
    seconds: float = 0.0


def articulate_tensors(t: dict, grid: ArticulatedVoxelGrid, state: ArticulationState) -> dict:
    """Differentiable counterpart of :func:`artikit.kinematics.articulate_splats`."""
    rots, trans, tf = _per_row_transforms(grid, state, False)
    if all(x.is_identity() for x in tf.values()):
        return t
    lq = np.empty((grid.active_count, 4, 4))
    for pid, rows in grid.part_rows().items():
        lq[rows] = quat_left_matrix(matrix_to_quat(tf[pid].rotation))
    vi = t["voxel_index"]
    dt = t["means"].dtype
    g = len(vi)
    means = (Tensor(rots[vi].astype(dt)) @ t["means"].reshape(g, 3, 1)).reshape(g, 3) + Tensor(trans[vi].astype(dt))
    quats = (Tensor(lq[vi].astype(dt)) @ t["quats"].reshape(g, 4, 1)).reshape(g, 4)
    return dict(t, means=means, quats=quats)


def render_view(t: dict, cam):
    rgb, _, _, _ = render_tensors(t["means"], t["scales"], t["quats"], t["opacities"], t["colors"], cam)
    return rgb


def reg_loss(t: dict) -> Tensor:
    return t["scales"].mean() + t["opacities"].mean()


def step_losses(params: Params, cfg: DecoderConfig, obj: TrainObject, view: View, lam: float):
    t = articulate_tensors(forward_tensors(params, cfg, obj.grid, features=obj.features), obj.grid, view.state)
    recon = (render_view(t, view.camera) - Tensor(view.rgb.astype(DTYPE))).abs().mean()
    reg = reg_loss(t)
    return recon + lam * reg, recon, reg


def finetune_articulation(objects, params: Params | None = None, cfg: DecoderConfig = DecoderConfig(),
                          epochs: int = 10, lam: float = LAMBDA_REG, lr: float = 1e-2, seed: int = 0,
                          log_every: int = 0, log=print) -> FinetuneResult:
    """Fit the decoder to every (object, view) pair; one Adam step per view in a seeded order."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    params = init_decoder(cfg, seed) if params is None else params
    opt = Adam(params.tensors(), lr=lr)
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i, obj in enumerate(objects) for j in range(len(obj.views))]
    history = []
    t0 = time.perf_counter()
    step = 0
    for _ in range(epochs):
        for p in rng.permutation(len(pairs)):
            i, j = pairs[p]
            opt.zero_grad()
            total, recon, reg = step_losses(params, cfg, objects[i], objects[i].views[j], lam)
            total.backward()
            opt.step()
            history.append({"recon": float(recon.data), "reg": float(reg.data), "total": float(total.data)})
            if log_every and step % log_every == 0:
                log(f"step {step:5d} recon={history[-1]['recon']:.5f} reg={history[-1]['reg']:.5f}")
            step += 1
    return FinetuneResult(params, cfg, history, time.perf_counter() - t0)


def prepare_object(grid: ArticulatedVoxelGrid, colors=None, k: int = 8, n: int = 48, size: int = 64,
                   radius: float = 2.0, states=None) -> TrainObject:
    """Curated features plus ground-truth views of reference splats at ``k`` states."""
    colors = voxel_colors(grid) if colors is None else colors
    ref = gt_splats(grid, colors)
    states = sample_states(grid, k) if states is None else list(states)
    cur = curate_multistate(grid, ref, states=states, n=n, width=size, height=size, radius=radius)
    views = [View(s.state, cam, img.rgb) for s in cur.samples for cam, img in s.views]
    return TrainObject(grid, voxel_features(grid, cur.features, cur.seen), views)


def heldout_l1(params: Params, cfg: DecoderConfig, obj: TrainObject, state: ArticulationState, cams,
               reference) -> float:
    """Mean l1 between decoded and reference renders at ``state``; ``reference`` is a SplatSet."""
    moved_ref = articulate_splats(reference, state, obj.grid)
    with no_grad():
        t = articulate_tensors(forward_tensors(params, cfg, obj.grid, features=obj.features), obj.grid, state)
        errs = [float(np.abs(render_view(t, cam).data - render(moved_ref, cam).rgb).mean()) for cam in cams]
    return float(np.mean(errs))


# --- appearance prior ------------------------------------------------------

def object_latents(params: Params, objects) -> tuple:
    """Re-encoded per-voxel latents and their label indices, stacked over objects."""
    with no_grad():
        z = [encode_features(params, Tensor(o.features.astype(DTYPE))).data for o in objects]
    labels = [o.grid.labels.astype(np.int64) for o in objects]
    return np.concatenate(z), np.concatenate(labels)


def train_appearance_prior(params: Params, cfg: DecoderConfig, objects, flow: FlowConfig | None = None,
                           steps: int = 1000, lr: float = 1e-3, seed: int = 0) -> FlowModel:
    from ..artgrid import PartLabel
    flow = flow or FlowConfig(cond_dim=len(PartLabel), hidden=64)
    z, labels = object_latents(params, objects)
    return fm_train(z, labels, flow, seed=seed, steps=steps, lr=lr, cond_names=[l.name.lower() for l in PartLabel])


def sample_appearance(prior: FlowModel, grid: ArticulatedVoxelGrid, seed: int = 0) -> np.ndarray:
    """One appearance latent per voxel, conditioned on its label."""
    labels = [int(x) for x in grid.labels]
    if not labels:
        return np.zeros((0, prior.dim))
    return fm_sample(prior, cond=labels, n=len(labels), seed=seed)


def decoder_checkpoint(params: Params, cfg: DecoderConfig, prior: FlowModel | None = None) -> tuple:
    tensors = {f"dec.{k}": v for k, v in params.arrays().items()}
    meta = {"kind": "gaussian_decoder", "config": cfg.to_dict()}
    if prior is not None:
        pt, pm = flow_checkpoint(prior, kind="appearance_prior")
        tensors.update({f"prior.{k}": v for k, v in pt.items()})
        meta["prior"] = pm
    return tensors, meta


def decoder_from_checkpoint(tensors: dict, meta: dict):
    cfg = DecoderConfig(**meta["config"])
    params = Params.from_arrays({k[4:]: v for k, v in tensors.items() if k.startswith("dec.")})
    prior = flow_from_checkpoint(tensors, meta["prior"], prefix="prior.") if "prior" in meta else None
    return params, cfg, prior
