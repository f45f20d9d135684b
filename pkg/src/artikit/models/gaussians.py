"""Per-voxel Gaussian decoder.

Each active voxel carries a feature vector (curated colour, label one-hot and
a seen flag). A small encoder maps it to an appearance latent and a decoder
head expands the latent into 32 Gaussians. Gaussian ``k`` of voxel ``i`` is
stored at flat index ``32 * i + k``, so the owning voxel is recovered with
integer division.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..artgrid import ArticulatedVoxelGrid, PartLabel
from ..errors import ShapeMismatch
from ..numerics import Tensor, no_grad
from ..splat.splats import SplatSet
from .layers import DTYPE, Params, add_mlp, mlp

GAUSSIANS_PER_VOXEL = 32
N_LABELS = len(PartLabel)
FEATURE_DIM = 3 + N_LABELS + 1
PARAMS_PER_GAUSSIAN = 14  # offset 3, log-scale 3, quaternion 4, opacity logit 1, colour 3
MIN_SCALE = 1e-4


@dataclass(frozen=True)
class DecoderConfig:
    gaussians_per_voxel: int = GAUSSIANS_PER_VOXEL
    feature_dim: int = FEATURE_DIM
    latent_dim: int = 8
    hidden: int = 64
    init_scale: float = 0.02
    init_opacity: float = 0.7

    def __post_init__(self):
        if self.gaussians_per_voxel != GAUSSIANS_PER_VOXEL:
            raise ValueError(f"gaussians_per_voxel is fixed at {GAUSSIANS_PER_VOXEL}")
        if self.feature_dim < 1 or self.latent_dim < 1 or self.hidden < 1:
            raise ValueError("layer sizes must be positive")
        if self.init_scale <= 0 or not 0.0 < self.init_opacity < 1.0:
            raise ValueError("init_scale must be > 0 and init_opacity in (0, 1)")

    @property
    def out_dim(self) -> int:
        return self.gaussians_per_voxel * PARAMS_PER_GAUSSIAN

    def to_dict(self) -> dict:
        return asdict(self)


def voxel_features(grid: ArticulatedVoxelGrid, colors, seen) -> np.ndarray:
    """``[rgb, label one-hot, seen]`` per active voxel; unseen voxels carry zero colour."""
    colors = np.asarray(colors, dtype=np.float64)
    seen = np.asarray(seen, dtype=bool)
    v = grid.active_count
    if colors.shape != (v, 3) or seen.shape != (v,):
        raise ShapeMismatch(f"need ({v}, 3) colours and ({v},) seen flags")
    out = np.zeros((v, FEATURE_DIM))
    out[:, :3] = np.where(seen[:, None], colors, 0.0)
    out[np.arange(v), 3 + grid.labels.astype(np.int64)] = 1.0
    out[:, -1] = seen
    return out


def init_decoder(cfg: DecoderConfig = DecoderConfig(), seed: int = 0) -> Params:
    rng = np.random.default_rng(seed)
    params = Params()
    add_mlp(params, rng, "enc", [cfg.feature_dim, cfg.hidden, cfg.latent_dim])
    add_mlp(params, rng, "dec", [cfg.latent_dim, cfg.hidden, cfg.out_dim], out_gain=0.1)
    # biases put the initial Gaussians at scattered offsets with a common size and opacity
    bias = np.zeros((cfg.gaussians_per_voxel, PARAMS_PER_GAUSSIAN))
    bias[:, 0:3] = np.arctanh(rng.uniform(-0.8, 0.8, size=(cfg.gaussians_per_voxel, 3)))
    bias[:, 3:6] = math.log(cfg.init_scale)
    bias[:, 6] = 1.0
    bias[:, 10] = math.log(cfg.init_opacity / (1.0 - cfg.init_opacity))
    params["dec.1.b"] = Tensor(bias.reshape(-1).astype(DTYPE), requires_grad=True)
    return params


def encode_features(params: Params, features: Tensor) -> Tensor:
    return mlp(params, "enc", features, 2)


def decode_latents_raw(params: Params, cfg: DecoderConfig, latents: Tensor) -> Tensor:
    """Raw head output ``(V, 32, 14)``."""
    return mlp(params, "dec", latents, 2).reshape(-1, cfg.gaussians_per_voxel, PARAMS_PER_GAUSSIAN)


def gaussian_tensors(raw: Tensor, grid: ArticulatedVoxelGrid) -> dict:
    """Activated Gaussian parameters, flattened in voxel-major order."""
    v, k, _ = raw.shape
    g = v * k
    vs = grid.voxel_size
    centers = np.repeat(grid.centers(), k, axis=0).astype(raw.dtype)
    flat = raw.reshape(g, PARAMS_PER_GAUSSIAN)
    q = flat[:, 6:10]
    return {
        "means": Tensor(centers) + (0.5 * vs) * flat[:, 0:3].tanh(),
        "scales": flat[:, 3:6].exp().clip(MIN_SCALE, vs),
        "quats": q / (q * q).sum(axis=1, keepdims=True).sqrt(),
        "opacities": flat[:, 10].sigmoid(),
        "colors": flat[:, 11:14].sigmoid(),
        "voxel_index": np.repeat(np.arange(v), k),
    }


def forward_tensors(params: Params, cfg: DecoderConfig, grid: ArticulatedVoxelGrid, features=None, latents=None) -> dict:
    """Differentiable decode from features (through the encoder) or from latents."""
    if latents is None:
        feats = np.asarray(features, dtype=DTYPE)
        if feats.shape != (grid.active_count, cfg.feature_dim):
            raise ShapeMismatch(f"features must be ({grid.active_count}, {cfg.feature_dim}), got {feats.shape}")
        latents = encode_features(params, Tensor(feats))
    elif not isinstance(latents, Tensor):
        latents = Tensor(np.asarray(latents, dtype=DTYPE))
    if latents.shape != (grid.active_count, cfg.latent_dim):
        raise ShapeMismatch(f"latents must be ({grid.active_count}, {cfg.latent_dim}), got {latents.shape}")
    return gaussian_tensors(decode_latents_raw(params, cfg, latents), grid)


def to_splats(t: dict) -> SplatSet:
    return SplatSet(
        t["means"].data.astype(np.float64), t["scales"].data.astype(np.float64), t["quats"].data.astype(np.float64),
        t["opacities"].data.astype(np.float64), t["colors"].data.astype(np.float64), t["voxel_index"],
    )


def decode_gaussians(features, grid: ArticulatedVoxelGrid, params: Params, cfg: DecoderConfig = DecoderConfig()) -> SplatSet:
    """32 Gaussians per active voxel, in record order."""
    with no_grad():
        return to_splats(forward_tensors(params, cfg, grid, features=features))


def decode_latents(latents, grid: ArticulatedVoxelGrid, params: Params, cfg: DecoderConfig = DecoderConfig()) -> SplatSet:
    with no_grad():
        return to_splats(forward_tensors(params, cfg, grid, latents=latents))


def gaussian_voxel(flat_index, k: int = GAUSSIANS_PER_VOXEL):
    """(voxel row, slot) of flat Gaussian indices."""
    return np.divmod(np.asarray(flat_index), k)


def gaussian_index(voxel, slot, k: int = GAUSSIANS_PER_VOXEL):
    return np.asarray(voxel) * k + np.asarray(slot)
