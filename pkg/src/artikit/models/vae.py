"""3-D convolutional VAE over articulation channel volumes.

The encoder halves the resolution twice and ends in a stride-1 stage, so a
``res^3`` volume maps to a ``(res/4)^3`` latent with ``2 * C_z`` channels
(mean and log-variance). The decoder mirrors it with two transposed
convolutions.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..artgrid import CH_AXIS, CH_BBOX, CH_JOINT, CH_LABEL, CH_OCC, N_CHANNELS, ArticulatedVoxelGrid, ChannelVolume, to_channels
from ..errors import ShapeMismatch
from ..numerics import (
    Adam,
    LossWeights,
    Tensor,
    conv3d,
    conv_transpose3d,
    dice_loss,
    group_norm,
    kl_loss,
    masked_cross_entropy,
    no_grad,
    param_regression_loss,
    total_vae_loss,
)
from .layers import DTYPE, Params, he_normal, zeros

CONT = slice(CH_AXIS.start, CH_BBOX.stop)  # axis, origin, range, bbox
LOGVAR_INIT = -4.0
OUT_GAIN = 0.1  # small initial outputs keep the first regression steps sane


@dataclass(frozen=True)
class VaeConfig:
    in_channels: int = N_CHANNELS
    resolution: int = 32
    latent_channels: int = 4
    widths: tuple = (32, 64, 64)
    norm_groups: int = 0  # group norm after hidden convs; 0 disables

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if self.norm_groups < 0 or (self.norm_groups and any(w % self.norm_groups for w in self.widths)):
            raise ValueError("norm_groups must divide every width")
        if self.resolution % 4:
            raise ValueError("resolution must be divisible by 4")
        if len(self.widths) != 3:
            raise ValueError("widths needs three stages")

    @property
    def latent_resolution(self) -> int:
        return self.resolution // 4

    @property
    def latent_shape(self) -> tuple:
        r = self.latent_resolution
        return (self.latent_channels, r, r, r)

    @classmethod
    def paper(cls) -> "VaeConfig":
        return cls(resolution=64, latent_channels=8)

    def to_dict(self) -> dict:
        return asdict(self)


# (name, kind, k, stride, padding, cin, cout) per layer
def _layers(cfg: VaeConfig):
    w1, w2, w3 = cfg.widths
    cz, c = cfg.latent_channels, cfg.in_channels
    enc = [
        ("enc0", "conv", 2, 2, 0, c, w1),
        ("enc1", "conv", 2, 2, 0, w1, w2),
        ("enc2", "conv", 3, 1, 1, w2, w3),
        ("enc3", "conv", 1, 1, 0, w3, 2 * cz),
    ]
    dec = [
        ("dec0", "conv", 3, 1, 1, cz, w3),
        ("dec1", "conv", 3, 1, 1, w3, w2),
        ("dec2", "convT", 2, 2, 0, w2, w1),
        ("dec4", "convT", 2, 2, 0, w1, c),
    ]
    return enc, dec


def init_vae(cfg: VaeConfig, seed: int = 0) -> Params:
    rng = np.random.default_rng(seed)
    params = Params()
    enc, dec = _layers(cfg)
    for name, kind, k, s, p, cin, cout in enc + dec:
        last = name in ("enc3", "dec4")
        # transposed stride-2 kernels spread each input over (k/s)^3 outputs
        fan_in = cin * (k ** 3 if kind == "conv" else (k // s) ** 3)
        gain = {"enc3": 1.0, "dec4": OUT_GAIN}.get(name, math.sqrt(2.0))
        params[f"{name}.w"] = he_normal(rng, (k, k, k, cin, cout), fan_in, gain)
        params[f"{name}.b"] = zeros((cout,))
        if cfg.norm_groups and not last:
            params[f"{name}.gn.g"] = zeros((cout,), fill=1.0)
            params[f"{name}.gn.b"] = zeros((cout,))
    # start with a narrow posterior so sampling noise does not swamp reconstruction
    b = params["enc3.b"].data
    b[cfg.latent_channels:] = LOGVAR_INIT
    return params


def _apply(params, cfg, layers, x):
    for i, (name, kind, k, s, p, cin, cout) in enumerate(layers):
        op = conv3d if kind == "conv" else conv_transpose3d
        x = op(x, params[f"{name}.w"], params[f"{name}.b"], s, p)
        if i < len(layers) - 1:
            if cfg.norm_groups:
                x = group_norm(x, params[f"{name}.gn.g"], params[f"{name}.gn.b"], cfg.norm_groups)
            x = x.leaky_relu(0.1)
    return x


def encode(params: Params, cfg: VaeConfig, x: Tensor):
    """Channels-last batch ``(B, r, r, r, C)`` -> ``mu, logvar`` each ``(B, l, l, l, C_z)``."""
    if x.shape[1:] != (cfg.resolution,) * 3 + (cfg.in_channels,):
        raise ShapeMismatch(f"expected (B, {cfg.resolution}^3, {cfg.in_channels}), got {x.shape}")
    h = _apply(params, cfg, _layers(cfg)[0], x)
    cz = cfg.latent_channels
    return h[..., :cz], h[..., cz:]


def decode(params: Params, cfg: VaeConfig, z: Tensor) -> Tensor:
    """Latent ``(B, l, l, l, C_z)`` -> raw channel logits ``(B, r, r, r, C)``."""
    l, cz = cfg.latent_resolution, cfg.latent_channels
    if z.shape[1:] != (l, l, l, cz):
        raise ShapeMismatch(f"expected latent (B, {l}^3, {cz}), got {z.shape}")
    return _apply(params, cfg, _layers(cfg)[1], z)


def reparameterize(mu, logvar, seed=None, rng=None):
    """``z = mu + exp(logvar / 2) * eps`` with seeded standard-normal ``eps``."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    mu_t = mu if isinstance(mu, Tensor) else Tensor(mu)
    lv_t = logvar if isinstance(logvar, Tensor) else Tensor(logvar)
    if mu_t.shape != lv_t.shape:
        raise ShapeMismatch("mu and logvar differ in shape")
    eps = rng.standard_normal(mu_t.shape).astype(mu_t.dtype)
    return mu_t + (lv_t * 0.5).exp() * eps


def to_channels_last(vol) -> np.ndarray:
    data = vol.data if isinstance(vol, ChannelVolume) else np.asarray(vol)
    return np.moveaxis(data, 0, -1)


def to_channel_volume(raw: np.ndarray) -> ChannelVolume:
    """Raw decoder output of one sample -> channel-first volume with sigmoid occupancy."""
    out = np.moveaxis(np.asarray(raw, dtype=np.float64), -1, 0).copy()
    out[CH_OCC] = 1.0 / (1.0 + np.exp(-out[CH_OCC]))
    return ChannelVolume(out)


# --- functional entry points ------------------------------------------------

def vae_encode(vol: ChannelVolume, params: Params, cfg: VaeConfig):
    with no_grad():
        x = Tensor(to_channels_last(vol)[None].astype(DTYPE))
        mu, lv = encode(params, cfg, x)
    return np.moveaxis(mu.data[0], -1, 0), np.moveaxis(lv.data[0], -1, 0)


def vae_decode(z: np.ndarray, params: Params, cfg: VaeConfig) -> ChannelVolume:
    """``z`` is channel-first ``(C_z, l, l, l)``."""
    z = np.asarray(z, dtype=DTYPE)
    if z.shape != cfg.latent_shape:
        raise ShapeMismatch(f"expected latent {cfg.latent_shape}, got {z.shape}")
    with no_grad():
        raw = decode(params, cfg, Tensor(np.moveaxis(z, 0, -1)[None]))
    return to_channel_volume(raw.data[0])


# --- losses and training ----------------------------------------------------

@dataclass
class Batch:
    x: np.ndarray  # (B, r, r, r, C) channels-last inputs
    mask: np.ndarray  # (B, r, r, r) active voxels
    occ: np.ndarray
    labels: np.ndarray
    joints: np.ndarray


def make_batch(grids) -> Batch:
    x = np.stack([to_channels_last(to_channels(g, DTYPE)) for g in grids])
    mask = x[..., CH_OCC] > 0.5
    return Batch(
        x=x, mask=mask, occ=x[..., CH_OCC],
        labels=np.argmax(x[..., CH_LABEL], axis=-1), joints=np.argmax(x[..., CH_JOINT], axis=-1),
    )


def loss_components(raw: Tensor, mu: Tensor, logvar: Tensor, batch: Batch) -> dict:
    occ = raw[..., CH_OCC].sigmoid()
    return {
        "kl": kl_loss(mu, logvar),
        "occ": dice_loss(occ, batch.occ, axis=(1, 2, 3)),
        "sem": masked_cross_entropy(raw[..., CH_LABEL], batch.labels, batch.mask),
        "joint": masked_cross_entropy(raw[..., CH_JOINT], batch.joints, batch.mask),
        "bbox": param_regression_loss(raw[..., CONT], batch.x[..., CONT], batch.mask),
    }


def init_output_bias(params: Params, batch: Batch) -> None:
    """Start the output layer at the training-set means.

    Occupancy gets the logit of the occupied fraction and the continuous
    channels the mean over active voxels; the regression then only has to
    learn per-object deviations.
    """
    b = params["dec4.b"].data
    occ = float(np.clip(batch.occ.mean(), 1e-3, 1.0 - 1e-3))
    b[CH_OCC] = math.log(occ / (1.0 - occ))
    if batch.mask.any():
        b[CONT] = batch.x[batch.mask][:, CONT].mean(axis=0)


def vae_loss(params, cfg, batch: Batch, weights: LossWeights, rng):
    mu, logvar = encode(params, cfg, Tensor(batch.x))
    z = reparameterize(mu, logvar, rng=rng)
    raw = decode(params, cfg, z)
    return total_vae_loss(loss_components(raw, mu, logvar, batch), weights)


@dataclass
class VaeResult:
    params: Params
    best_params: dict
    config: VaeConfig
    history: list = field(default_factory=list)
    seconds: float = 0.0


def train_vae(grids, cfg: VaeConfig = VaeConfig(), steps: int = 2000, seed: int = 0, lr: float = 1e-4,
              batch_size: int = 8, weights: LossWeights = LossWeights(), log_every: int = 0, log=print) -> VaeResult:
    """Adam on the weighted VAE objective; batches cycle through ``grids`` in a seeded order."""
    if not grids:
        raise ValueError("need at least one training grid")
    for g in grids:
        if g.resolution != cfg.resolution:
            raise ShapeMismatch(f"grid resolution {g.resolution} != config {cfg.resolution}")
    params = init_vae(cfg, seed)
    full = make_batch(grids)
    init_output_bias(params, full)
    opt = Adam(params.tensors(), lr=lr)
    rng = np.random.default_rng(seed + 1)
    n = len(grids)
    history, best, best_loss = [], params.copy_arrays(), math.inf
    t0 = time.perf_counter()
    order = np.arange(n)
    for step in range(steps):
        start = (step * batch_size) % n
        if start < batch_size and n > batch_size:
            order = rng.permutation(n)
        sel = order[np.arange(start, start + min(batch_size, n)) % n]
        batch = full if n <= batch_size else Batch(*(getattr(full, f)[sel] for f in ("x", "mask", "occ", "labels", "joints")))
        opt.zero_grad()
        total, parts = vae_loss(params, cfg, batch, weights, rng)
        total.backward()
        opt.step()
        history.append(parts)
        if parts["total"] < best_loss:
            best_loss, best = parts["total"], params.copy_arrays()
        if log_every and (step % log_every == 0 or step == steps - 1):
            log(f"step {step:5d} " + " ".join(f"{k}={v:.4f}" for k, v in parts.items()))
    return VaeResult(params, best, cfg, history, time.perf_counter() - t0)


def reconstruct(params: Params, cfg: VaeConfig, grid: ArticulatedVoxelGrid) -> ChannelVolume:
    """Encode, take the posterior mean and decode."""
    mu, _ = vae_encode(to_channels(grid, DTYPE), params, cfg)
    return vae_decode(mu, params, cfg)


def vae_checkpoint(params: Params, cfg: VaeConfig) -> tuple:
    return params.arrays(), {"kind": "vae", "config": cfg.to_dict()}


def vae_from_checkpoint(tensors: dict, meta: dict):
    if not meta or meta.get("kind") != "vae":
        raise ShapeMismatch("checkpoint does not hold a VAE")
    cfg = VaeConfig(**meta["config"])
    return Params.from_arrays(tensors), cfg
