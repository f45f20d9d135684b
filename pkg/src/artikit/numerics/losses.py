"""Training objectives of the articulation VAE.

Voxel-wise tensors are channels-last: ``(..., C)`` with the active mask
covering the leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyMask, ShapeMismatch
from .tensor import Tensor

COMPONENTS = ("kl", "occ", "sem", "joint", "bbox")


@dataclass(frozen=True)
class LossWeights:
    alpha_kl: float = 0.001

    def __post_init__(self):
        if not self.alpha_kl >= 0.0:
            raise ValueError("alpha_kl must be non-negative")


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def dice_loss(pred, target, eps: float = 1e-6, axis=None) -> Tensor:
    """``1 - 2 sum(y * p) / (sum(y) + sum(p) + eps)``.

    With ``axis`` set, the ratio is taken per slice and the losses averaged.
    """
    pred = _as_tensor(pred)
    target = np.asarray(target, dtype=pred.dtype)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"dice_loss: pred {pred.shape} vs target {target.shape}")
    inter = (pred * target).sum(axis=axis)
    denom = pred.sum(axis=axis) + target.sum(axis=axis) + eps
    return (1.0 - 2.0 * inter / denom).mean()


def _mask_rows(x: Tensor, mask) -> tuple:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape[:-1]:
        raise ShapeMismatch(f"mask {mask.shape} does not cover {x.shape}")
    count = int(mask.sum())
    if count == 0:
        raise EmptyMask("the active-voxel mask is empty")
    return mask, count


def masked_cross_entropy(logits, target, mask) -> Tensor:
    """Mean over masked voxels of ``-sum_c t_c log softmax(logits)_c``.

    ``target`` is a one-hot array shaped like ``logits`` or integer classes
    shaped like the mask.
    """
    logits = _as_tensor(logits)
    mask, count = _mask_rows(logits, mask)
    target = np.asarray(target)
    rows = logits[mask]
    lsm = rows.log_softmax(axis=-1)
    if target.shape == logits.shape:
        onehot = target[mask].astype(logits.dtype)
    elif target.shape == mask.shape:
        onehot = np.eye(logits.shape[-1], dtype=logits.dtype)[target[mask]]
    else:
        raise ShapeMismatch(f"target {target.shape} matches neither logits {logits.shape} nor mask")
    return -(lsm * onehot).sum() / count


def param_regression_loss(pred, target, mask) -> Tensor:
    """Mean over masked voxels of the summed squared error across channels.

    The channel block is axis (3), origin (3), range (2) and bbox (6).
    """
    pred = _as_tensor(pred)
    mask, count = _mask_rows(pred, mask)
    target = np.asarray(target, dtype=pred.dtype)
    if target.shape != pred.shape:
        raise ShapeMismatch(f"regression target {target.shape} vs pred {pred.shape}")
    diff = pred[mask] - target[mask]
    return (diff * diff).sum() / count


def kl_loss(mu, logvar) -> Tensor:
    mu, logvar = _as_tensor(mu), _as_tensor(logvar)
    if mu.shape != logvar.shape:
        raise ShapeMismatch(f"mu {mu.shape} vs logvar {logvar.shape}")
    return (0.5 * (mu * mu + logvar.exp() - 1.0 - logvar)).mean()


def total_vae_loss(components: dict, weights: LossWeights = LossWeights()):
    """Weighted sum and a float breakdown for logging."""
    missing = [k for k in COMPONENTS if k not in components]
    if missing:
        raise KeyError(f"missing loss components: {missing}")
    total = weights.alpha_kl * components["kl"]
    for k in COMPONENTS[1:]:
        total = total + components[k]
    log = {k: float(np.asarray(getattr(components[k], "data", components[k]))) for k in COMPONENTS}
    log["total"] = float(np.asarray(getattr(total, "data", total)))
    return total, log
