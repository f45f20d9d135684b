"""Tensors, reverse-mode autodiff, losses and optimization."""

from .checkpoint import atns_bytes, load_checkpoint, parse_atns, save_checkpoint
from .conv import conv3d, conv3d_reference, conv_transpose3d
from .gradcheck import grad_check, numeric_grad, rel_error
from .losses import (
    LossWeights,
    dice_loss,
    kl_loss,
    masked_cross_entropy,
    param_regression_loss,
    total_vae_loss,
)
from .optim import Adam, AdamState, adam_step
from .tensor import Tape, Tensor, concat, group_norm, index_add, no_grad, stack, tensor, where

__all__ = [
    "Adam", "AdamState", "LossWeights", "Tape", "Tensor", "adam_step", "atns_bytes", "concat",
    "conv3d", "conv3d_reference", "conv_transpose3d", "dice_loss", "grad_check", "group_norm", "index_add",
    "kl_loss", "load_checkpoint", "masked_cross_entropy", "no_grad", "numeric_grad",
    "param_regression_loss", "parse_atns", "rel_error", "save_checkpoint", "stack", "tensor",
    "total_vae_loss", "where",
]
