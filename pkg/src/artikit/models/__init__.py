"""Trainable models: articulation VAE, latent flow prior and the Gaussian decoder."""

from .finetune import (
    FinetuneResult,
    TrainObject,
    decoder_checkpoint,
    decoder_from_checkpoint,
    finetune_articulation,
    heldout_l1,
    prepare_object,
    sample_appearance,
    train_appearance_prior,
)
from .flow import FlowConfig, FlowModel, flow_checkpoint, flow_from_checkpoint, fm_sample, fm_train
from .gaussians import GAUSSIANS_PER_VOXEL, DecoderConfig, decode_gaussians, decode_latents, init_decoder
from .layers import Params
from .vae import VaeConfig, VaeResult, init_vae, reconstruct, train_vae, vae_decode, vae_encode

__all__ = [
    "FinetuneResult", "TrainObject", "decoder_checkpoint", "decoder_from_checkpoint", "finetune_articulation",
    "heldout_l1", "prepare_object", "sample_appearance", "train_appearance_prior", "FlowConfig", "FlowModel",
    "flow_checkpoint", "flow_from_checkpoint", "fm_sample", "fm_train", "GAUSSIANS_PER_VOXEL", "DecoderConfig",
    "decode_gaussians", "decode_latents", "init_decoder", "Params", "VaeConfig", "VaeResult", "init_vae",
    "reconstruct", "train_vae", "vae_decode", "vae_encode",
]
