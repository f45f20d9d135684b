"""End-to-end steps shared by the CLI: datasets, latents, sampling and generation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .artgrid import AVOX_VERSION, ArticulatedVoxelGrid, from_channels, read_avox, to_channels, validate_grid, write_avox
from .errors import MissingInput, ShapeMismatch
from .ingest import CATEGORIES, load_object
from .kinematics import articulate_splats, sample_states
from .models.finetune import decoder_from_checkpoint, sample_appearance
from .models.flow import FlowModel, flow_from_checkpoint, fm_sample
from .models.gaussians import decode_gaussians, decode_latents, voxel_features
from .models.vae import VaeConfig, vae_decode, vae_encode, vae_from_checkpoint
from .numerics import load_checkpoint
from .segment import segment_and_aggregate
from .splat.appearance import gt_splats, voxel_colors
from .splat.camera import fibonacci_cameras
from .splat.image import write_ppm
from .splat.render import render
from .splat.splats import ASPLAT_VERSION, write_asplat

ATNS_VERSION = 1


@dataclass(frozen=True)
class Sample:
    name: str
    grid: ArticulatedVoxelGrid
    category: str


def _category(path: Path) -> str:
    obj = path.with_suffix(".json")
    if obj.exists():
        cat = load_object(obj).category
        if cat:
            return cat
    prefix = path.stem.split("_")[0]
    return prefix if prefix in CATEGORIES else ""


def load_dataset(path) -> list:
    """Every ``*.avox`` in a directory (sorted by name), or a single file."""
    path = Path(path)
    if not path.exists():
        raise MissingInput(f"dataset not found: {path}")
    files = sorted(path.glob("*.avox")) if path.is_dir() else [path]
    if not files:
        raise MissingInput(f"no .avox files in {path}")
    return [Sample(f.stem, read_avox(f), _category(f)) for f in files]


def category_index(name: str) -> int:
    return CATEGORIES.index(name) if name in CATEGORIES else -1


def grid_latents(params, cfg: VaeConfig, grids) -> np.ndarray:
    """Posterior means, flattened to ``(N, C_z * l^3)``."""
    return np.stack([vae_encode(to_channels(g, np.float32), params, cfg)[0].reshape(-1) for g in grids])


def load_vae(path):
    return vae_from_checkpoint(*load_checkpoint(path))


def load_prior(path) -> FlowModel:
    tensors, meta = load_checkpoint(path)
    if meta.get("kind") != "prior":
        raise ShapeMismatch(f"{path} does not hold a latent prior")
    return flow_from_checkpoint(tensors, meta)


def sample_grid(vae_params, vae_cfg: VaeConfig, prior: FlowModel, cond=None, seed: int = 0, steps=None,
                cfg_scale=None, eps: float = 0.1, min_pts: int = 4) -> ArticulatedVoxelGrid:
    """Latent prior sample -> decoded volume -> segmented, aggregated grid."""
    if prior.dim != int(np.prod(vae_cfg.latent_shape)):
        raise ShapeMismatch(f"prior dimension {prior.dim} does not match the VAE latent {vae_cfg.latent_shape}")
    z = fm_sample(prior, cond=cond, n=1, seed=seed, steps=steps, cfg_scale=cfg_scale)[0]
    vol = vae_decode(z.reshape(vae_cfg.latent_shape), vae_params, vae_cfg)
    grid = segment_and_aggregate(from_channels(vol), eps, min_pts)
    validate_grid(grid)
    return grid


def appearance_splats(grid: ArticulatedVoxelGrid, decoder_path=None, seed: int = 0):
    """Gaussians for ``grid``: sampled appearance latents when a prior is stored, palette features otherwise."""
    if decoder_path is None:
        return gt_splats(grid)
    params, cfg, prior = decoder_from_checkpoint(*load_checkpoint(decoder_path))
    if prior is not None:
        return decode_latents(sample_appearance(prior, grid, seed), grid, params, cfg)
    feats = voxel_features(grid, voxel_colors(grid), np.ones(grid.active_count, dtype=bool))
    return decode_gaussians(feats, grid, params, cfg)


def render_states(grid, splats, out_dir, n_states: int = 3, n_views: int = 4, size: int = 64) -> list:
    """PPM renders ``state{s}_view{v}.ppm``; returns their paths relative to ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cams = fibonacci_cameras(n_views, width=size, height=size)
    written = []
    for s, state in enumerate(sample_states(grid, n_states)):
        moved = articulate_splats(splats, state, grid)
        for v, cam in enumerate(cams):
            name = f"state{s}_view{v}.ppm"
            write_ppm(render(moved, cam).rgb, out_dir / name)
            written.append(name)
    return written


def generate(out_dir, cond, seed: int, vae_path, prior_path, decoder_path=None, steps=None, cfg_scale=None,
             eps: float = 0.1, min_pts: int = 4, n_states: int = 3, n_views: int = 4, size: int = 64) -> dict:
    """Sample, decode and render one object; writes artifacts plus ``manifest.json``."""
    out = Path(out_dir)
    params, vcfg = load_vae(vae_path)
    prior = load_prior(prior_path)
    if decoder_path is not None and not Path(decoder_path).exists():
        raise MissingInput(f"checkpoint not found: {decoder_path}")
    grid = sample_grid(params, vcfg, prior, cond, seed, steps, cfg_scale, eps, min_pts)
    splats = appearance_splats(grid, decoder_path, seed + 1)
    out.mkdir(parents=True, exist_ok=True)
    write_avox(grid, out / "grid.avox")
    write_asplat(splats, out / "splats.asplat")
    renders = render_states(grid, splats, out / "renders", n_states, n_views, size) if n_views > 0 else []
    manifest = {
        "artikit": __version__,
        "formats": {"avox": AVOX_VERSION, "asplat": ASPLAT_VERSION, "atns": ATNS_VERSION, "ppm": "P6"},
        "cond": cond,
        "seed": seed,
        "inputs": {"vae": Path(vae_path).name, "prior": Path(prior_path).name,
                   "decoder": Path(decoder_path).name if decoder_path else None},
        "grid": {"file": "grid.avox", "resolution": grid.resolution, "voxels": grid.active_count,
                 "parts": len(grid.part_rows())},
        "splats": {"file": "splats.asplat", "count": len(splats)},
        "renders": [f"renders/{r}" for r in renders],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
