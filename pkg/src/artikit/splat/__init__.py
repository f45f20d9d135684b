"""Gaussian splats: containers, cameras, rasterization and multi-state curation."""

from .appearance import PALETTE, gt_splats, voxel_colors
from .camera import Camera, fibonacci_cameras, fibonacci_directions, look_at_camera
from .curate import Curation, MultiStateSample, curate_multistate, readback
from .image import Image, image_l1, read_ppm, write_ppm
from .render import render, render_tensors
from .splats import SplatSet, concat_splats, parse_asplat, read_asplat, write_asplat

__all__ = [
    "PALETTE", "gt_splats", "voxel_colors", "Camera", "fibonacci_cameras", "fibonacci_directions",
    "look_at_camera", "Curation", "MultiStateSample", "curate_multistate", "readback", "Image", "image_l1",
    "read_ppm", "write_ppm", "render", "render_tensors", "SplatSet", "concat_splats", "parse_asplat",
    "read_asplat", "write_asplat",
]
