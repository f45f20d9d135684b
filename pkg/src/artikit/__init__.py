"""Articulated 3D object modeling over sparse voxel latents."""

__version__ = "0.1.0"
