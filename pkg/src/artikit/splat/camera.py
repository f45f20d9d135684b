"""Pinhole cameras and Fibonacci-sphere view sampling.

Camera space has x to the right, y down and z along the viewing direction.
Pixel ``(row i, col j)`` has its center at image coordinates ``(j, i)`` and
the principal point sits at ``(W / 2, H / 2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError

DEFAULT_FOV = math.radians(40.0)
N_VIEWS = 48


@dataclass(frozen=True, eq=False)
class Camera:
    position: np.ndarray
    look_at: np.ndarray
    up: np.ndarray
    fov_y: float = DEFAULT_FOV
    width: int = 64
    height: int = 64

    def __post_init__(self):
        for name in ("position", "look_at", "up"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        self.validate()

    def validate(self) -> None:
        fwd = self.look_at - self.position
        if np.linalg.norm(fwd) < 1e-12:
            raise ValidationError("camera position coincides with its look-at point")
        if np.linalg.norm(np.cross(fwd / np.linalg.norm(fwd), self.up)) < 1e-9:
            raise ValidationError("camera up vector is parallel to the view direction")
        if not 0.0 < self.fov_y < math.pi:
            raise ValidationError("fov_y must lie in (0, pi)")
        if self.width < 1 or self.height < 1:
            raise ValidationError("image size must be positive")

    @property
    def rotation(self) -> np.ndarray:
        """World-to-camera rotation; rows are the camera x, y, z axes."""
        z = self.look_at - self.position
        z = z / np.linalg.norm(z)
        x = np.cross(z, self.up)
        x = x / np.linalg.norm(x)
        y = np.cross(z, x)
        return np.stack([x, y, z])

    @property
    def focal(self) -> float:
        return (self.height / 2.0) / math.tan(self.fov_y / 2.0)

    @property
    def principal(self) -> tuple:
        return self.width / 2.0, self.height / 2.0

    def to_camera(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.position) @ self.rotation.T

    def project(self, points):
        """World points -> (u, v, depth)."""
        pc = self.to_camera(points)
        f, (cx, cy) = self.focal, self.principal
        z = pc[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            return f * pc[:, 0] / z + cx, f * pc[:, 1] / z + cy, z

    def transformed(self, rotation, translation) -> "Camera":
        """The same camera after a rigid motion of the world."""
        r = np.asarray(rotation, dtype=np.float64)
        t = np.asarray(translation, dtype=np.float64)
        return Camera(r @ self.position + t, r @ self.look_at + t, r @ self.up, self.fov_y, self.width, self.height)

    def with_size(self, width: int, height: int) -> "Camera":
        return Camera(self.position, self.look_at, self.up, self.fov_y, width, height)

    def to_dict(self) -> dict:
        return {
            "position": self.position.tolist(), "look_at": self.look_at.tolist(), "up": self.up.tolist(),
            "fov_y": self.fov_y, "width": self.width, "height": self.height,
        }


def look_at_camera(position, target=(0.0, 0.0, 0.0), fov_y=DEFAULT_FOV, width=64, height=64) -> Camera:
    position = np.asarray(position, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    fwd = target - position
    fwd = fwd / np.linalg.norm(fwd)
    up = np.array([0.0, 0.0, 1.0]) if abs(fwd[2]) < 0.99 else np.array([0.0, 1.0, 0.0])
    return Camera(position, target, up, fov_y, width, height)


def fibonacci_directions(n: int) -> np.ndarray:
    """Unit vectors on a Fibonacci sphere; a single direction is the +z pole."""
    if n < 1:
        raise ValueError("need at least one camera")
    if n == 1:
        return np.array([[0.0, 0.0, 1.0]])
    i = np.arange(n)
    z = 1.0 - 2.0 * (i + 0.5) / n
    r = np.sqrt(1.0 - z * z)
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def fibonacci_cameras(n: int = N_VIEWS, radius: float = 2.0, target=(0.0, 0.0, 0.0),
                      fov_y=DEFAULT_FOV, width=64, height=64) -> list:
    target = np.asarray(target, dtype=np.float64)
    return [look_at_camera(target + radius * d, target, fov_y, width, height) for d in fibonacci_directions(n)]
