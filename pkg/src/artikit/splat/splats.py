"""Gaussian splat sets and the ASPLAT1 text format."""

from __future__ import annotations

import io
from dataclasses import dataclass, fields

import numpy as np

from ..errors import FormatError, ValidationError

ASPLAT_MAGIC = "ASPLAT1"
ASPLAT_VERSION = 1
SCALE_MIN, SCALE_MAX = 1e-4, 1.0


@dataclass(frozen=True, eq=False)
class SplatSet:
    """Structure-of-arrays Gaussians. Quaternions are ``(w, x, y, z)``."""

    means: np.ndarray  # (G, 3)
    scales: np.ndarray  # (G, 3)
    quats: np.ndarray  # (G, 4)
    opacities: np.ndarray  # (G,)
    colors: np.ndarray  # (G, 3)
    voxel_index: np.ndarray  # (G,)

    def __post_init__(self):
        for f in fields(self):
            dtype = np.int64 if f.name == "voxel_index" else np.float64
            object.__setattr__(self, f.name, np.asarray(getattr(self, f.name), dtype=dtype))
        g = len(self.means)
        shapes = {"means": (g, 3), "scales": (g, 3), "quats": (g, 4), "opacities": (g,), "colors": (g, 3), "voxel_index": (g,)}
        for name, shape in shapes.items():
            if getattr(self, name).shape != shape:
                raise ValidationError(f"splat field {name} has shape {getattr(self, name).shape}, expected {shape}")

    def __len__(self) -> int:
        return len(self.means)

    @classmethod
    def empty(cls) -> "SplatSet":
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 4)), np.zeros(0), np.zeros((0, 3)), np.zeros(0, np.int64))

    def replace(self, **changes) -> "SplatSet":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return SplatSet(**values)

    def take(self, idx) -> "SplatSet":
        return SplatSet(**{f.name: getattr(self, f.name)[idx] for f in fields(self)})

    def validate(self) -> None:
        norms = np.linalg.norm(self.quats, axis=1)
        if len(self) and np.abs(norms - 1.0).max() > 1e-6:
            raise ValidationError("splat quaternions must be unit length")
        if len(self) and (self.scales.min() < SCALE_MIN * (1 - 1e-6) or self.scales.max() > SCALE_MAX):
            raise ValidationError(f"splat scales must lie in [{SCALE_MIN}, {SCALE_MAX}]")
        for name in ("opacities", "colors"):
            a = getattr(self, name)
            if len(a) and (a.min() < 0.0 or a.max() > 1.0):
                raise ValidationError(f"splat {name} must lie in [0, 1]")
        if not all(np.isfinite(getattr(self, f.name)).all() for f in fields(self)):
            raise ValidationError("splat set contains non-finite values")

    def rows(self) -> np.ndarray:
        """``(G, 14)`` float block in file column order (without voxel_index)."""
        return np.column_stack([self.means, self.scales, self.quats, self.opacities, self.colors])


def concat_splats(sets) -> SplatSet:
    sets = list(sets)
    if not sets:
        return SplatSet.empty()
    return SplatSet(**{f.name: np.concatenate([getattr(s, f.name) for s in sets]) for f in fields(SplatSet)})


# --- ASPLAT1 ---------------------------------------------------------------
# Values are stored at single precision with 9 significant digits, which
# round-trips float32 exactly, so write -> read -> write is byte-identical.

def asplat_text(splats: SplatSet) -> str:
    buf = io.StringIO()
    buf.write(f"{ASPLAT_MAGIC} {len(splats)}\n")
    if len(splats):
        vals = splats.rows().astype(np.float32).astype(np.float64)
        block = np.column_stack([vals, splats.voxel_index.astype(np.float64)])
        np.savetxt(buf, block, fmt=["%.9g"] * 14 + ["%d"], delimiter=" ")
    return buf.getvalue()


def parse_asplat(text: str) -> SplatSet:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(ASPLAT_MAGIC):
        raise FormatError("not an ASPLAT1 file")
    head = lines[0].split()
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(head) > 1 and int(head[1]) != len(body):
        raise FormatError(f"header announces {head[1]} splats, found {len(body)}")
    if not body:
        return SplatSet.empty()
    try:
        arr = np.loadtxt(io.StringIO("\n".join(body)), dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise FormatError(f"malformed splat line: {exc}") from exc
    if arr.shape[1] != 15:
        raise FormatError(f"expected 15 columns per splat, got {arr.shape[1]}")
    vals = arr[:, :14].astype(np.float32).astype(np.float64)
    return SplatSet(vals[:, 0:3], vals[:, 3:6], vals[:, 6:10], vals[:, 10], vals[:, 11:14], arr[:, 14].astype(np.int64))


def write_asplat(splats: SplatSet, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(asplat_text(splats))


def read_asplat(path) -> SplatSet:
    with open(path, encoding="ascii") as fh:
        return parse_asplat(fh.read())
