"""Rendered images, binary PPM I/O and image losses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import FormatError, SizeMismatch


@dataclass(frozen=True, eq=False)
class Image:
    rgb: np.ndarray  # (H, W, 3) premultiplied over a black background
    alpha: np.ndarray  # (H, W)
    depth: np.ndarray  # (H, W) expected depth of the covering splats, 0 where empty
    skipped: int = 0  # splats dropped for degenerate screen-space covariance

    @property
    def size(self) -> tuple:
        return self.rgb.shape[1], self.rgb.shape[0]


def _rgb(x) -> np.ndarray:
    return x.rgb if isinstance(x, Image) else np.asarray(x, dtype=np.float64)


def image_l1(a, b) -> float:
    """Mean absolute per-channel difference."""
    a, b = _rgb(a), _rgb(b)
    if a.shape != b.shape:
        raise SizeMismatch(f"image sizes differ: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).mean())


def to_bytes8(rgb) -> np.ndarray:
    return np.round(np.clip(_rgb(rgb), 0.0, 1.0) * 255.0).astype(np.uint8)


def ppm_bytes(rgb) -> bytes:
    px = to_bytes8(rgb)
    h, w = px.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + px.tobytes()


def parse_ppm(buf: bytes) -> np.ndarray:
    """P6 bytes -> float RGB in [0, 1]."""
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if buf[pos:pos + 1] == b"#":
            pos = buf.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PPM header")
        tokens.append(buf[start:pos])
    if tokens[0] != b"P6" or int(tokens[3]) != 255:
        raise FormatError("only 8-bit binary PPM (P6) is supported")
    w, h = int(tokens[1]), int(tokens[2])
    data = np.frombuffer(buf, dtype=np.uint8, offset=pos + 1)
    if data.size != w * h * 3:
        raise FormatError(f"PPM payload has {data.size} bytes, expected {w * h * 3}")
    return data.reshape(h, w, 3).astype(np.float64) / 255.0


def write_ppm(rgb, path) -> None:
    with open(path, "wb") as fh:
        fh.write(ppm_bytes(rgb))


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return parse_ppm(fh.read())
