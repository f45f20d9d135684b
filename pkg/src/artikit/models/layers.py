"""Parameter containers and small building blocks shared by the networks."""

from __future__ import annotations

import math

import numpy as np

from ..numerics import Tensor

DTYPE = np.float32


class Params(dict):
    """Ordered ``name -> Tensor`` map of trainable leaves."""

    def tensors(self) -> list:
        return list(self.values())

    def arrays(self) -> dict:
        return {k: v.data for k, v in self.items()}

    def copy_arrays(self) -> dict:
        return {k: v.data.copy() for k, v in self.items()}

    def count(self) -> int:
        return int(sum(v.data.size for v in self.values()))

    @classmethod
    def from_arrays(cls, arrays: dict, names=None, dtype=DTYPE) -> "Params":
        names = names or list(arrays)
        return cls((k, Tensor(np.array(arrays[k], dtype=dtype), requires_grad=True)) for k in names)


def he_normal(rng, shape, fan_in, gain=math.sqrt(2.0), dtype=DTYPE) -> Tensor:
    w = rng.normal(0.0, gain / math.sqrt(fan_in), size=shape).astype(dtype)
    return Tensor(w, requires_grad=True)


def zeros(shape, dtype=DTYPE, fill=0.0) -> Tensor:
    return Tensor(np.full(shape, fill, dtype=dtype), requires_grad=True)


def add_linear(params: Params, rng, name: str, n_in: int, n_out: int, gain=math.sqrt(2.0)):
    params[f"{name}.w"] = he_normal(rng, (n_in, n_out), n_in, gain)
    params[f"{name}.b"] = zeros((n_out,))


def linear(params: Params, name: str, x: Tensor) -> Tensor:
    return x @ params[f"{name}.w"] + params[f"{name}.b"]


def add_mlp(params: Params, rng, name: str, sizes, out_gain=1.0):
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        last = i == len(sizes) - 2
        add_linear(params, rng, f"{name}.{i}", a, b, out_gain if last else math.sqrt(2.0))


def mlp(params: Params, name: str, x: Tensor, n_layers: int, act="silu") -> Tensor:
    for i in range(n_layers):
        x = linear(params, f"{name}.{i}", x)
        if i < n_layers - 1:
            x = silu(x) if act == "silu" else x.relu()
    return x


def silu(x: Tensor) -> Tensor:
    return x * x.sigmoid()


def time_embedding(t: np.ndarray, dim: int) -> np.ndarray:
    """Sinusoidal features of scalar times in [0, 1]."""
    half = dim // 2
    freqs = np.exp(np.linspace(0.0, math.log(1000.0), half))
    ang = np.asarray(t, dtype=np.float64)[:, None] * freqs[None]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)
