"""Rectified-flow latent prior with classifier-free guidance.

Training regresses the straight-path velocity ``z1 - z0`` at
``z_t = (1 - t) z0 + t z1``; sampling integrates ``dz/dt = v`` with Euler
steps from noise at ``t = 0`` to data at ``t = 1``.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ShapeMismatch
from ..numerics import Adam, Tensor, concat, no_grad
from .layers import DTYPE, Params, add_mlp, mlp, time_embedding


@dataclass(frozen=True)
class FlowConfig:
    steps: int = 50
    cfg_scale: float = 3.0
    cond_dim: int = 4
    cond_dropout: float = 0.1
    hidden: int = 256
    n_layers: int = 3
    time_dim: int = 32

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.cfg_scale < 0:
            raise ValueError("cfg_scale must be >= 0")
        if not 0.0 <= self.cond_dropout <= 1.0:
            raise ValueError("cond_dropout must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FlowModel:
    params: Params
    config: FlowConfig
    dim: int
    cond_names: list = field(default_factory=list)
    history: list = field(default_factory=list)
    seconds: float = 0.0

    def velocity(self, z: np.ndarray, t, cond: np.ndarray) -> np.ndarray:
        with no_grad():
            return _velocity(self.params, self.config, Tensor(np.asarray(z, DTYPE)), t, cond).data

    def cond_index(self, name) -> int:
        if isinstance(name, (int, np.integer)):
            return int(name)
        if name not in self.cond_names:
            raise KeyError(f"unknown condition {name!r}; known: {self.cond_names}")
        return self.cond_names.index(name)


def init_flow(dim: int, cfg: FlowConfig, seed: int = 0) -> Params:
    rng = np.random.default_rng(seed)
    params = Params()
    sizes = [dim + cfg.time_dim + cfg.cond_dim] + [cfg.hidden] * (cfg.n_layers - 1) + [dim]
    add_mlp(params, rng, "vel", sizes, out_gain=0.1)
    return params


def _velocity(params, cfg: FlowConfig, z: Tensor, t, cond) -> Tensor:
    n = z.shape[0]
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (n,))
    cond = np.broadcast_to(np.asarray(cond, dtype=DTYPE), (n, cfg.cond_dim))
    h = concat([z, Tensor(time_embedding(t, cfg.time_dim).astype(DTYPE)), Tensor(np.ascontiguousarray(cond))], axis=1)
    return mlp(params, "vel", h, cfg.n_layers)


def one_hot(index, n: int) -> np.ndarray:
    index = np.atleast_1d(np.asarray(index))
    out = np.zeros((len(index), n), dtype=DTYPE)
    valid = index >= 0
    out[np.flatnonzero(valid), index[valid]] = 1.0
    return out


def fm_loss(params, cfg: FlowConfig, z1: np.ndarray, cond: np.ndarray, rng) -> Tensor:
    """Mean squared velocity error for one batch; rows of ``cond`` are dropped at random."""
    n = len(z1)
    z0 = rng.standard_normal(z1.shape).astype(DTYPE)
    t = rng.random(n)
    zt = (1.0 - t[:, None]) * z0 + t[:, None] * z1
    keep = (rng.random(n) >= cfg.cond_dropout)[:, None]
    v = _velocity(params, cfg, Tensor(zt.astype(DTYPE)), t, cond * keep)
    diff = v - (z1 - z0).astype(DTYPE)
    return (diff * diff).mean()


def fm_train(latents, conds=None, cfg: FlowConfig = FlowConfig(), seed: int = 0, steps: int = 2000,
             lr: float = 1e-4, batch_size: int = 64, cond_names=None, log_every: int = 0, log=print) -> FlowModel:
    """Fit a velocity network to ``latents`` ``(N, D)``; ``conds`` are class indices or None."""
    z = np.asarray(latents, dtype=DTYPE)
    if z.ndim != 2:
        raise ShapeMismatch(f"latents must be (N, D), got {z.shape}")
    n, dim = z.shape
    cond = np.zeros((n, cfg.cond_dim), dtype=DTYPE) if conds is None else one_hot(conds, cfg.cond_dim)
    params = init_flow(dim, cfg, seed)
    opt = Adam(params.tensors(), lr=lr)
    rng = np.random.default_rng(seed + 1)
    history = []
    t0 = time.perf_counter()
    for step in range(steps):
        idx = rng.integers(0, n, size=batch_size)
        opt.zero_grad()
        loss = fm_loss(params, cfg, z[idx], cond[idx], rng)
        loss.backward()
        opt.step()
        history.append(float(loss.data))
        if log_every and (step % log_every == 0 or step == steps - 1):
            log(f"step {step:5d} fm={history[-1]:.5f}")
    return FlowModel(params, cfg, dim, list(cond_names or []), history, time.perf_counter() - t0)


def euler_integrate(velocity, z0: np.ndarray, steps: int, cond=None, cfg_scale: float = 0.0) -> np.ndarray:
    """Integrate ``velocity(z, t, cond)`` from t=0 to 1 with guided Euler steps.

    With a condition the step uses ``v_u + s (v_c - v_u)``, where ``v_u`` is
    evaluated with the null (all-zero) condition.
    """
    z = np.array(z0, dtype=np.float64)
    dt = 1.0 / steps
    for i in range(steps):
        t = i * dt
        v_u = velocity(z, t, None if cond is None else np.zeros_like(cond))
        if cond is None:
            v = v_u
        else:
            v_c = velocity(z, t, cond)
            v = v_u + cfg_scale * (v_c - v_u)
        z = z + dt * v
    return z


def fm_sample(model: FlowModel, cond=None, n: int = 1, seed: int = 0, steps: int | None = None,
              cfg_scale: float | None = None) -> np.ndarray:
    """``n`` samples ``(n, D)``; ``cond`` is a class index/name, a list of them, or None."""
    cfg = model.config
    steps = cfg.steps if steps is None else steps
    scale = cfg.cfg_scale if cfg_scale is None else cfg_scale
    if steps < 1 or scale < 0:
        raise ValueError("steps must be >= 1 and cfg_scale >= 0")
    rng = np.random.default_rng(seed)
    z0 = rng.standard_normal((n, model.dim))
    onehot = None
    if cond is not None:
        if isinstance(cond, (list, tuple, np.ndarray)):
            idx = np.array([model.cond_index(c) for c in cond])
            if len(idx) != n:
                raise ShapeMismatch("need one condition per sample")
        else:
            idx = np.full(n, model.cond_index(cond))
        onehot = one_hot(idx, cfg.cond_dim)

    def velocity(z, t, c):
        return model.velocity(z, t, np.zeros((len(z), cfg.cond_dim)) if c is None else c).astype(np.float64)

    return euler_integrate(velocity, z0, steps, onehot, scale)


def flow_checkpoint(model: FlowModel, kind: str = "flow", extra: dict | None = None) -> tuple:
    meta = {"kind": kind, "config": model.config.to_dict(), "dim": model.dim, "cond_names": model.cond_names}
    meta.update(extra or {})
    return model.params.arrays(), meta


def flow_from_checkpoint(tensors: dict, meta: dict, prefix: str = "") -> FlowModel:
    names = [k for k in tensors if k.startswith(prefix + "vel.")]
    arrays = {k[len(prefix):]: tensors[k] for k in names}
    return FlowModel(Params.from_arrays(arrays), FlowConfig(**meta["config"]), int(meta["dim"]), list(meta.get("cond_names", [])))
