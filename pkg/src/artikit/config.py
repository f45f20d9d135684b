"""Pipeline defaults and the ``artikit.toml`` config file.

Values resolve as: explicit CLI flag, then the config file, then the
built-in default below. Unknown keys and wrongly typed values are rejected
when the file is loaded.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ValidationError

CONFIG_NAME = "artikit.toml"


@dataclass(frozen=True)
class PipelineConfig:
    resolution: int = 32
    eps: float = 0.1
    min_pts: int = 4
    alpha_kl: float = 0.001
    vae_steps: int = 2000
    vae_lr: float = 1e-4
    latent_channels: int = 4
    prior_steps: int = 2000
    prior_lr: float = 1e-4
    cfg_scale: float = 3.0
    steps: int = 50
    k: int = 8
    n: int = 48
    lam: float = 0.01
    finetune_epochs: int = 4
    finetune_lr: float = 1e-2
    image_size: int = 64
    preview_size: int = 256
    eval_states: int = 5
    seed: int = 0
    vae: str = "vae.atns"
    prior: str = "prior.atns"
    decoder: str = "decoder.atns"

    def validate(self) -> "PipelineConfig":
        positive = ("resolution", "min_pts", "vae_steps", "latent_channels", "prior_steps", "steps", "k", "n",
                    "image_size", "preview_size", "eval_states")
        for name in positive:
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        for name in ("eps", "vae_lr", "prior_lr", "finetune_lr"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be > 0")
        for name in ("alpha_kl", "cfg_scale", "lam", "finetune_epochs"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if self.resolution % 4:
            raise ValidationError("resolution must be divisible by 4")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def merged(self, overrides: dict) -> "PipelineConfig":
        """Apply non-None overrides (typically parsed CLI flags)."""
        known = {f.name for f in fields(self)}
        return replace(self, **{k: v for k, v in overrides.items() if k in known and v is not None}).validate()


def _coerce(name: str, value, default):
    kind = type(default)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise ValidationError(f"config key {name!r} must be {kind.__name__}, got {type(value).__name__}")
    return value


def parse_config(text: str) -> PipelineConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"bad config file: {exc}") from None
    base = PipelineConfig()
    defaults = base.to_dict()
    unknown = sorted(set(doc) - set(defaults))
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
    values = {k: _coerce(k, v, defaults[k]) for k, v in doc.items()}
    return replace(base, **values).validate()


def load_config(path=None) -> PipelineConfig:
    """Read ``path``, or ``./artikit.toml`` when it exists, else the defaults."""
    if path is None:
        path = Path(CONFIG_NAME)
        if not path.exists():
            return PipelineConfig()
    return parse_config(Path(path).read_text())
