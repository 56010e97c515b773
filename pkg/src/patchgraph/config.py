"""Training configuration and its ``key = value`` text format."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError


@dataclass
class TrainConfig:
    # optimisation
    steps: int = 2000
    batch_size: int = 1
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    # objective
    lambda_g: float = 1.0
    temperature: float = 0.07
    normalize_embeddings: bool = True
    # graph
    hops: int = 2
    threshold: float = 0.1
    num_patches: int = 256
    pooling_levels: int = 1
    keep_ratio: float = 0.25
    normalize_scores: bool = False
    # architecture
    image_size: int = 64
    image_channels: int = 3
    encoder_channels: tuple = (32, 64, 64)
    generator_channels: int = 16
    generator_res_blocks: int = 2
    discriminator_channels: int = 16
    head_dim: int = 64
    embed_dim: int = 256
    # bookkeeping
    data_seed: int = 0
    model_seed: int = 0
    log_interval: int = 1
    checkpoint_interval: int = 0

    def validate(self):
        positive = ["steps", "batch_size", "lr", "temperature", "num_patches", "image_size",
                    "image_channels", "generator_channels", "discriminator_channels",
                    "head_dim", "embed_dim", "log_interval"]
        for name in positive:
            value = getattr(self, name)
            if not value > 0 and not (name == "steps" and value == 0):
                raise ConfigError(f"{name} must be positive, got {value!r}")
        for name in ("hops", "pooling_levels", "generator_res_blocks", "checkpoint_interval"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.lambda_g < 0:
            raise ConfigError("lambda_g must be non-negative")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("beta1 and beta2 must lie in [0, 1)")
        if not -1.0 <= self.threshold <= 1.0:
            raise ConfigError("threshold must lie in [-1, 1]")
        if not 0.0 < self.keep_ratio <= 1.0:
            raise ConfigError("keep_ratio must lie in (0, 1]")
        if len(self.encoder_channels) != 3 or min(self.encoder_channels) <= 0:
            raise ConfigError("encoder_channels needs three positive widths")
        if self.image_size % 4:
            raise ConfigError("image_size must be divisible by 4")
        n = self.num_patches
        for level in range(self.pooling_levels):
            n = pooled_count(n, self.keep_ratio)
            if n < 2:
                raise ConfigError(
                    f"pooling level {level + 1} keeps {n} node(s); keep_ratio * N must be >= 2")
        grid = (self.image_size // 4) ** 2
        if self.num_patches > grid:
            raise ConfigError(
                f"num_patches={self.num_patches} exceeds the smallest tap grid ({grid} positions)")
        return self

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def pooled_count(n, keep_ratio):
    """Nodes kept by top-K pooling: ``round(keep_ratio * n)``, halves rounded up."""
    return int(math.floor(keep_ratio * n + 0.5))


_BOOLS = {"true": True, "false": False}


def _field_types():
    return {f.name: type(f.default) for f in fields(TrainConfig)}


def _parse_value(key, kind, text):
    try:
        if kind is bool:
            if text.lower() not in _BOOLS:
                raise ValueError(text)
            return _BOOLS[text.lower()]
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is tuple:
            return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r}") from None
    raise ConfigError(f"unsupported field type for {key}")


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def parse_config(text, base=None):
    """Parse ``key = value`` lines on top of ``base`` (defaults when omitted)."""
    kinds = _field_types()
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in kinds:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, kinds[key], value)
    cfg = dataclasses.replace(base or TrainConfig(), **values)
    return cfg.validate()


def format_config(cfg):
    lines = [f"{f.name} = {_format_value(getattr(cfg, f.name))}" for f in fields(cfg)]
    return "\n".join(lines) + "\n"


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def save_config(cfg, path):
    Path(path).write_text(format_config(cfg))


def toy_config(base=None):
    """16x16 instance small enough for finite-difference checks."""
    base = base or TrainConfig()
    return base.replace(
        image_size=16, num_patches=min(base.num_patches, 16),
        encoder_channels=(4, 6, 6), generator_channels=4, generator_res_blocks=1,
        discriminator_channels=4, head_dim=8, embed_dim=8,
    ).validate()
