"""Run configuration: flat ``key = value`` files with strict key checking."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .networks import FULL_CHANNELS, TINY_CHANNELS
from .objectives import LossWeights

SEED_ENV = "SKETCHMATCH_SEED"


@dataclass
class RunConfig:
    image_size: int = 128
    patch_mode: bool = False
    patch_size: int = 32
    patch_stride: int = 16
    gen_channels: tuple = FULL_CHANNELS
    disc_channels: tuple = FULL_CHANNELS
    input_skip: bool = True
    feature_dim: int = 1024
    lambda_adv: float = 1.0
    lambda_rec: float = 100.0
    lambda_trip: float = 1.0
    lambda_attr: float = 0.5
    margin: float = 0.5
    optimizer: str = "adam"
    lr: float = 2e-3
    warmup_steps: int = 0
    lr_schedule: str = "constant"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 10
    max_steps: int = 0
    batch_size: int = 4
    seed: int = 0
    precision: str = "f64"
    save_every: int = 0
    augment: bool = False
    holdout: bool = False
    cmc_k: int = 10

    def __post_init__(self):
        self.validate()

    @classmethod
    def tiny(cls, **overrides):
        """Small-channel configuration mirroring the full topology."""
        base = dict(gen_channels=TINY_CHANNELS, disc_channels=TINY_CHANNELS)
        base.update(overrides)
        return cls(**base)

    @property
    def dtype(self):
        return {"f64": "float64", "f32": "float32"}[self.precision]

    @property
    def loss_weights(self):
        return LossWeights(self.lambda_adv, self.lambda_rec, self.lambda_trip, self.lambda_attr, self.margin)

    def validate(self):
        self.gen_channels = tuple(int(c) for c in self.gen_channels)
        self.disc_channels = tuple(int(c) for c in self.disc_channels)
        problems = []
        if self.image_size < 1:
            problems.append("image_size must be positive")
        if any(c < 1 for c in self.gen_channels + self.disc_channels) or not self.gen_channels or not self.disc_channels:
            problems.append("channel widths must be positive")
        m = 2 ** len(self.gen_channels)
        if self.image_size % m:
            problems.append(f"image_size must be divisible by 2^{len(self.gen_channels)}")
        if self.patch_mode:
            if not 1 <= self.patch_stride <= self.patch_size <= self.image_size:
                problems.append("need 1 <= patch_stride <= patch_size <= image_size")
            elif (self.image_size - self.patch_size) % self.patch_stride:
                problems.append("(image_size - patch_size) must be divisible by patch_stride")
            if self.patch_size % m:
                problems.append(f"patch_size must be divisible by 2^{len(self.gen_channels)}")
        if self.optimizer not in ("adam", "sgd"):
            problems.append(f"optimizer must be adam or sgd, got {self.optimizer!r}")
        if self.lr_schedule not in ("constant", "cosine"):
            problems.append(f"lr_schedule must be constant or cosine, got {self.lr_schedule!r}")
        if self.precision not in ("f64", "f32"):
            problems.append(f"precision must be f64 or f32, got {self.precision!r}")
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 0 or self.max_steps < 0 or self.warmup_steps < 0:
            problems.append("lr and batch_size must be positive; epochs, max_steps and warmup_steps non-negative")
        if self.cmc_k < 1:
            problems.append("cmc_k must be >= 1")
        try:
            self.loss_weights
        except ValueError as exc:
            problems.append(str(exc))
        if problems:
            raise ConfigError("invalid configuration: " + "; ".join(problems))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_text(self):
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(c) for c in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def _coerce(name, raw, default):
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(int(v) for v in raw.replace(" ", "").split(",") if v)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config(text, env=None):
    """Parse config text; unknown keys and malformed lines are rejected."""
    defaults = RunConfig()
    known = {f.name for f in dataclasses.fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw, getattr(defaults, key))
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        values["seed"] = _coerce("seed", env[SEED_ENV], 0)
    return RunConfig(**values)


def load_config(path=None, env=None):
    text = Path(path).read_text(encoding="utf-8") if path else ""
    return parse_config(text, env)
