"""Training configuration and the plain-text key-value config format.

Config files hold one ``key = value`` pair per line with ``#`` comments.
Tuples are comma-separated (``input_size = 448,448``), booleans are
``true``/``false``. Keys match the TrainConfig / model fields below.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .encoder import EncoderConfig
from .network import ModelConfig

STAGES = ("pretrain_depth", "pretrain_flow", "pretrain_rgb", "finetune")


@dataclass(frozen=True)
class TrainConfig:
    stage: str = "finetune"
    lr_backbone: float = 1e-5
    lr_other: float = 1e-4
    momentum: float = 0.9
    weight_decay: float = 0.0
    batch_size: int = 8
    input_size: tuple[int, int] = (448, 448)
    epochs: int = 70
    max_steps: int | None = None
    seed: int = 0
    augment: bool = True
    require_pretrained: bool = True
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        if self.lr_backbone <= 0 or self.lr_other <= 0:
            raise ValueError("learning rates must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")
        h, w = self.input_size
        if h % 32 != 0 or w % 32 != 0 or h < 32 or w < 32:
            raise ValueError(f"input_size {h}x{w} must be a positive multiple of 32")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be positive when set")

    @classmethod
    def desk_profile(cls, **overrides) -> "TrainConfig":
        """Small CPU-friendly profile used by tests and quick experiments."""
        base = cls(
            lr_backbone=0.02,
            lr_other=0.05,
            batch_size=8,
            input_size=(64, 64),
            epochs=1,
            max_steps=200,
            augment=False,
            model=ModelConfig(
                encoder=EncoderConfig(
                    stage_widths=(8, 16, 32, 48, 64), compressed_channels=32
                )
            ),
        )
        return replace(base, **overrides)

    @classmethod
    def full_profile(cls, **overrides) -> "TrainConfig":
        """Full-scale profile: 448x448 inputs, default widths, 70 epochs."""
        return replace(cls(), **overrides)

    def hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


_TRAIN_KEYS = {
    "stage": str,
    "lr_backbone": float,
    "lr_other": float,
    "momentum": float,
    "weight_decay": float,
    "batch_size": int,
    "epochs": int,
    "max_steps": int,
    "seed": int,
    "augment": bool,
    "require_pretrained": bool,
}
_MODEL_KEYS = {
    "use_selective_fusion": bool,
    "use_axis_attention": bool,
    "supervise_weight_map": bool,
}
_ENCODER_KEYS = {"compressed_channels": int}


def _parse_scalar(val: str, typ):
    if typ is bool:
        if val.lower() in ("true", "1", "yes", "on"):
            return True
        if val.lower() in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"expected boolean, got {val!r}")
    return typ(val)


def _parse_int_tuple(val: str) -> tuple[int, ...]:
    sep = "x" if "x" in val else ","
    return tuple(int(v.strip()) for v in val.split(sep))


def parse_config(path: str | Path, base: TrainConfig | None = None) -> TrainConfig:
    """Read a key-value config file on top of ``base`` (default profile)."""
    cfg = base or TrainConfig()
    train: dict = {}
    model: dict = {}
    enc: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = (s.strip() for s in line.partition("="))
        if key in _TRAIN_KEYS:
            train[key] = _parse_scalar(val, _TRAIN_KEYS[key])
        elif key == "input_size":
            size = _parse_int_tuple(val)
            if len(size) != 2:
                raise ValueError(f"{path}:{lineno}: input_size needs two values")
            train["input_size"] = size
        elif key in _MODEL_KEYS:
            model[key] = _parse_scalar(val, _MODEL_KEYS[key])
        elif key == "stage_widths":
            enc["stage_widths"] = _parse_int_tuple(val)
        elif key == "aspp_rates":
            enc["aspp_rates"] = _parse_int_tuple(val)
        elif key in _ENCODER_KEYS:
            enc[key] = _parse_scalar(val, _ENCODER_KEYS[key])
        else:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")

    if enc:
        model["encoder"] = replace(cfg.model.encoder, **enc)
    if model:
        train["model"] = replace(cfg.model, **model)
    return replace(cfg, **train)
