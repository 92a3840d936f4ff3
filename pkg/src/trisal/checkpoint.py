"""Checkpoint container: a torch-serialized dict, documented and versioned.

Layout::

    {
        "format": 1,
        "stage": "pretrain_depth" | "pretrain_flow" | "pretrain_rgb" | "finetune",
        "step": <int>,
        "config_hash": <16-hex-char digest of the training config>,
        "model_config": <nested dict mirroring ModelConfig>,
        "input_size": [H, W],
        "model": <full model state_dict, keys = module paths>,
        "optimizer": <SGD state_dict or None>,
    }

Model keys start with the owning module: ``encoders.rgb.``,
``encoders.flow.``, ``encoders.depth.``, ``weight_map_gen.``,
``coarse_flow_head.``, ``coarse_depth_head.``, ``rgb_head.``,
``rgb_fuse.`` and ``decoder.``. Saving the same state twice produces
byte-identical files.
"""

from __future__ import annotations

import io
from dataclasses import asdict
from pathlib import Path

import torch

from .encoder import EncoderConfig
from .network import ModelConfig

FORMAT_VERSION = 1


def model_config_from_dict(d: dict) -> ModelConfig:
    enc = d.get("encoder", {})
    return ModelConfig(
        encoder=EncoderConfig(
            stage_widths=tuple(enc.get("stage_widths", (16, 32, 64, 96, 128))),
            aspp_rates=tuple(enc.get("aspp_rates", (1, 2, 4))),
            compressed_channels=enc.get("compressed_channels", 64),
        ),
        use_selective_fusion=d.get("use_selective_fusion", True),
        use_axis_attention=d.get("use_axis_attention", True),
        supervise_weight_map=d.get("supervise_weight_map", True),
    )


def save_checkpoint(
    path: str | Path,
    model: torch.nn.Module,
    optimizer: torch.optim.Optimizer | None,
    stage: str,
    step: int,
    config_hash: str,
    model_config: ModelConfig,
    input_size: tuple[int, int],
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": FORMAT_VERSION,
        "stage": stage,
        "step": step,
        "config_hash": config_hash,
        "model_config": asdict(model_config),
        "input_size": list(input_size),
        "model": model.state_dict(),
        "optimizer": optimizer.state_dict() if optimizer is not None else None,
    }
    # serialize through a buffer so the bytes do not depend on the file name
    buffer = io.BytesIO()
    torch.save(payload, buffer)
    path.write_bytes(buffer.getvalue())
    return path


def load_checkpoint(path: str | Path) -> dict:
    payload = torch.load(Path(path), map_location="cpu", weights_only=False)
    if payload.get("format") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format in {path}")
    return payload
