"""Staged training, evaluation and inference.

Training happens in four stages: the depth and flow streams are
pre-trained with their coarse heads against GT, the RGB stream with a
temporary U-shaped head, and finally the whole network is fine-tuned on
the total objective. Every run is deterministic under its seed: batch
order, augmentation draws, weight init and therefore the loss trajectory
and the emitted checkpoints.
"""

from __future__ import annotations

import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import torch

from .checkpoint import load_checkpoint, model_config_from_dict, save_checkpoint
from .config import TrainConfig
from .data import DatasetIndex, SampleTriplet, augment, load_sample, stack_samples
from .losses import loss_bce_iou, loss_total
from .metrics import MetricReport, aggregate, f_beta_max, mae, s_measure
from .network import TrimodalSaliencyNet, stream_parameter_prefixes
from .psf import downsample_mask, normalize01, pseudo_gt

_STAGE_TO_STREAM = {
    "pretrain_depth": "depth",
    "pretrain_flow": "flow",
    "pretrain_rgb": "rgb",
}


def build_model(config: TrainConfig) -> TrimodalSaliencyNet:
    """Construct the network with weights seeded from the config."""
    torch.manual_seed(config.seed)
    return TrimodalSaliencyNet(config.model)


class _SampleCache:
    """Bounded in-memory cache of decoded samples (index is immutable)."""

    def __init__(self, index: DatasetIndex, size: tuple[int, int], capacity: int = 512):
        self.index = index
        self.size = size
        self.capacity = capacity
        self._store: dict[int, SampleTriplet] = {}

    def __getitem__(self, i: int) -> SampleTriplet:
        if i not in self._store:
            if len(self._store) >= self.capacity:
                self._store.pop(next(iter(self._store)))
            self._store[i] = load_sample(self.index, i, self.size)
        return self._store[i]


def _batches(n: int, batch_size: int, total_steps: int, rng: np.random.Generator):
    """Yield ``total_steps`` batches of indices, reshuffling every epoch."""
    emitted = 0
    while emitted < total_steps:
        perm = rng.permutation(n)
        for start in range(0, n, batch_size):
            if emitted >= total_steps:
                return
            yield perm[start : start + batch_size].tolist()
            emitted += 1


def _total_steps(config: TrainConfig, n: int) -> int:
    if config.max_steps is not None:
        return config.max_steps
    return config.epochs * math.ceil(n / config.batch_size)


def _param_groups(model: TrimodalSaliencyNet, config: TrainConfig, stage: str):
    """Backbone parameters train at lr_backbone, the rest at lr_other."""
    if stage in _STAGE_TO_STREAM:
        prefixes = stream_parameter_prefixes(_STAGE_TO_STREAM[stage])
    else:
        prefixes = None  # finetune: everything except the temporary RGB head
    backbone, other = [], []
    for name, p in model.named_parameters():
        if prefixes is not None and not any(name.startswith(pre) for pre in prefixes):
            continue
        if prefixes is None and name.startswith("rgb_head."):
            continue
        (backbone if name.startswith("encoders.") else other).append(p)
    return [
        {"params": backbone, "lr": config.lr_backbone},
        {"params": other, "lr": config.lr_other},
    ]


def _make_optimizer(model, config, stage):
    return torch.optim.SGD(
        _param_groups(model, config, stage),
        momentum=config.momentum,
        weight_decay=config.weight_decay,
    )


def _log_line(fh, record: dict) -> None:
    fh.write(json.dumps(record) + "\n")
    fh.flush()


def _run_stage(
    model: TrimodalSaliencyNet,
    config: TrainConfig,
    index: DatasetIndex,
    out_dir: Path,
) -> Path:
    torch.manual_seed(config.seed)
    torch.use_deterministic_algorithms(True)
    model.train()
    stage = config.stage
    stream = _STAGE_TO_STREAM.get(stage)
    optimizer = _make_optimizer(model, config, stage)
    cache = _SampleCache(index, config.input_size)
    order_rng = np.random.default_rng(config.seed)
    augment_rng = np.random.default_rng(config.seed + 1)
    n = len(index)
    total = _total_steps(config, n)
    out_dir.mkdir(parents=True, exist_ok=True)

    with open(out_dir / "train_log.jsonl", "a") as log:
        for step, batch_ids in enumerate(_batches(n, config.batch_size, total, order_rng), 1):
            samples = [cache[i] for i in batch_ids]
            if config.augment:
                samples = [augment(s, augment_rng) for s in samples]
            rgb, flow, depth, gt = stack_samples(samples)

            optimizer.zero_grad()
            if stream is not None:
                image = {"rgb": rgb, "flow": flow, "depth": depth}[stream]
                pred = model.coarse_prediction(stream, image)
                loss = loss_bce_iou(pred, gt)
                record = {"stage": stage, "step": step, "loss": float(loss.detach())}
            else:
                out = model(rgb, flow, depth)
                pgt = sw = None
                if model.config.use_selective_fusion:
                    pgt_full = pseudo_gt(
                        normalize01(out.coarse_flow.detach()),
                        normalize01(out.coarse_depth.detach()),
                        gt,
                    )
                    sw = out.weight_map.sw
                    pgt = downsample_mask(pgt_full, sw.shape[-2:])
                loss, report = loss_total(
                    out.maps,
                    gt,
                    s_d=out.coarse_depth,
                    s_f=out.coarse_flow,
                    sw=sw,
                    pgt=pgt,
                    psf_supervision=model.config.use_selective_fusion,
                    sw_supervision=model.config.supervise_weight_map,
                )
                record = {"stage": stage, "step": step, **report.as_dict()}

            if not math.isfinite(float(loss.detach())):
                raise RuntimeError(f"training diverged (non-finite loss) at step {step}")
            loss.backward()
            optimizer.step()
            _log_line(log, record)

    return save_checkpoint(
        out_dir / f"{stage}.pt",
        model,
        optimizer,
        stage=stage,
        step=total,
        config_hash=config.hash(),
        model_config=config.model,
        input_size=config.input_size,
    )


def pretrain_stream(
    modality: str, config: TrainConfig, index: DatasetIndex, out_dir: str | Path
) -> Path:
    """Pre-train one stream (encoder + its head) against GT."""
    if modality not in ("depth", "flow", "rgb"):
        raise ValueError(f"unknown modality {modality!r}")
    stage = f"pretrain_{modality}"
    cfg = config if config.stage == stage else _with_stage(config, stage)
    model = build_model(cfg)
    return _run_stage(model, cfg, index, Path(out_dir))


def _with_stage(config: TrainConfig, stage: str) -> TrainConfig:
    return replace(config, stage=stage)


def finetune(
    config: TrainConfig,
    index: DatasetIndex,
    pretrained: dict[str, str | Path] | None,
    out_dir: str | Path,
) -> Path:
    """End-to-end optimization, seeded from the three stream checkpoints."""
    cfg = _with_stage(config, "finetune")
    model = build_model(cfg)
    needed = ("depth", "flow", "rgb") if cfg.model.use_selective_fusion else ("rgb",)
    pretrained = pretrained or {}
    missing = [m for m in needed if m not in pretrained]
    if missing and cfg.require_pretrained:
        raise ValueError(
            f"finetune requires pretrained checkpoints for {missing}; "
            "set require_pretrained = false to start from scratch"
        )
    for stream, path in pretrained.items():
        _load_stream_weights(model, stream, path)
    return _run_stage(model, cfg, index, Path(out_dir))


def _load_stream_weights(model: TrimodalSaliencyNet, stream: str, path: str | Path) -> None:
    payload = load_checkpoint(path)
    expected = f"pretrain_{stream}"
    if payload["stage"] != expected:
        raise ValueError(f"{path} holds stage {payload['stage']!r}, expected {expected!r}")
    prefixes = stream_parameter_prefixes(stream)
    subset = {k: v for k, v in payload["model"].items() if k.startswith(prefixes)}
    if not subset:
        raise ValueError(f"{path} contains no weights for stream {stream!r}")
    missing, unexpected = model.load_state_dict(subset, strict=False)
    if unexpected:
        raise ValueError(f"unexpected keys from {path}: {unexpected[:3]}")


def load_model(checkpoint_path: str | Path) -> tuple[TrimodalSaliencyNet, dict]:
    """Rebuild a network from a checkpoint; returns (model, payload)."""
    payload = load_checkpoint(checkpoint_path)
    model = TrimodalSaliencyNet(model_config_from_dict(payload["model_config"]))
    model.load_state_dict(payload["model"])
    model.eval()
    return model, payload


def evaluate_predictions(index: DatasetIndex, predict_fn, size: tuple[int, int]) -> MetricReport:
    """Score ``predict_fn(sample) -> [1,H,W] map`` over an index.

    Frames are visited in index order and reduced in that fixed order, so
    repeated runs produce identical reports.
    """
    rows = []
    for i in range(len(index)):
        sample = load_sample(index, i, size)
        pred = predict_fn(sample)
        rows.append(
            (
                sample.sequence_id,
                s_measure(pred, sample.gt),
                f_beta_max(pred, sample.gt),
                mae(pred, sample.gt),
            )
        )
    return aggregate(rows)


def run_eval(
    checkpoint_path: str | Path, index: DatasetIndex, size: tuple[int, int] | None = None
) -> MetricReport:
    """Evaluate a checkpoint over an index (typically the test split)."""
    model, payload = load_model(checkpoint_path)
    eval_size = size or tuple(payload["input_size"])

    @torch.no_grad()
    def predict(sample: SampleTriplet) -> torch.Tensor:
        out = model(sample.rgb[None], sample.flow[None], sample.depth[None])
        return out.prediction[0]

    return evaluate_predictions(index, predict, eval_size)


def run_inference(
    checkpoint_path: str | Path,
    index: DatasetIndex,
    out_dir: str | Path,
    size: tuple[int, int] | None = None,
) -> list[Path]:
    """Write the final saliency map per frame as 8-bit grayscale PNGs."""
    from PIL import Image

    model, payload = load_model(checkpoint_path)
    eval_size = size or tuple(payload["input_size"])
    out_root = Path(out_dir)
    written = []
    with torch.no_grad():
        for i in range(len(index)):
            sample = load_sample(index, i, eval_size)
            out = model(sample.rgb[None], sample.flow[None], sample.depth[None])
            arr = (out.prediction[0, 0].numpy() * 255.0).round().astype(np.uint8)
            path = out_root / sample.sequence_id / f"{sample.frame_index:05d}.png"
            path.parent.mkdir(parents=True, exist_ok=True)
            Image.fromarray(arr, mode="L").save(path)
            written.append(path)
    return written
