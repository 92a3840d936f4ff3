"""Weight-map and feature visualizations (grayscale + heatmap PNGs)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .data import DatasetIndex, load_sample
from .harness import load_model
from .psf import downsample_mask, normalize01, split_sw


def _to_gray(arr: torch.Tensor) -> Image.Image:
    a = (arr.detach().squeeze().numpy() * 255.0).round().astype(np.uint8)
    return Image.fromarray(a, mode="L")


def _to_heatmap(feature: torch.Tensor) -> Image.Image:
    """Channel-mean of a feature map, min-max scaled, jet colormap."""
    from matplotlib import cm

    fmap = feature.detach().mean(dim=-3).squeeze()
    fmap = normalize01(fmap).numpy()
    rgba = cm.jet(fmap)
    return Image.fromarray((rgba[..., :3] * 255.0).round().astype(np.uint8))


def _strip(images: list[Image.Image], scale: int = 4) -> Image.Image:
    """Nearest-upscaled side-by-side strip for quick inspection."""
    ims = [im.convert("RGB").resize((im.width * scale, im.height * scale), Image.NEAREST)
           for im in images]
    strip = Image.new("RGB", (sum(im.width for im in ims), max(im.height for im in ims)))
    x = 0
    for im in ims:
        strip.paste(im, (x, 0))
        x += im.width
    return strip


@torch.no_grad()
def visualize_weight_map(
    checkpoint_path: str | Path,
    index: DatasetIndex,
    out_dir: str | Path,
    frame: int = 0,
    size: tuple[int, int] | None = None,
) -> dict[str, Path]:
    """Write the deepest-level weight map, its GT split and the feature
    heatmaps (flow, depth, fused) for one frame."""
    model, payload = load_model(checkpoint_path)
    if not model.config.use_selective_fusion:
        raise ValueError("checkpoint was trained without the selective-fusion stage")
    eval_size = size or tuple(payload["input_size"])
    sample = load_sample(index, frame, eval_size)

    flow_pyr = model.encode("flow", sample.flow[None])
    depth_pyr = model.encode("depth", sample.depth[None])
    fused_pyr, swm = model.fuse_motion_depth(flow_pyr, depth_pyr)

    sw5 = swm.per_level[4]
    gt5 = downsample_mask(sample.gt[None], sw5.shape[-2:])
    sw_s, sw_ns = split_sw(sw5, gt5)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tag = f"{sample.sequence_id}_{sample.frame_index:05d}"
    grays = {
        "sw5": _to_gray(sw5),
        "sw5_salient": _to_gray(sw_s),
        "sw5_nonsalient": _to_gray(sw_ns),
    }
    heats = {
        "feat_flow5": _to_heatmap(flow_pyr.levels[4]),
        "feat_depth5": _to_heatmap(depth_pyr.levels[4]),
        "feat_fused5": _to_heatmap(fused_pyr.levels[4]),
    }
    written = {}
    for name, im in {**grays, **heats}.items():
        path = out / f"{tag}_{name}.png"
        im.save(path)
        written[name] = path
    panel = _strip(list(grays.values()) + list(heats.values()))
    panel_path = out / f"{tag}_panel.png"
    panel.save(panel_path)
    written["panel"] = panel_path
    return written
