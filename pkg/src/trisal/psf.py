"""Pixel-level selective fusion of the flow and depth pyramids.

A learned spatial weight map decides, per pixel, how much to trust the
flow features versus the depth features. During training the map is
supervised by a binary pseudo ground truth built from the two coarse
stream predictions and the real GT: 1 selects flow, 0 selects depth.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .encoder import ConvBlock, FeaturePyramid, _aligned


@dataclass
class SpatialWeightMap:
    """Normalized weight map at stride 2 plus its five per-level resizes.

    ``sw`` has shape [B, 1, H/2, W/2] with sigmoid-range values;
    ``per_level[i]`` is its bilinear resize to the level-(i+1) size.
    """

    sw: torch.Tensor
    per_level: list[torch.Tensor]

    def validate(self) -> "SpatialWeightMap":
        if len(self.per_level) != 5:
            raise ValueError("expected 5 per-level maps")
        if self.sw.min() < 0 or self.sw.max() > 1:
            raise ValueError("weight map values must lie in [0, 1]")
        return self


class WeightMapGenerator(nn.Module):
    """Aggregate the flow+depth pyramids top-down into one weight map.

    Per level the two modalities are channel-concatenated and convolved;
    deeper levels are enlarged by x2 bilinear interpolation and
    concatenated onto the next-shallower level. A final 1x1 conv +
    sigmoid yields the map at stride-2 resolution.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.lateral = nn.ModuleList(ConvBlock(2 * channels, channels) for _ in range(5))
        self.merge = nn.ModuleList(ConvBlock(2 * channels, channels) for _ in range(4))
        self.head = nn.Conv2d(channels, 1, 1)

    def forward(self, flow_pyr: FeaturePyramid, depth_pyr: FeaturePyramid) -> SpatialWeightMap:
        _aligned(flow_pyr, depth_pyr)
        lat = [
            self.lateral[i](torch.cat([f, d], dim=-3))
            for i, (f, d) in enumerate(zip(flow_pyr.levels, depth_pyr.levels))
        ]
        x = lat[4]
        for i in range(3, -1, -1):
            up = F.interpolate(x, size=lat[i].shape[-2:], mode="bilinear", align_corners=False)
            x = self.merge[i](torch.cat([lat[i], up], dim=-3))
        sw = torch.sigmoid(self.head(x))
        per_level = [
            sw if lvl.shape[-2:] == sw.shape[-2:]
            else F.interpolate(sw, size=lvl.shape[-2:], mode="bilinear", align_corners=False)
            for lvl in flow_pyr.levels
        ]
        return SpatialWeightMap(sw=sw, per_level=per_level).validate()


def selective_fuse(
    flow_pyr: FeaturePyramid, depth_pyr: FeaturePyramid, swm: SpatialWeightMap
) -> FeaturePyramid:
    """Per-level convex blend: w * flow + (1 - w) * depth.

    The single-channel weight map broadcasts across the feature channels,
    so every fused element lies between the two source elements.
    """
    _aligned(flow_pyr, depth_pyr)
    fused = [
        w * f + (1.0 - w) * d
        for w, f, d in zip(swm.per_level, flow_pyr.levels, depth_pyr.levels)
    ]
    return FeaturePyramid(levels=fused, modality="df").validate()


class CoarseHead(nn.Module):
    """Integrate one pyramid top-down into a full-resolution saliency map.

    Used for the coarse flow/depth predictions that feed the pseudo GT and
    for the temporary RGB head during stream pre-training.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.start = ConvBlock(channels, channels)
        self.merge = nn.ModuleList(ConvBlock(2 * channels, channels) for _ in range(4))
        self.head = nn.Conv2d(channels, 1, 1)

    def forward(self, pyr: FeaturePyramid) -> torch.Tensor:
        x = self.start(pyr.levels[4])
        for i in range(3, -1, -1):
            lvl = pyr.levels[i]
            up = F.interpolate(x, size=lvl.shape[-2:], mode="bilinear", align_corners=False)
            x = self.merge[i](torch.cat([lvl, up], dim=-3))
        sal = torch.sigmoid(self.head(x))
        h, w = pyr.levels[0].shape[-2:]
        return F.interpolate(sal, size=(2 * h, 2 * w), mode="bilinear", align_corners=False)


def normalize01(x: torch.Tensor) -> torch.Tensor:
    """Min-max scale each map to [0, 1]; a constant map becomes all zeros.

    Batched inputs ([B, 1, H, W]) are normalized per map. NaNs are
    rejected.
    """
    if torch.isnan(x).any():
        raise ValueError("normalize01 received NaN values")
    dims = tuple(range(1, x.ndim)) if x.ndim == 4 else tuple(range(x.ndim))
    lo = x.amin(dim=dims, keepdim=True)
    hi = x.amax(dim=dims, keepdim=True)
    span = hi - lo
    out = torch.where(span > 0, (x - lo) / torch.where(span > 0, span, torch.ones_like(span)),
                      torch.zeros_like(x))
    return out


def pseudo_gt(s_f: torch.Tensor, s_d: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Binary map marking where flow should be trusted over depth.

    At salient pixels (GT=1) flow wins iff its coarse prediction is
    strictly larger; at non-salient pixels (GT=0) flow wins iff strictly
    smaller. Ties select depth everywhere, so identical predictions give
    an all-zero map.
    """
    if s_f.shape != s_d.shape or s_f.shape != gt.shape:
        raise ValueError("pseudo_gt inputs must share one shape")
    if not torch.all((gt == 0) | (gt == 1)):
        raise ValueError("gt must be binary")
    salient = (gt == 1) & (s_f > s_d)
    non_salient = (gt == 0) & (s_f < s_d)
    return (salient | non_salient).to(s_f.dtype)


def split_sw(sw5: torch.Tensor, gt: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Mask a weight map into its GT part and the complement part."""
    if not torch.all((gt == 0) | (gt == 1)):
        raise ValueError("gt must be binary")
    return sw5 * gt, sw5 * (1.0 - gt)


def downsample_mask(mask: torch.Tensor, size: tuple[int, int]) -> torch.Tensor:
    """Nearest-neighbor resize that keeps a binary mask binary."""
    if mask.shape[-2:] == size:
        return mask
    m = mask if mask.ndim == 4 else mask[None]
    out = F.interpolate(m, size=size, mode="nearest")
    return out if mask.ndim == 4 else out[0]
