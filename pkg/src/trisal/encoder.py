"""Five-stage feature extractor shared by the RGB, flow and depth streams.

Each stream is an independent copy of the same architecture: five residual
stages with stride 2 each (tap points at strides 2, 4, 8, 16, 32), an
atrous pyramid on the deepest stage, and a per-level 1x1 channel
compression so every pyramid level carries the same channel count.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F


@dataclass(frozen=True)
class EncoderConfig:
    stage_widths: tuple[int, ...] = (16, 32, 64, 96, 128)
    aspp_rates: tuple[int, ...] = (1, 2, 4)
    compressed_channels: int = 64

    def __post_init__(self):
        if len(self.stage_widths) != 5:
            raise ValueError("stage_widths must list exactly 5 stages")
        if any(b < a for a, b in zip(self.stage_widths, self.stage_widths[1:])):
            raise ValueError("stage_widths must be nondecreasing")
        if self.compressed_channels < 1:
            raise ValueError("compressed_channels must be >= 1")
        if not self.aspp_rates or any(r < 1 for r in self.aspp_rates):
            raise ValueError("aspp_rates must be positive")


@dataclass
class FeaturePyramid:
    """Five per-level feature maps at strides 2, 4, 8, 16, 32.

    ``levels[i]`` has shape [B, C, H/2^(i+1), W/2^(i+1)] with a shared
    channel count C (64 under the default config). ``modality`` is one of
    'r', 'f', 'd' for the raw streams or 'df' for the fused pyramid.
    """

    levels: list[torch.Tensor]
    modality: str

    def validate(self) -> "FeaturePyramid":
        if len(self.levels) != 5:
            raise ValueError(f"expected 5 levels, got {len(self.levels)}")
        c = self.levels[0].shape[-3]
        for i, lvl in enumerate(self.levels):
            if lvl.shape[-3] != c:
                raise ValueError("pyramid levels disagree on channel count")
            if i > 0:
                ph, pw = self.levels[i - 1].shape[-2:]
                if lvl.shape[-2:] != (ph // 2, pw // 2):
                    raise ValueError(f"level {i + 1} does not halve the previous level")
        return self

    @property
    def channels(self) -> int:
        return self.levels[0].shape[-3]


def _aligned(a: FeaturePyramid, b: FeaturePyramid) -> None:
    for la, lb in zip(a.levels, b.levels):
        if la.shape != lb.shape:
            raise ValueError(f"misaligned pyramids: {tuple(la.shape)} vs {tuple(lb.shape)}")


class ConvBlock(nn.Module):
    """3x3 conv + GroupNorm + ReLU; dilation keeps the spatial size."""

    def __init__(self, cin: int, cout: int, stride: int = 1, dilation: int = 1):
        super().__init__()
        self.conv = nn.Conv2d(cin, cout, 3, stride=stride, padding=dilation, dilation=dilation)
        self.norm = nn.GroupNorm(1, cout)

    def forward(self, x):
        return F.relu(self.norm(self.conv(x)))


class ResidualStage(nn.Module):
    """Stride-2 downsample followed by one residual block."""

    def __init__(self, cin: int, cout: int):
        super().__init__()
        self.down = ConvBlock(cin, cout, stride=2)
        self.conv1 = nn.Conv2d(cout, cout, 3, padding=1)
        self.norm1 = nn.GroupNorm(1, cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1)
        self.norm2 = nn.GroupNorm(1, cout)

    def forward(self, x):
        x = self.down(x)
        y = F.relu(self.norm1(self.conv1(x)))
        y = self.norm2(self.conv2(y))
        return F.relu(x + y)


class AsppLite(nn.Module):
    """Parallel dilated 3x3 branches plus a global-average branch.

    Output spatial size equals input spatial size (padding matches each
    dilation rate).
    """

    def __init__(self, channels: int, rates: tuple[int, ...]):
        super().__init__()
        self.branches = nn.ModuleList(ConvBlock(channels, channels, dilation=r) for r in rates)
        self.global_proj = nn.Conv2d(channels, channels, 1)
        self.project = ConvBlock((len(rates) + 1) * channels, channels)

    def forward(self, x):
        outs = [branch(x) for branch in self.branches]
        g = F.relu(self.global_proj(x.mean(dim=(-2, -1), keepdim=True)))
        outs.append(g.expand(*g.shape[:-2], *x.shape[-2:]))
        return self.project(torch.cat(outs, dim=-3))


class ChannelCompressor(nn.Module):
    """Linear 1x1 projection bringing a level to the shared channel count."""

    def __init__(self, cin: int, cout: int):
        super().__init__()
        self.proj = nn.Conv2d(cin, cout, 1)

    def forward(self, x):
        return self.proj(x)


class PyramidEncoder(nn.Module):
    """One encoder stream producing a compressed five-level pyramid."""

    def __init__(self, config: EncoderConfig, modality: str):
        super().__init__()
        self.config = config
        self.modality = modality
        widths = config.stage_widths
        ins = (3,) + widths[:-1]
        self.stages = nn.ModuleList(ResidualStage(i, o) for i, o in zip(ins, widths))
        self.aspp = AsppLite(widths[-1], config.aspp_rates)
        self.compress = nn.ModuleList(
            ChannelCompressor(w, config.compressed_channels) for w in widths
        )

    def forward(self, image: torch.Tensor) -> FeaturePyramid:
        h, w = image.shape[-2:]
        if h % 32 != 0 or w % 32 != 0:
            raise ValueError(f"input size {h}x{w} must be a multiple of 32")
        levels = []
        x = image
        for i, stage in enumerate(self.stages):
            x = stage(x)
            tap = self.aspp(x) if i == 4 else x
            levels.append(self.compress[i](tap))
        return FeaturePyramid(levels=levels, modality=self.modality).validate()
