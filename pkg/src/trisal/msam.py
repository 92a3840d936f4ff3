"""Multi-axis selective attention fusing RGB features with fused features.

Four parallel branches (width, height, spatial, channel) each pool both
inputs down to a descriptor along one axis, mix the descriptors, and
produce a pair of sigmoid gates that reweight the two full feature maps
before they are summed. The branch outputs are added together.
"""

from __future__ import annotations

import torch
import torch.nn as nn

AXES = ("width", "height", "spatial", "channel")


def pool_axis(feature: torch.Tensor, axis: str) -> torch.Tensor:
    """Average-pool one axis (or axes) of a [..., C, H, W] feature to 1.

    width:   mean over height   -> [..., C, 1, W]
    height:  mean over width    -> [..., C, H, 1]
    channel: mean over H and W  -> [..., C, 1, 1]
    spatial: mean over channels -> [..., 1, H, W]
    """
    if axis == "width":
        return feature.mean(dim=-2, keepdim=True)
    if axis == "height":
        return feature.mean(dim=-1, keepdim=True)
    if axis == "channel":
        return feature.mean(dim=(-2, -1), keepdim=True)
    if axis == "spatial":
        return feature.mean(dim=-3, keepdim=True)
    raise ValueError(f"unknown axis {axis!r}")


class AxisGate(nn.Module):
    """Weight perception for one axis: pooled descriptors -> dual gates.

    The two descriptors are channel-concatenated, mixed by a 1x1 conv,
    split back into equal halves, and each half passes through its own
    1x1 conv + sigmoid. The gates broadcast along the pooled dimensions.
    """

    def __init__(self, channels: int, axis: str):
        super().__init__()
        if axis not in AXES:
            raise ValueError(f"unknown axis {axis!r}")
        self.axis = axis
        vec = 1 if axis == "spatial" else channels
        self.mix = nn.Conv2d(2 * vec, 2 * vec, 1)
        self.gate_fused = nn.Conv2d(vec, vec, 1)
        self.gate_rgb = nn.Conv2d(vec, vec, 1)

    def forward(self, f_fused: torch.Tensor, f_rgb: torch.Tensor) -> torch.Tensor:
        if f_fused.shape != f_rgb.shape:
            raise ValueError("axis gate inputs must share one shape")
        w_fused = pool_axis(f_fused, self.axis)
        w_rgb = pool_axis(f_rgb, self.axis)
        mixed = self.mix(torch.cat([w_fused, w_rgb], dim=-3))
        x_fused, x_rgb = torch.chunk(mixed, 2, dim=-3)
        y_fused = torch.sigmoid(self.gate_fused(x_fused))
        y_rgb = torch.sigmoid(self.gate_rgb(x_rgb))
        return y_fused * f_fused + y_rgb * f_rgb


class MultiAxisAttention(nn.Module):
    """Sum of the four axis-gated combinations of (fused, RGB) features."""

    def __init__(self, channels: int):
        super().__init__()
        self.branches = nn.ModuleDict({axis: AxisGate(channels, axis) for axis in AXES})

    def forward(self, f_rgb: torch.Tensor, f_fused: torch.Tensor) -> torch.Tensor:
        return sum(self.branches[axis](f_fused, f_rgb) for axis in AXES)
