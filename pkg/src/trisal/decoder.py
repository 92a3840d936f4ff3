"""U-shaped top-down decoder emitting five supervised saliency maps."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .encoder import ConvBlock


@dataclass
class DecoderOutput:
    """Five saliency maps, shallowest first, all at input resolution.

    ``maps[0]`` is the inference output; the deeper maps exist for
    deep supervision only.
    """

    maps: list[torch.Tensor]

    @property
    def prediction(self) -> torch.Tensor:
        return self.maps[0]

    def validate(self) -> "DecoderOutput":
        if len(self.maps) != 5:
            raise ValueError(f"expected 5 maps, got {len(self.maps)}")
        for m in self.maps:
            if m.min() < 0 or m.max() > 1:
                raise ValueError("saliency values must lie in [0, 1]")
        return self


class DecoderBlock(nn.Module):
    """Two 3x3 convolutions with pointwise nonlinearities."""

    def __init__(self, cin: int, cout: int):
        super().__init__()
        self.conv1 = ConvBlock(cin, cout)
        self.conv2 = ConvBlock(cout, cout)

    def forward(self, x):
        return self.conv2(self.conv1(x))


class UDecoder(nn.Module):
    """Aggregate five fused levels deep-to-shallow; one map per level.

    Information flows strictly top-down: the level-5 map depends only on
    the level-5 input. Each map is sigmoid-activated and bilinearly
    upsampled to the input resolution.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.start = DecoderBlock(channels, channels)
        self.blocks = nn.ModuleList(DecoderBlock(2 * channels, channels) for _ in range(4))
        self.heads = nn.ModuleList(nn.Conv2d(channels, 1, 1) for _ in range(5))

    def forward(self, fused: list[torch.Tensor], out_size: tuple[int, int]) -> DecoderOutput:
        if len(fused) != 5:
            raise ValueError(f"decoder expects 5 levels, got {len(fused)}")
        maps: list[torch.Tensor | None] = [None] * 5
        d = self.start(fused[4])
        maps[4] = self._emit(d, 4, out_size)
        for i in range(3, -1, -1):
            up = F.interpolate(d, size=fused[i].shape[-2:], mode="bilinear", align_corners=False)
            d = self.blocks[i](torch.cat([fused[i], up], dim=-3))
            maps[i] = self._emit(d, i, out_size)
        return DecoderOutput(maps=maps).validate()

    def _emit(self, d: torch.Tensor, i: int, out_size: tuple[int, int]) -> torch.Tensor:
        sal = torch.sigmoid(self.heads[i](d))
        if sal.shape[-2:] == out_size:
            return sal
        return F.interpolate(sal, size=out_size, mode="bilinear", align_corners=False)
