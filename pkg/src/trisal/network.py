"""Full trimodal network: three encoders, selective fusion, axis attention
and the U-shaped decoder, with ablation wiring for the baseline variants."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn

from .decoder import DecoderOutput, UDecoder
from .encoder import ConvBlock, EncoderConfig, FeaturePyramid, PyramidEncoder
from .msam import MultiAxisAttention
from .psf import CoarseHead, SpatialWeightMap, WeightMapGenerator, selective_fuse

STREAMS = ("rgb", "flow", "depth")


@dataclass(frozen=True)
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    use_selective_fusion: bool = True   # off: concat+conv replaces the weighted blend
    use_axis_attention: bool = True     # off: concat+conv replaces the attention fusion
    supervise_weight_map: bool = True   # off: weight map trains without pseudo-GT guidance


@dataclass
class NetworkOutput:
    """Everything one forward pass produces.

    ``weight_map``, ``coarse_flow`` and ``coarse_depth`` are None when the
    selective-fusion stage is ablated away.
    """

    maps: DecoderOutput
    weight_map: SpatialWeightMap | None = None
    coarse_flow: torch.Tensor | None = None
    coarse_depth: torch.Tensor | None = None

    @property
    def prediction(self) -> torch.Tensor:
        return self.maps.prediction


class TrimodalSaliencyNet(nn.Module):
    """Per-frame saliency from an (RGB, flow rendering, depth) triple."""

    def __init__(self, config: ModelConfig | None = None):
        super().__init__()
        self.config = config or ModelConfig()
        c = self.config.encoder.compressed_channels
        self.encoders = nn.ModuleDict(
            {name: PyramidEncoder(self.config.encoder, name[0]) for name in STREAMS}
        )
        if self.config.use_selective_fusion:
            self.weight_map_gen = WeightMapGenerator(c)
            self.coarse_flow_head = CoarseHead(c)
            self.coarse_depth_head = CoarseHead(c)
        else:
            self.motion_depth_fuse = nn.ModuleList(ConvBlock(2 * c, c) for _ in range(5))
        if self.config.use_axis_attention:
            self.rgb_fuse = nn.ModuleList(MultiAxisAttention(c) for _ in range(5))
        else:
            self.rgb_fuse = nn.ModuleList(ConvBlock(2 * c, c) for _ in range(5))
        # temporary head for the RGB pre-training stage; unused afterwards
        self.rgb_head = CoarseHead(c)
        self.decoder = UDecoder(c)

    def encode(self, stream: str, image: torch.Tensor) -> FeaturePyramid:
        return self.encoders[stream](image)

    def coarse_prediction(self, stream: str, image: torch.Tensor) -> torch.Tensor:
        """Stream-only saliency map, used during stage-wise pre-training."""
        pyr = self.encode(stream, image)
        if stream == "rgb":
            return self.rgb_head(pyr)
        if not self.config.use_selective_fusion:
            raise ValueError("coarse heads do not exist in the baseline wiring")
        head = self.coarse_flow_head if stream == "flow" else self.coarse_depth_head
        return head(pyr)

    def fuse_motion_depth(
        self, flow_pyr: FeaturePyramid, depth_pyr: FeaturePyramid
    ) -> tuple[FeaturePyramid, SpatialWeightMap | None]:
        if self.config.use_selective_fusion:
            swm = self.weight_map_gen(flow_pyr, depth_pyr)
            return selective_fuse(flow_pyr, depth_pyr, swm), swm
        fused = [
            conv(torch.cat([f, d], dim=-3))
            for conv, f, d in zip(self.motion_depth_fuse, flow_pyr.levels, depth_pyr.levels)
        ]
        return FeaturePyramid(levels=fused, modality="df"), None

    def forward(
        self, rgb: torch.Tensor, flow: torch.Tensor, depth: torch.Tensor
    ) -> NetworkOutput:
        rgb_pyr = self.encode("rgb", rgb)
        flow_pyr = self.encode("flow", flow)
        depth_pyr = self.encode("depth", depth)

        df_pyr, swm = self.fuse_motion_depth(flow_pyr, depth_pyr)

        if self.config.use_axis_attention:
            fused = [
                att(r, df) for att, r, df in zip(self.rgb_fuse, rgb_pyr.levels, df_pyr.levels)
            ]
        else:
            fused = [
                conv(torch.cat([r, df], dim=-3))
                for conv, r, df in zip(self.rgb_fuse, rgb_pyr.levels, df_pyr.levels)
            ]

        maps = self.decoder(fused, rgb.shape[-2:])

        coarse_f = coarse_d = None
        if self.config.use_selective_fusion:
            coarse_f = self.coarse_flow_head(flow_pyr)
            coarse_d = self.coarse_depth_head(depth_pyr)
        return NetworkOutput(
            maps=maps, weight_map=swm, coarse_flow=coarse_f, coarse_depth=coarse_d
        )


def stream_parameter_prefixes(stage: str) -> tuple[str, ...]:
    """state_dict key prefixes owned by one pre-training stage."""
    if stage == "rgb":
        return ("encoders.rgb.", "rgb_head.")
    if stage == "flow":
        return ("encoders.flow.", "coarse_flow_head.")
    if stage == "depth":
        return ("encoders.depth.", "coarse_depth_head.")
    raise ValueError(f"unknown stream {stage!r}")
