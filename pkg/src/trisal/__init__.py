"""Trimodal (RGB / optical-flow / depth) video salient-object detection
with pixel-level selective fusion and multi-axis attention."""

from .config import TrainConfig, parse_config
from .data import DatasetIndex, SampleTriplet, augment, load_dataset, load_sample
from .decoder import DecoderOutput, UDecoder
from .encoder import EncoderConfig, FeaturePyramid, PyramidEncoder
from .fixtures import FixtureSpec, corrupted_variant, make_fixture
from .losses import LossReport, loss_bce_iou, loss_decoder, loss_psf, loss_total
from .metrics import MetricReport, f_beta_max, mae, s_measure
from .msam import AxisGate, MultiAxisAttention, pool_axis
from .network import ModelConfig, NetworkOutput, TrimodalSaliencyNet
from .psf import (
    CoarseHead,
    SpatialWeightMap,
    WeightMapGenerator,
    normalize01,
    pseudo_gt,
    selective_fuse,
    split_sw,
)

__version__ = "0.1.0"

__all__ = [
    "AxisGate",
    "CoarseHead",
    "DatasetIndex",
    "DecoderOutput",
    "EncoderConfig",
    "FeaturePyramid",
    "FixtureSpec",
    "LossReport",
    "MetricReport",
    "ModelConfig",
    "MultiAxisAttention",
    "NetworkOutput",
    "PyramidEncoder",
    "SampleTriplet",
    "SpatialWeightMap",
    "TrainConfig",
    "TrimodalSaliencyNet",
    "UDecoder",
    "WeightMapGenerator",
    "augment",
    "corrupted_variant",
    "f_beta_max",
    "load_dataset",
    "load_sample",
    "loss_bce_iou",
    "loss_decoder",
    "loss_psf",
    "loss_total",
    "mae",
    "make_fixture",
    "normalize01",
    "parse_config",
    "pool_axis",
    "pseudo_gt",
    "s_measure",
    "selective_fuse",
    "split_sw",
]
