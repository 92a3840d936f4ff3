"""Shared fixtures: tiny synthetic datasets and small model configs."""

import numpy as np
import pytest
import torch

from trisal import EncoderConfig, FixtureSpec, ModelConfig, make_fixture


@pytest.fixture(autouse=True)
def _fixed_torch_seed():
    torch.manual_seed(0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def clean_dataset(tmp_path_factory):
    """An 8-frame single-square fixture in the standard layout."""
    root = tmp_path_factory.mktemp("clean_data")
    index = make_fixture(FixtureSpec(), seed=7, root=root)
    return root, index


@pytest.fixture
def tiny_encoder_config():
    return EncoderConfig(stage_widths=(4, 6, 8, 8, 8), compressed_channels=8)


@pytest.fixture
def tiny_model_config(tiny_encoder_config):
    return ModelConfig(encoder=tiny_encoder_config)


def random_pred_gt(rng, h=16, w=16):
    """A random saliency map and a random (non-degenerate) binary mask."""
    pred = rng.random((h, w))
    gt = (rng.random((h, w)) < 0.4).astype(np.float64)
    if gt.sum() == 0:
        gt[h // 2, w // 2] = 1.0
    if gt.sum() == gt.size:
        gt[0, 0] = 0.0
    return pred, gt
