"""Selective fusion: weight map, blend identities, pseudo ground truth."""

import numpy as np
import pytest
import torch

from trisal import (
    EncoderConfig,
    FeaturePyramid,
    PyramidEncoder,
    WeightMapGenerator,
    normalize01,
    pseudo_gt,
    selective_fuse,
    split_sw,
)
from trisal.psf import CoarseHead, SpatialWeightMap, downsample_mask

from reference import pseudo_gt_reference


def _pyramids(channels=8, h=64, w=64, batch=1, seed=0):
    torch.manual_seed(seed)
    cfg = EncoderConfig(stage_widths=(4, 6, 8, 8, 8), compressed_channels=channels)
    flow = PyramidEncoder(cfg, "f")
    depth = PyramidEncoder(cfg, "d")
    x = torch.rand(batch, 3, h, w)
    y = torch.rand(batch, 3, h, w)
    return flow(x), depth(y)


def _const_swm(like: FeaturePyramid, value: float) -> SpatialWeightMap:
    per = [torch.full((l.shape[0], 1, *l.shape[-2:]), value) for l in like.levels]
    return SpatialWeightMap(sw=per[0], per_level=per)


class TestWeightMapGeneration:
    def test_values_strictly_inside_unit_interval(self):
        f, d = _pyramids()
        swm = WeightMapGenerator(8)(f, d)
        assert swm.sw.min() > 0 and swm.sw.max() < 1

    def test_per_level_shapes(self):
        f, d = _pyramids(h=64, w=96)
        swm = WeightMapGenerator(8)(f, d)
        assert swm.sw.shape == (1, 1, 32, 48)
        assert swm.per_level[4].shape == (1, 1, 2, 3)
        for lvl, m in zip(f.levels, swm.per_level):
            assert m.shape[-2:] == lvl.shape[-2:]

    def test_misaligned_pyramids_rejected(self):
        f, _ = _pyramids(h=64, w=64)
        _, d = _pyramids(h=96, w=96)
        with pytest.raises(ValueError, match="misaligned"):
            WeightMapGenerator(8)(f, d)

    def test_batch_order_invariance(self):
        f, d = _pyramids(batch=2, seed=4)
        gen = WeightMapGenerator(8)
        fwd = gen(f, d).sw
        f_rev = FeaturePyramid([l.flip(0) for l in f.levels], "f")
        d_rev = FeaturePyramid([l.flip(0) for l in d.levels], "d")
        rev = gen(f_rev, d_rev).sw
        assert torch.equal(fwd, rev.flip(0))


class TestSelectiveFuse:
    def test_all_ones_returns_flow_exactly(self):
        f, d = _pyramids()
        fused = selective_fuse(f, d, _const_swm(f, 1.0))
        for out, src in zip(fused.levels, f.levels):
            assert torch.equal(out, src)
        assert fused.modality == "df"

    def test_all_zeros_returns_depth_exactly(self):
        f, d = _pyramids()
        fused = selective_fuse(f, d, _const_swm(f, 0.0))
        for out, src in zip(fused.levels, d.levels):
            assert torch.equal(out, src)

    def test_midpoint_blend_of_constants(self):
        f, d = _pyramids()
        f2 = FeaturePyramid([torch.full_like(l, 2.0) for l in f.levels], "f")
        d4 = FeaturePyramid([torch.full_like(l, 4.0) for l in d.levels], "d")
        fused = selective_fuse(f2, d4, _const_swm(f, 0.5))
        for out in fused.levels:
            assert torch.allclose(out, torch.full_like(out, 3.0))

    def test_convex_combination_bound(self, rng):
        f, d = _pyramids(seed=2)
        f64 = FeaturePyramid([torch.as_tensor(rng.normal(size=l.shape)) for l in f.levels], "f")
        d64 = FeaturePyramid([torch.as_tensor(rng.normal(size=l.shape)) for l in d.levels], "d")
        per = [torch.as_tensor(rng.random((l.shape[0], 1, *l.shape[-2:]))) for l in f.levels]
        swm = SpatialWeightMap(sw=per[0], per_level=per)
        fused = selective_fuse(f64, d64, swm)
        for out, a, b in zip(fused.levels, f64.levels, d64.levels):
            lo = torch.minimum(a, b)
            hi = torch.maximum(a, b)
            assert (out >= lo - 1e-12).all()
            assert (out <= hi + 1e-12).all()


class TestCoarseHead:
    def test_output_range_and_size(self):
        f, _ = _pyramids(h=64, w=96)
        out = CoarseHead(8)(f)
        assert out.shape == (1, 1, 64, 96)
        assert out.min() > 0 and out.max() < 1


class TestNormalize01:
    def test_min_max_scaling(self):
        x = torch.tensor([[0.2, 0.7], [0.45, 0.45]])
        out = normalize01(x)
        assert out.min() == 0 and out.max() == 1

    def test_constant_maps_to_zero(self):
        assert torch.equal(normalize01(torch.full((4, 4), 0.3)), torch.zeros(4, 4))

    def test_binary_map_unchanged(self):
        gt = (torch.rand(8, 8) > 0.5).float()
        gt[0, 0], gt[0, 1] = 0.0, 1.0
        assert torch.equal(normalize01(gt), gt)

    def test_batched_maps_normalized_independently(self):
        a = torch.rand(1, 1, 4, 4) * 0.2 + 0.1
        b = torch.rand(1, 1, 4, 4) * 5.0
        out = normalize01(torch.cat([a, b]))
        for i in range(2):
            assert out[i].min() == 0 and out[i].max() == 1

    def test_nan_rejected(self):
        x = torch.ones(3, 3)
        x[1, 1] = float("nan")
        with pytest.raises(ValueError, match="NaN"):
            normalize01(x)


class TestPseudoGt:
    def test_flow_wins_at_salient_pixel(self):
        out = pseudo_gt(torch.tensor([[0.8]]), torch.tensor([[0.3]]), torch.tensor([[1.0]]))
        assert out.item() == 1.0

    def test_flow_wins_at_background_pixel(self):
        out = pseudo_gt(torch.tensor([[0.2]]), torch.tensor([[0.6]]), torch.tensor([[0.0]]))
        assert out.item() == 1.0

    def test_ties_select_depth(self):
        s = torch.rand(5, 5)
        gt = (torch.rand(5, 5) > 0.5).float()
        assert torch.equal(pseudo_gt(s, s, gt), torch.zeros(5, 5))

    def test_non_binary_gt_rejected(self):
        with pytest.raises(ValueError, match="binary"):
            pseudo_gt(torch.rand(3, 3), torch.rand(3, 3), torch.full((3, 3), 0.5))

    def test_matches_case_table_oracle(self, rng):
        for _ in range(25):
            s_f = rng.random((16, 16))
            s_d = rng.random((16, 16))
            gt = (rng.random((16, 16)) < 0.5).astype(np.float64)
            got = pseudo_gt(
                torch.as_tensor(s_f), torch.as_tensor(s_d), torch.as_tensor(gt)
            ).numpy()
            assert np.array_equal(got, pseudo_gt_reference(s_f, s_d, gt))

    def test_region_isolation(self, rng):
        # perturbing predictions inside GT=1 never moves pgt at GT=0 pixels
        s_f = torch.as_tensor(rng.random((8, 8)))
        s_d = torch.as_tensor(rng.random((8, 8)))
        gt = torch.as_tensor((rng.random((8, 8)) < 0.5).astype(np.float64))
        base = pseudo_gt(s_f, s_d, gt)
        s_f2 = s_f.clone()
        s_f2[gt == 1] = torch.as_tensor(rng.random(int((gt == 1).sum())))
        flipped = pseudo_gt(s_f2, s_d, gt)
        assert torch.equal(base[gt == 0], flipped[gt == 0])

    def test_exchange_antisymmetry(self, rng):
        s_f = torch.as_tensor(rng.random((8, 8)))
        s_d = torch.as_tensor(rng.random((8, 8)))
        gt = torch.as_tensor((rng.random((8, 8)) < 0.5).astype(np.float64))
        a = pseudo_gt(s_f, s_d, gt)
        b = pseudo_gt(s_d, s_f, gt)
        differs = s_f != s_d
        assert torch.equal(a[differs], 1.0 - b[differs])
        assert torch.equal(a[~differs], b[~differs])


class TestSplitSw:
    def test_parts_sum_to_whole(self, rng):
        sw = torch.as_tensor(rng.random((1, 1, 8, 8)))
        gt = torch.as_tensor((rng.random((1, 1, 8, 8)) < 0.5).astype(np.float64))
        s, ns = split_sw(sw, gt)
        assert torch.allclose(s + ns, sw)

    def test_all_salient_zeroes_complement(self):
        sw = torch.rand(1, 1, 4, 4)
        s, ns = split_sw(sw, torch.ones(1, 1, 4, 4))
        assert torch.equal(ns, torch.zeros_like(sw))
        assert torch.equal(s, sw)

    def test_all_background_zeroes_salient_part(self):
        sw = torch.rand(1, 1, 4, 4)
        s, ns = split_sw(sw, torch.zeros(1, 1, 4, 4))
        assert torch.equal(s, torch.zeros_like(sw))
        assert torch.equal(ns, sw)


def test_downsample_mask_keeps_binarity():
    gt = (torch.rand(1, 1, 64, 64) > 0.5).float()
    small = downsample_mask(gt, (32, 32))
    assert small.shape == (1, 1, 32, 32)
    assert torch.all((small == 0) | (small == 1))
