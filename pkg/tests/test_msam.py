"""Multi-axis attention: pooling semantics, gate algebra, branch bounds."""

import pytest
import torch

from trisal import AxisGate, MultiAxisAttention, pool_axis
from trisal.msam import AXES

from reference import central_difference


class TestPoolAxis:
    def test_shapes(self):
        x = torch.rand(64, 8, 16)
        assert pool_axis(x, "width").shape == (64, 1, 16)
        assert pool_axis(x, "height").shape == (64, 8, 1)
        assert pool_axis(x, "channel").shape == (64, 1, 1)
        assert pool_axis(x, "spatial").shape == (1, 8, 16)

    def test_batched_shapes(self):
        x = torch.rand(2, 64, 8, 16)
        assert pool_axis(x, "width").shape == (2, 64, 1, 16)
        assert pool_axis(x, "spatial").shape == (2, 1, 8, 16)

    def test_constant_input_pools_to_constant(self):
        x = torch.full((16, 6, 7), 0.37)
        for axis in AXES:
            pooled = pool_axis(x, axis)
            assert torch.allclose(pooled, torch.full_like(pooled, 0.37))

    def test_channel_pool_matches_naive_double_loop(self, rng):
        x = torch.as_tensor(rng.random((5, 6, 7)))
        pooled = pool_axis(x, "channel")
        for c in range(5):
            acc = 0.0
            for i in range(6):
                for j in range(7):
                    acc += float(x[c, i, j])
            assert abs(pooled[c, 0, 0].item() - acc / 42.0) < 1e-12

    def test_unknown_axis(self):
        with pytest.raises(ValueError):
            pool_axis(torch.rand(4, 4, 4), "depthwise")


class TestAxisGate:
    def test_zero_fused_input_reduces_to_gated_rgb(self):
        torch.manual_seed(1)
        gate = AxisGate(8, "width")
        f_r = torch.rand(1, 8, 6, 6)
        zero = torch.zeros_like(f_r)
        out = gate(zero, f_r)
        # replicate the gate's own right half to get the expected result
        mixed = gate.mix(torch.cat([pool_axis(zero, "width"), pool_axis(f_r, "width")], dim=-3))
        _, x_r = torch.chunk(mixed, 2, dim=-3)
        y_r = torch.sigmoid(gate.gate_rgb(x_r))
        assert torch.equal(out, y_r * f_r)

    def test_output_bounded_by_sum_of_magnitudes(self, rng):
        for axis in AXES:
            gate = AxisGate(8, axis)
            f_df = torch.as_tensor(rng.normal(size=(2, 8, 5, 5))).float()
            f_r = torch.as_tensor(rng.normal(size=(2, 8, 5, 5))).float()
            out = gate(f_df, f_r)
            bound = f_df.abs() + f_r.abs()
            assert (out.abs() <= bound + 1e-6).all()

    def test_shape_mismatch_rejected(self):
        gate = AxisGate(8, "height")
        with pytest.raises(ValueError):
            gate(torch.rand(1, 8, 4, 4), torch.rand(1, 8, 4, 5))


class TestMultiAxisAttention:
    def test_shape_preserved(self):
        att = MultiAxisAttention(8)
        out = att(torch.rand(2, 8, 6, 10), torch.rand(2, 8, 6, 10))
        assert out.shape == (2, 8, 6, 10)

    def test_output_is_sum_of_branches(self):
        torch.manual_seed(2)
        att = MultiAxisAttention(8)
        f_r = torch.rand(1, 8, 6, 6)
        f_df = torch.rand(1, 8, 6, 6)
        total = att(f_r, f_df)
        parts = sum(att.branches[axis](f_df, f_r) for axis in AXES)
        assert torch.equal(total, parts)

    def test_branch_independence(self):
        torch.manual_seed(3)
        att = MultiAxisAttention(8)
        f_r = torch.rand(1, 8, 6, 6)
        f_df = torch.rand(1, 8, 6, 6)
        others_before = [att.branches[a](f_df, f_r).clone() for a in ("height", "spatial", "channel")]
        with torch.no_grad():
            for p in att.branches["width"].parameters():
                p.add_(0.5)
        others_after = [att.branches[a](f_df, f_r) for a in ("height", "spatial", "channel")]
        for before, after in zip(others_before, others_after):
            assert torch.equal(before, after)

    def test_summed_bound(self, rng):
        att = MultiAxisAttention(8)
        f_r = torch.as_tensor(rng.normal(size=(1, 8, 5, 5))).float()
        f_df = torch.as_tensor(rng.normal(size=(1, 8, 5, 5))).float()
        out = att(f_r, f_df)
        bound = 4.0 * (f_df.abs() + f_r.abs())
        assert (out.abs() <= bound + 1e-5).all()

    def test_determinism(self):
        att = MultiAxisAttention(8)
        f_r = torch.rand(1, 8, 6, 6)
        f_df = torch.rand(1, 8, 6, 6)
        assert torch.equal(att(f_r, f_df), att(f_r, f_df))

    def test_gradient_matches_finite_differences(self):
        torch.manual_seed(4)
        att = MultiAxisAttention(64).double()
        f_r = torch.rand(2, 64, 4, 4, dtype=torch.float64)
        f_df = torch.rand(2, 64, 4, 4, dtype=torch.float64)
        target = torch.rand(2, 64, 4, 4, dtype=torch.float64)

        def loss_fn():
            return ((att(f_r, f_df) - target) ** 2).mean()

        att.zero_grad()
        loss_fn().backward()
        checked = 0
        for axis in AXES:
            weight = att.branches[axis].mix.weight
            idx = (0, 0, 0, 0)
            numeric = central_difference(loss_fn, weight, idx)
            analytic = weight.grad[idx].item()
            rel = abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-12)
            assert rel < 1e-4, f"{axis}: rel error {rel}"
            checked += 1
        assert checked == 4
