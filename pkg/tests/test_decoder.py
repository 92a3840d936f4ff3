"""U-shaped decoder: map contract, information flow, gradients."""

import pytest
import torch

from trisal import UDecoder
from trisal.losses import loss_decoder

from reference import central_difference


def _levels(channels=8, h=64, w=64, batch=1, dtype=torch.float32, seed=0):
    torch.manual_seed(seed)
    return [
        torch.rand(batch, channels, h // 2**i, w // 2**i, dtype=dtype)
        for i in range(1, 6)
    ]


class TestDecode:
    def test_five_maps_at_input_resolution(self):
        dec = UDecoder(8)
        out = dec(_levels(), (64, 64))
        assert len(out.maps) == 5
        for m in out.maps:
            assert m.shape == (1, 1, 64, 64)
            assert m.min() > 0 and m.max() < 1

    def test_prediction_is_first_map(self):
        dec = UDecoder(8)
        out = dec(_levels(), (64, 64))
        assert out.prediction is out.maps[0]

    def test_wrong_level_count_rejected(self):
        dec = UDecoder(8)
        with pytest.raises(ValueError, match="5 levels"):
            dec(_levels()[:4], (64, 64))

    def test_deepest_map_ignores_shallow_levels(self):
        torch.manual_seed(5)
        dec = UDecoder(8)
        levels = _levels()
        s5_before = dec(levels, (64, 64)).maps[4].clone()
        levels2 = [lvl.clone() for lvl in levels]
        levels2[0] = torch.rand_like(levels2[0])
        s5_after = dec(levels2, (64, 64)).maps[4]
        assert torch.equal(s5_before, s5_after)
        # while the shallow map does change
        assert not torch.equal(
            dec(levels, (64, 64)).maps[0], dec(levels2, (64, 64)).maps[0]
        )

    def test_all_maps_reach_all_levels_below_them(self):
        dec = UDecoder(8)
        levels = [lvl.requires_grad_(True) for lvl in _levels()]
        out = dec(levels, (64, 64))
        out.maps[0].sum().backward()
        for lvl in levels:
            assert lvl.grad is not None
            assert lvl.grad.abs().sum() > 0

    def test_gradient_matches_finite_differences(self):
        torch.manual_seed(6)
        dec = UDecoder(4).double()
        levels = _levels(channels=4, h=32, w=32, dtype=torch.float64)
        gt = (torch.rand(1, 1, 32, 32, dtype=torch.float64) > 0.5).double()

        def loss_fn():
            total, _ = loss_decoder(dec(levels, (32, 32)), gt)
            return total

        dec.zero_grad()
        loss_fn().backward()
        for name, param in list(dec.named_parameters())[:3]:
            idx = (0,) * param.ndim
            numeric = central_difference(loss_fn, param, idx)
            analytic = param.grad[idx].item()
            rel = abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-12)
            assert rel < 1e-4, f"{name}: rel error {rel}"
