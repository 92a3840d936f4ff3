"""Compound BCE + soft-IoU loss and the full training objective.

The total objective is the sum of a selective-fusion part (coarse depth
and flow maps against GT plus the weight map against its pseudo GT) and a
level-weighted decoder part with weights 1, 1/2, 1/4, 1/8, 1/16.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .decoder import DecoderOutput

EPS = 1e-6
LEVEL_WEIGHTS = (1.0, 0.5, 0.25, 0.125, 0.0625)


@dataclass(frozen=True)
class LossReport:
    """Detached per-step breakdown; l_total == l_psf + l_decoder exactly."""

    l_psf: float
    l_decoder: float
    l_total: float
    per_level: tuple[float, float, float, float, float]
    per_psf_term: tuple[float, float, float]

    def as_dict(self) -> dict:
        return {
            "l_psf": self.l_psf,
            "l_decoder": self.l_decoder,
            "l_total": self.l_total,
            "per_level": list(self.per_level),
            "per_psf_term": list(self.per_psf_term),
        }


def loss_bce_iou(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean binary cross entropy plus one minus the soft IoU.

    ``pred`` is clamped to [EPS, 1-EPS] before the logs. The IoU term is
    computed per map (sums over all pixels of a sample) and averaged over
    the batch.
    """
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {tuple(pred.shape)} vs {tuple(target.shape)}")
    p = pred.clamp(EPS, 1.0 - EPS)
    bce = -(target * torch.log(p) + (1.0 - target) * torch.log(1.0 - p)).mean()
    dims = tuple(range(1, pred.ndim)) if pred.ndim == 4 else tuple(range(pred.ndim))
    inter = (pred * target).sum(dim=dims)
    union = pred.sum(dim=dims) + target.sum(dim=dims) - inter
    iou = 1.0 - (inter + EPS) / (union + EPS)
    return bce + iou.mean()


def loss_psf(
    s_d: torch.Tensor,
    s_f: torch.Tensor,
    sw: torch.Tensor,
    gt: torch.Tensor,
    pgt: torch.Tensor,
    sw_supervision: bool = True,
) -> tuple[torch.Tensor, tuple[torch.Tensor, ...]]:
    """Sum of the three fusion-stage terms; pgt is already at sw's size.

    With ``sw_supervision`` off (weight map trained without guidance) the
    third term is zero.
    """
    term_d = loss_bce_iou(s_d, gt)
    term_f = loss_bce_iou(s_f, gt)
    if sw_supervision:
        term_sw = loss_bce_iou(sw, pgt)
    else:
        term_sw = torch.zeros((), dtype=s_d.dtype, device=s_d.device)
    return term_d + term_f + term_sw, (term_d, term_f, term_sw)


def loss_decoder(
    maps: DecoderOutput, gt: torch.Tensor
) -> tuple[torch.Tensor, tuple[torch.Tensor, ...]]:
    """Level-weighted sum over the five decoder maps."""
    per_level = tuple(loss_bce_iou(m, gt) for m in maps.maps)
    total = sum(w * l for w, l in zip(LEVEL_WEIGHTS, per_level))
    return total, per_level


def loss_total(
    maps: DecoderOutput,
    gt: torch.Tensor,
    s_d: torch.Tensor | None = None,
    s_f: torch.Tensor | None = None,
    sw: torch.Tensor | None = None,
    pgt: torch.Tensor | None = None,
    psf_supervision: bool = True,
    sw_supervision: bool = True,
) -> tuple[torch.Tensor, LossReport]:
    """Full objective; returns the differentiable scalar and its report.

    With ``psf_supervision`` off (or no fusion-stage outputs at all) the
    total reduces to the decoder part.
    """
    dec, per_level = loss_decoder(maps, gt)
    zero = torch.zeros((), dtype=dec.dtype, device=dec.device)
    if psf_supervision and s_d is not None:
        psf, psf_terms = loss_psf(s_d, s_f, sw, gt, pgt, sw_supervision=sw_supervision)
    else:
        psf, psf_terms = zero, (zero, zero, zero)
    total = psf + dec
    report = LossReport(
        l_psf=float(psf.detach()),
        l_decoder=float(dec.detach()),
        l_total=float(psf.detach()) + float(dec.detach()),
        per_level=tuple(float(l.detach()) for l in per_level),
        per_psf_term=tuple(float(t.detach()) for t in psf_terms),
    )
    return total, report
