"""Saliency evaluation: S-measure, maximum F-measure and MAE.

Conventions (shared with the test-suite reference implementations):

* Predictions are quantized to 8 bits before the F-measure sweep; the
  256 binarizations are ``q > t`` for t in 0..255.
* F uses beta^2 = 0.3; zero true positives (including empty predicted
  masks) score 0 at that threshold.
* The S-measure is the 0.5/0.5 blend of an object term (foreground and
  background mean/deviation similarity) and a region term (per-block
  structural similarity over the 4-way split at the GT centroid, sample
  variances with N-1). Degenerate GT falls back to 1 - mean(pred) for
  all-zero GT and mean(pred) for all-one GT.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

_EPS = np.finfo(np.float64).eps


def _to_array(x) -> np.ndarray:
    if isinstance(x, torch.Tensor):
        x = x.detach().cpu().numpy()
    a = np.asarray(x, dtype=np.float64)
    return a.reshape(a.shape[-2], a.shape[-1])


def _check_pair(pred: np.ndarray, gt: np.ndarray) -> None:
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {gt.shape}")
    if pred.min() < 0 or pred.max() > 1:
        raise ValueError("prediction values must lie in [0, 1]")
    if not np.all((gt == 0) | (gt == 1)):
        raise ValueError("gt must be binary")


def mae(pred, gt) -> float:
    """Mean absolute error over pixels."""
    p, g = _to_array(pred), _to_array(gt)
    _check_pair(p, g)
    return float(np.abs(p - g).mean())


def f_beta_max(pred, gt, beta2: float = 0.3) -> float:
    """Maximum F-measure over the 256 8-bit binarization thresholds."""
    p, g = _to_array(pred), _to_array(gt)
    _check_pair(p, g)
    q = np.rint(p * 255.0).astype(np.int64)
    pos = g == 1
    # histogram of quantized values inside/outside the GT mask
    tp_hist = np.bincount(q[pos], minlength=256)
    fp_hist = np.bincount(q[~pos], minlength=256)
    # number of pixels with q > t equals the suffix sum above index t
    tp_gt = np.cumsum(tp_hist[::-1])[::-1]  # tp_gt[t] = #(q >= t & gt)
    fp_gt = np.cumsum(fp_hist[::-1])[::-1]
    n_gt = int(pos.sum())
    best = 0.0
    for t in range(256):
        tp = int(tp_gt[t + 1]) if t + 1 < 256 else 0
        fp = int(fp_gt[t + 1]) if t + 1 < 256 else 0
        npred = tp + fp
        if npred == 0 or tp == 0 or n_gt == 0:
            continue
        prec = tp / npred
        rec = tp / n_gt
        f = (1.0 + beta2) * prec * rec / (beta2 * prec + rec)
        best = max(best, f)
    return float(best)


def _object_score(values: np.ndarray) -> float:
    """Similarity of a masked region to the ideal constant-1 region."""
    if values.size == 0:
        return 0.0
    x = values.mean()
    sigma = values.std(ddof=1) if values.size > 1 else 0.0
    return float(2.0 * x / (x * x + 1.0 + sigma + _EPS))


def _s_object(pred: np.ndarray, gt: np.ndarray) -> float:
    u = gt.mean()
    fg = _object_score(pred[gt == 1])
    bg = _object_score((1.0 - pred)[gt == 0])
    return float(u * fg + (1.0 - u) * bg)


def _centroid(gt: np.ndarray) -> tuple[int, int]:
    """1-based split point (columns, rows) at the GT center of mass."""
    h, w = gt.shape
    total = gt.sum()
    if total == 0:
        return int(round(w / 2.0)), int(round(h / 2.0))
    cols = gt.sum(axis=0)
    rows = gt.sum(axis=1)
    x = int(round(float((cols * (np.arange(w) + 1.0)).sum() / total)))
    y = int(round(float((rows * (np.arange(h) + 1.0)).sum() / total)))
    return x, y


def _block_ssim(pred: np.ndarray, gt: np.ndarray) -> float:
    n = pred.size
    if n == 0:
        return 0.0
    x, y = pred.mean(), gt.mean()
    if n > 1:
        var_x = ((pred - x) ** 2).sum() / (n - 1)
        var_y = ((gt - y) ** 2).sum() / (n - 1)
        cov = ((pred - x) * (gt - y)).sum() / (n - 1)
    else:
        var_x = var_y = cov = 0.0
    num = 4.0 * x * y * cov
    den = (x * x + y * y) * (var_x + var_y)
    if num != 0.0:
        return float(num / (den + _EPS))
    return 1.0 if den == 0.0 else 0.0


def _s_region(pred: np.ndarray, gt: np.ndarray) -> float:
    h, w = gt.shape
    cx, cy = _centroid(gt)
    area = h * w
    score = 0.0
    for rows, cols in (
        ((0, cy), (0, cx)),
        ((0, cy), (cx, w)),
        ((cy, h), (0, cx)),
        ((cy, h), (cx, w)),
    ):
        pb = pred[rows[0] : rows[1], cols[0] : cols[1]]
        gb = gt[rows[0] : rows[1], cols[0] : cols[1]]
        weight = pb.size / area
        score += weight * _block_ssim(pb, gb)
    return float(score)


def s_measure(pred, gt, alpha: float = 0.5) -> float:
    """Structure measure: alpha * object term + (1 - alpha) * region term."""
    p, g = _to_array(pred), _to_array(gt)
    _check_pair(p, g)
    u = g.mean()
    if u == 0.0:
        return float(1.0 - p.mean())
    if u == 1.0:
        return float(p.mean())
    s = alpha * _s_object(p, g) + (1.0 - alpha) * _s_region(p, g)
    return float(max(s, 0.0))


@dataclass
class MetricReport:
    """Aggregate metrics plus a per-sequence breakdown."""

    s_alpha: float
    f_beta_max: float
    mae: float
    per_sequence: dict[str, dict[str, float]] = field(default_factory=dict)
    frame_count: int = 0

    def row(self, dataset: str) -> dict:
        return {
            "dataset": dataset,
            "s_alpha": self.s_alpha,
            "f_beta_max": self.f_beta_max,
            "mae": self.mae,
        }

    def to_markdown(self, dataset: str = "fixture") -> str:
        lines = [
            "| dataset | S_alpha | F_beta_max | MAE |",
            "|---|---|---|---|",
            f"| {dataset} | {self.s_alpha:.4f} | {self.f_beta_max:.4f} | {self.mae:.4f} |",
        ]
        for seq, vals in self.per_sequence.items():
            lines.append(
                f"| {dataset}/{seq} | {vals['s_alpha']:.4f} "
                f"| {vals['f_beta_max']:.4f} | {vals['mae']:.4f} |"
            )
        return "\n".join(lines)

    def to_csv(self, dataset: str = "fixture") -> str:
        lines = ["dataset,s_alpha,f_beta_max,mae"]
        lines.append(f"{dataset},{self.s_alpha:.6f},{self.f_beta_max:.6f},{self.mae:.6f}")
        for seq, vals in self.per_sequence.items():
            lines.append(
                f"{dataset}/{seq},{vals['s_alpha']:.6f},{vals['f_beta_max']:.6f},{vals['mae']:.6f}"
            )
        return "\n".join(lines) + "\n"


def aggregate(per_frame: list[tuple[str, float, float, float]]) -> MetricReport:
    """Average per-frame (sequence_id, s, f, mae) rows in a fixed order."""
    if not per_frame:
        raise ValueError("no frames to aggregate")
    by_seq: dict[str, list[tuple[float, float, float]]] = {}
    for seq, s, f, m in per_frame:
        by_seq.setdefault(seq, []).append((s, f, m))
    per_sequence = {
        seq: {
            "s_alpha": float(np.mean([v[0] for v in vals])),
            "f_beta_max": float(np.mean([v[1] for v in vals])),
            "mae": float(np.mean([v[2] for v in vals])),
        }
        for seq, vals in sorted(by_seq.items())
    }
    return MetricReport(
        s_alpha=float(np.mean([r[1] for r in per_frame])),
        f_beta_max=float(np.mean([r[2] for r in per_frame])),
        mae=float(np.mean([r[3] for r in per_frame])),
        per_sequence=per_sequence,
        frame_count=len(per_frame),
    )
