"""Sample model, dataset directory ingestion and joint augmentation.

Dataset layout (one directory per sequence, frames sorted lexicographically):

    <root>/<seq>/RGB/<frame>.png     3-channel appearance
    <root>/<seq>/Flow/<frame>.png    color rendering of optical flow
    <root>/<seq>/Depth/<frame>.png   single-channel depth
    <root>/<seq>/GT/<frame>.png      white = salient

All images are 8-bit PNG. The last frame of every sequence has no forward
flow, so it is excluded from the test split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

MODALITY_DIRS = ("RGB", "Flow", "Depth", "GT")


@dataclass(frozen=True)
class SampleTriplet:
    """One aligned (RGB, flow rendering, depth, GT) frame group.

    Tensors are float32; rgb/flow/depth are [3, H, W] in [0, 1], gt is
    [1, H, W] with values in {0, 1}. H and W are multiples of 32 so every
    encoder stride divides evenly. Treated as immutable after construction.
    """

    rgb: torch.Tensor
    flow: torch.Tensor
    depth: torch.Tensor
    gt: torch.Tensor
    sequence_id: str
    frame_index: int

    def validate(self) -> "SampleTriplet":
        h, w = self.rgb.shape[-2:]
        for name in ("rgb", "flow", "depth"):
            t = getattr(self, name)
            if t.shape != (3, h, w):
                raise ValueError(f"{name} has shape {tuple(t.shape)}, expected (3, {h}, {w})")
            if t.min() < 0 or t.max() > 1:
                raise ValueError(f"{name} values outside [0, 1]")
        if self.gt.shape != (1, h, w):
            raise ValueError(f"gt has shape {tuple(self.gt.shape)}, expected (1, {h}, {w})")
        if not torch.all((self.gt == 0) | (self.gt == 1)):
            raise ValueError("gt contains values other than 0 and 1")
        if h % 32 != 0 or w % 32 != 0:
            raise ValueError(f"spatial size {h}x{w} is not a multiple of 32")
        if self.frame_index < 0:
            raise ValueError("frame_index must be nonnegative")
        return self


@dataclass(frozen=True)
class FrameRecord:
    sequence_id: str
    frame_index: int
    rgb: Path
    flow: Path
    depth: Path
    gt: Path


@dataclass(frozen=True)
class DatasetIndex:
    """Immutable listing of frames with all four modalities present."""

    root: Path
    split: str
    sequences: tuple[tuple[str, tuple[FrameRecord, ...]], ...]

    @property
    def frames(self) -> tuple[FrameRecord, ...]:
        return tuple(f for _, seq in self.sequences for f in seq)

    def __len__(self) -> int:
        return sum(len(seq) for _, seq in self.sequences)


def load_dataset(root_path: str | Path, split: str) -> DatasetIndex:
    """Index a dataset tree, validating that every frame is complete.

    For the test split the last frame of each sequence is dropped (it has
    no forward optical flow). Raises if any modality file is missing, if a
    sequence directory holds no frames, or if the split ends up empty.
    """
    if split not in ("train", "test"):
        raise ValueError(f"unknown split {split!r}")
    root = Path(root_path)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist")

    seq_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not seq_dirs:
        raise ValueError(f"dataset root {root} contains no sequence directories")

    sequences = []
    for seq_dir in seq_dirs:
        seq_id = seq_dir.name
        stems: set[str] = set()
        for mod in MODALITY_DIRS:
            mod_dir = seq_dir / mod
            if not mod_dir.is_dir():
                raise FileNotFoundError(f"sequence {seq_id} is missing the {mod} directory")
            stems.update(p.stem for p in mod_dir.glob("*.png"))
        if not stems:
            raise ValueError(f"sequence {seq_id} contains no frames")

        records = []
        for idx, stem in enumerate(sorted(stems)):
            paths = {}
            for mod in MODALITY_DIRS:
                p = seq_dir / mod / f"{stem}.png"
                if not p.is_file():
                    raise FileNotFoundError(
                        f"frame {seq_id}/{stem} is missing its {mod} file ({p})"
                    )
                paths[mod] = p
            records.append(
                FrameRecord(
                    sequence_id=seq_id,
                    frame_index=idx,
                    rgb=paths["RGB"],
                    flow=paths["Flow"],
                    depth=paths["Depth"],
                    gt=paths["GT"],
                )
            )
        if split == "test":
            records = records[:-1]
        if records:
            sequences.append((seq_id, tuple(records)))

    index = DatasetIndex(root=root, split=split, sequences=tuple(sequences))
    if len(index) == 0:
        raise ValueError(f"no testable frames in {root} for split {split!r}")
    return index


def _read_image(path: Path, mode: str) -> torch.Tensor:
    """Read an 8-bit PNG as a float tensor in [0, 1], shape [C, H, W]."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert(mode), dtype=np.float32) / 255.0
    except OSError as exc:
        raise OSError(f"unreadable image {path}: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[None]
    else:
        arr = arr.transpose(2, 0, 1)
    return torch.from_numpy(np.ascontiguousarray(arr))


def _resize(t: torch.Tensor, size: tuple[int, int]) -> torch.Tensor:
    if t.shape[-2:] == size:
        return t
    return F.interpolate(t[None], size=size, mode="bilinear", align_corners=False)[0]


def load_sample(index: DatasetIndex, i: int, size: tuple[int, int]) -> SampleTriplet:
    """Load frame ``i`` of the index, resized to ``size`` (H, W).

    RGB/flow/depth are bilinearly resized; depth is replicated to three
    channels; GT is re-binarized at 0.5 after the resize.
    """
    if not 0 <= i < len(index):
        raise IndexError(f"sample index {i} out of range [0, {len(index)})")
    h, w = size
    if h % 32 != 0 or w % 32 != 0:
        raise ValueError(f"target size {h}x{w} must be a multiple of 32")

    rec = index.frames[i]
    rgb = _resize(_read_image(rec.rgb, "RGB"), size)
    flow = _resize(_read_image(rec.flow, "RGB"), size)
    depth = _resize(_read_image(rec.depth, "L"), size).expand(3, -1, -1).contiguous()
    gt = (_resize(_read_image(rec.gt, "L"), size) > 0.5).float()

    return SampleTriplet(
        rgb=rgb,
        flow=flow,
        depth=depth,
        gt=gt,
        sequence_id=rec.sequence_id,
        frame_index=rec.frame_index,
    ).validate()


def _rotate(t: torch.Tensor, angle_deg: float, mode: str) -> torch.Tensor:
    """Rotate around the image center; bilinear for images, nearest for masks."""
    rad = math.radians(angle_deg)
    cos, sin = math.cos(rad), math.sin(rad)
    theta = torch.tensor([[cos, -sin, 0.0], [sin, cos, 0.0]], dtype=t.dtype)
    grid = F.affine_grid(theta[None], (1, *t.shape), align_corners=False)
    return F.grid_sample(t[None], grid, mode=mode, padding_mode="zeros", align_corners=False)[0]


def augment(sample: SampleTriplet, rng: np.random.Generator) -> SampleTriplet:
    """Random flip / crop / rotation applied jointly to all four modalities.

    Training-time only. The same geometric transform hits every modality;
    GT is resampled with nearest-neighbor so it stays binary. An identity
    draw returns the sample unchanged.
    """
    rgb, flow, depth, gt = sample.rgb, sample.flow, sample.depth, sample.gt
    h, w = gt.shape[-2:]
    changed = False

    if rng.random() < 0.5:
        rgb, flow, depth, gt = (torch.flip(t, dims=[-1]) for t in (rgb, flow, depth, gt))
        changed = True

    if rng.random() < 0.5:
        scale = rng.uniform(0.7, 1.0)
        ch, cw = max(1, int(round(h * scale))), max(1, int(round(w * scale)))
        top = int(rng.integers(0, h - ch + 1))
        left = int(rng.integers(0, w - cw + 1))

        def crop_resize(t, mask):
            window = t[..., top : top + ch, left : left + cw]
            mode = "nearest" if mask else "bilinear"
            kwargs = {} if mask else {"align_corners": False}
            return F.interpolate(window[None], size=(h, w), mode=mode, **kwargs)[0]

        rgb, flow, depth = (crop_resize(t, False) for t in (rgb, flow, depth))
        gt = crop_resize(gt, True)
        changed = True

    if rng.random() < 0.5:
        angle = rng.uniform(-15.0, 15.0)
        rgb, flow, depth = (_rotate(t, angle, "bilinear").clamp(0, 1) for t in (rgb, flow, depth))
        gt = _rotate(gt, angle, "nearest")
        changed = True

    if not changed:
        return sample
    return SampleTriplet(
        rgb=rgb,
        flow=flow,
        depth=depth,
        gt=gt,
        sequence_id=sample.sequence_id,
        frame_index=sample.frame_index,
    ).validate()


def stack_samples(samples: list[SampleTriplet]) -> tuple[torch.Tensor, ...]:
    """Stack samples into (rgb, flow, depth, gt) batch tensors."""
    return (
        torch.stack([s.rgb for s in samples]),
        torch.stack([s.flow for s in samples]),
        torch.stack([s.depth for s in samples]),
        torch.stack([s.gt for s in samples]),
    )
