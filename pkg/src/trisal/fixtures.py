"""Deterministic synthetic fixtures for tests and desk-scale training.

Each fixture is a tiny video dataset written in the standard directory
layout: colored squares translate over a noisy background, GT is the
rendered object mask, the flow image color-codes the scripted motion
(white = static) and the depth image encodes the scripted ordering.
Corruption modes make one modality useless so that selection behavior
is observable.
"""

from __future__ import annotations

import colorsys
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .data import DatasetIndex, load_dataset

CORRUPT_MODES = ("none", "constant", "noise", "wrong_object")

_PALETTE = (
    (0.85, 0.25, 0.20),
    (0.20, 0.55, 0.85),
    (0.90, 0.80, 0.25),
    (0.45, 0.30, 0.80),
)


@dataclass(frozen=True)
class FixtureSpec:
    """Content description for one synthetic dataset."""

    frames: int = 8
    height: int = 64
    width: int = 64
    sequences: int = 1
    num_objects: int = 1
    object_size: int = 16
    motion: tuple[tuple[int, int], ...] = ((2, 1),)
    depth_order: str = "object_near"
    noise: float = 0.04
    flow_corrupt: str = "none"
    depth_corrupt: str = "none"

    def __post_init__(self):
        if self.height % 32 != 0 or self.width % 32 != 0:
            raise ValueError(f"resolution {self.height}x{self.width} must be a multiple of 32")
        if self.frames < 1 or self.sequences < 1 or self.num_objects < 1:
            raise ValueError("frames, sequences and num_objects must be positive")
        if self.object_size < 2:
            raise ValueError("object_size must be at least 2")
        if self.depth_order not in ("object_near", "object_far"):
            raise ValueError(f"unknown depth_order {self.depth_order!r}")
        for key in ("flow_corrupt", "depth_corrupt"):
            if getattr(self, key) not in CORRUPT_MODES:
                raise ValueError(f"unknown {key} mode {getattr(self, key)!r}")

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureSpec":
        """Parse a plain-text key-value spec file (``key = value`` lines)."""
        values: dict[str, object] = {}
        known = {f.name: f.type for f in fields(cls)}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, _, val = (s.strip() for s in line.partition("="))
            if key not in known:
                raise ValueError(f"{path}:{lineno}: unknown fixture key {key!r}")
            values[key] = _parse_value(key, val)
        return cls(**values)


def _parse_value(key: str, val: str):
    if key == "motion":
        pairs = []
        for chunk in val.split(";"):
            dx, dy = (int(v) for v in chunk.split(","))
            pairs.append((dx, dy))
        return tuple(pairs)
    if key == "noise":
        return float(val)
    if key in ("depth_order", "flow_corrupt", "depth_corrupt"):
        return val
    return int(val)


def _motion_color(dx: int, dy: int, max_mag: float) -> tuple[float, float, float]:
    """Direction -> hue, magnitude -> saturation; zero motion is white."""
    mag = math.hypot(dx, dy)
    if mag == 0:
        return (1.0, 1.0, 1.0)
    hue = (math.atan2(dy, dx) / (2 * math.pi)) % 1.0
    sat = min(1.0, mag / max(max_mag, 1e-9))
    return colorsys.hsv_to_rgb(hue, sat, 1.0)


def _save(path: Path, arr: np.ndarray) -> None:
    """Write a [H,W] or [H,W,3] float array in [0,1] as 8-bit PNG."""
    img = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(img).save(path)


def _object_tracks(spec: FixtureSpec, rng: np.random.Generator) -> list[dict]:
    """Pick start positions so every object stays in bounds for all frames."""
    tracks = []
    span = spec.frames - 1
    for k in range(spec.num_objects):
        dx, dy = spec.motion[k % len(spec.motion)]
        lo_x = max(0, -dx * span)
        hi_x = spec.width - spec.object_size - max(0, dx * span)
        lo_y = max(0, -dy * span)
        hi_y = spec.height - spec.object_size - max(0, dy * span)
        if hi_x < lo_x or hi_y < lo_y:
            raise ValueError(
                f"object {k} with motion ({dx},{dy}) cannot stay inside "
                f"{spec.width}x{spec.height} for {spec.frames} frames"
            )
        x0 = int(rng.integers(lo_x, hi_x + 1))
        y0 = int(rng.integers(lo_y, hi_y + 1))
        tracks.append({"x0": x0, "y0": y0, "dx": dx, "dy": dy, "color": _PALETTE[k % len(_PALETTE)]})
    return tracks


def _decoy_rect(spec: FixtureSpec, tracks: list[dict]) -> tuple[int, int]:
    """A static region far from every object track, for wrong_object mode."""
    corners = [(2, 2), (spec.width - spec.object_size - 2, 2),
               (2, spec.height - spec.object_size - 2),
               (spec.width - spec.object_size - 2, spec.height - spec.object_size - 2)]
    for cx, cy in corners:
        clear = True
        for tr in tracks:
            for t in range(spec.frames):
                ox, oy = tr["x0"] + tr["dx"] * t, tr["y0"] + tr["dy"] * t
                if abs(ox - cx) < spec.object_size and abs(oy - cy) < spec.object_size:
                    clear = False
                    break
            if not clear:
                break
        if clear:
            return cx, cy
    return corners[0]


def make_fixture(spec: FixtureSpec, seed: int, root: str | Path, split: str = "train") -> DatasetIndex:
    """Render the fixture under ``root`` and return its index.

    A pure function of (spec, seed): the written PNG bytes are identical
    across calls. One subdirectory per sequence; frames are zero-padded so
    lexicographic order equals temporal order.
    """
    root = Path(root)
    h, w, s = spec.height, spec.width, spec.object_size
    for sidx in range(spec.sequences):
        rng = np.random.default_rng([seed, sidx])
        tracks = _object_tracks(spec, rng)
        decoy = _decoy_rect(spec, tracks)
        max_mag = max(math.hypot(dx, dy) for dx, dy in spec.motion) or 1.0
        seq_dir = root / f"seq{sidx:02d}"

        for t in range(spec.frames):
            gt = np.zeros((h, w), dtype=np.float32)
            rgb = np.full((h, w, 3), 0.35, dtype=np.float32)
            rgb += rng.normal(0.0, spec.noise, size=(h, w, 3)).astype(np.float32)
            flow = np.ones((h, w, 3), dtype=np.float32)
            if spec.depth_order == "object_near":
                bg_depth, obj_depth = 0.30, 0.85
            else:
                bg_depth, obj_depth = 0.70, 0.15
            depth = np.full((h, w), bg_depth, dtype=np.float32)
            depth += np.linspace(0.0, 0.08, h, dtype=np.float32)[:, None]

            for tr in tracks:
                x = tr["x0"] + tr["dx"] * t
                y = tr["y0"] + tr["dy"] * t
                gt[y : y + s, x : x + s] = 1.0
                rgb[y : y + s, x : x + s] = tr["color"]
                flow[y : y + s, x : x + s] = _motion_color(tr["dx"], tr["dy"], max_mag)
                depth[y : y + s, x : x + s] = obj_depth

            flow = _corrupt(flow, spec.flow_corrupt, decoy, s, rng)
            depth = _corrupt(depth, spec.depth_corrupt, decoy, s, rng)

            name = f"{t:05d}.png"
            _save(seq_dir / "RGB" / name, np.clip(rgb, 0, 1))
            _save(seq_dir / "Flow" / name, np.clip(flow, 0, 1))
            _save(seq_dir / "Depth" / name, np.clip(depth, 0, 1))
            _save(seq_dir / "GT" / name, gt)

    return load_dataset(root, split)


def _corrupt(img: np.ndarray, mode: str, decoy: tuple[int, int], size: int,
             rng: np.random.Generator) -> np.ndarray:
    if mode == "none":
        return img
    if mode == "constant":
        return np.full_like(img, 0.5)
    if mode == "noise":
        return rng.uniform(0.0, 1.0, size=img.shape).astype(np.float32)
    # wrong_object: drop the real content, highlight a static decoy region
    out = np.full_like(img, 1.0 if img.ndim == 3 else 0.3)
    cx, cy = decoy
    out[cy : cy + size, cx : cx + size] = 0.9 if img.ndim == 2 else (0.9, 0.1, 0.1)
    return out


def corrupted_variant(spec: FixtureSpec, modality: str, mode: str = "constant") -> FixtureSpec:
    """Spec with one modality corrupted; modality is 'flow' or 'depth'."""
    if modality == "flow":
        return replace(spec, flow_corrupt=mode)
    if modality == "depth":
        return replace(spec, depth_corrupt=mode)
    raise ValueError(f"unknown modality {modality!r}")
