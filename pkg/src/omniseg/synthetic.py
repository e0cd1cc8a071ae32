"""Synthetic dataset generator: task-specific shapes on textured backgrounds.

A desk-scale stand-in for gated histology corpora. Each task gets its own
shape family and tint so a small model can actually learn to separate them.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datamodel import ClassRegistry, ScaleRegistry, Source, Split, default_registries
from .dataio import Manifest, ManifestRow, write_image, write_manifest
from .errors import ValidationError

# RGB tint per task name, deliberately well separated.
_PALETTE = {
    "TUFT": (0.55, 0.15, 0.45),
    "CAP": (0.20, 0.35, 0.65),
    "PT": (0.70, 0.45, 0.10),
    "DT": (0.15, 0.55, 0.25),
    "PTC": (0.60, 0.10, 0.10),
    "ART": (0.35, 0.20, 0.60),
    "HUBMAP_MV": (0.10, 0.50, 0.55),
}
_BACKGROUND = (0.87, 0.75, 0.78)  # pale pinkish, histology-ish


@dataclass(frozen=True)
class SyntheticSpec:
    train_per_task: int = 8
    val_per_task: int = 2
    test_per_task: int = 2
    image_size: int = 512
    noise: float = 0.03
    seed: int = 0

    @property
    def per_task(self) -> int:
        return self.train_per_task + self.val_per_task + self.test_per_task


def _grid(size):
    return np.meshgrid(np.arange(size), np.arange(size), indexing="ij")


def _ellipse_mask(size, rng, ry_frac=(0.15, 0.30), rx_frac=(0.15, 0.30)):
    yy, xx = _grid(size)
    cy = rng.uniform(0.3, 0.7) * size
    cx = rng.uniform(0.3, 0.7) * size
    ry = rng.uniform(*ry_frac) * size
    rx = rng.uniform(*rx_frac) * size
    theta = rng.uniform(0, np.pi)
    y, x = yy - cy, xx - cx
    yr = y * np.cos(theta) - x * np.sin(theta)
    xr = y * np.sin(theta) + x * np.cos(theta)
    return ((yr / ry) ** 2 + (xr / rx) ** 2 <= 1.0).astype(np.uint8)


def _ring_mask(size, rng, inner=0.55):
    yy, xx = _grid(size)
    cy = rng.uniform(0.35, 0.65) * size
    cx = rng.uniform(0.35, 0.65) * size
    r = rng.uniform(0.18, 0.32) * size
    d2 = (yy - cy) ** 2 + (xx - cx) ** 2
    return ((d2 <= r**2) & (d2 >= (inner * r) ** 2)).astype(np.uint8)


def _blobs_mask(size, rng, count=(3, 6), r_frac=(0.05, 0.12)):
    yy, xx = _grid(size)
    mask = np.zeros((size, size), dtype=np.uint8)
    for _ in range(rng.integers(*count)):
        cy = rng.uniform(0.15, 0.85) * size
        cx = rng.uniform(0.15, 0.85) * size
        r = rng.uniform(*r_frac) * size
        mask |= ((yy - cy) ** 2 + (xx - cx) ** 2 <= r**2).astype(np.uint8)
    return mask


def _rects_mask(size, rng, count=(2, 4)):
    yy, xx = _grid(size)
    mask = np.zeros((size, size), dtype=np.uint8)
    for _ in range(rng.integers(*count)):
        cy = rng.uniform(0.2, 0.8) * size
        cx = rng.uniform(0.2, 0.8) * size
        a = rng.uniform(0.08, 0.2) * size
        b = rng.uniform(0.04, 0.1) * size
        theta = rng.uniform(0, np.pi)
        y, x = yy - cy, xx - cx
        yr = y * np.cos(theta) - x * np.sin(theta)
        xr = y * np.sin(theta) + x * np.cos(theta)
        mask |= ((np.abs(yr) <= b) & (np.abs(xr) <= a)).astype(np.uint8)
    return mask


def _curves_mask(size, rng, count=(1, 3), thickness_frac=0.02):
    yy, xx = _grid(size)
    mask = np.zeros((size, size), dtype=np.uint8)
    t = max(1.5, thickness_frac * size)
    for _ in range(rng.integers(*count)):
        pos = np.array([rng.uniform(0.2, 0.8) * size, rng.uniform(0.2, 0.8) * size])
        angle = rng.uniform(0, 2 * np.pi)
        step = size / 40.0
        for _ in range(60):
            angle += rng.uniform(-0.4, 0.4)
            pos = pos + step * np.array([np.sin(angle), np.cos(angle)])
            pos = np.clip(pos, 2, size - 3)
            mask |= ((yy - pos[0]) ** 2 + (xx - pos[1]) ** 2 <= t**2).astype(np.uint8)
    return mask


def _thick_annulus_mask(size, rng):
    return _ring_mask(size, rng, inner=0.4)


_SHAPE_FAMILIES = {
    "TUFT": _ellipse_mask,
    "CAP": _ring_mask,
    "PT": _blobs_mask,
    "DT": _rects_mask,
    "PTC": _curves_mask,
    "ART": _thick_annulus_mask,
    "HUBMAP_MV": _curves_mask,
}


def render_sample(task_name: str, size: int, noise: float, rng: np.random.Generator):
    """One (image, mask) pair: tinted task shape over a textured background."""
    if task_name not in _SHAPE_FAMILIES:
        raise ValidationError(f"no shape family for task {task_name!r}")
    mask = _SHAPE_FAMILIES[task_name](size, rng)
    bg = np.array(_BACKGROUND) + rng.normal(0.0, noise, size=(size, size, 3))
    tint = np.array(_PALETTE[task_name])
    fg = tint + rng.normal(0.0, noise, size=(size, size, 3))
    image = np.where(mask[..., None] > 0, fg, bg)
    return np.clip(image, 0.0, 1.0), mask


def gen_synthetic(
    spec: SyntheticSpec,
    out_dir,
    classes: ClassRegistry | None = None,
    scales: ScaleRegistry | None = None,
) -> Manifest:
    """Write images, masks, and a manifest under `out_dir`; deterministic per seed."""
    if classes is None or scales is None:
        classes, scales = default_registries()
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"cannot create output dir {out_dir}: {exc}") from exc

    split_plan = [
        (Split.TRAIN, spec.train_per_task),
        (Split.VAL, spec.val_per_task),
        (Split.TEST, spec.test_per_task),
    ]
    # Every task pinned to one magnification, mimicking per-class optimal scale.
    mags = [e.magnification for e in scales.entries]
    rows = []
    for entry in classes.entries:
        mag = mags[entry.task_id % len(mags)]
        idx = 0
        for split, count in split_plan:
            for _ in range(count):
                rng = np.random.default_rng((spec.seed, entry.task_id, idx))
                image, mask = render_sample(entry.name, spec.image_size, spec.noise, rng)
                rel_dir = Path("SYNTHETIC") / entry.name / split.value
                (out_dir / rel_dir).mkdir(parents=True, exist_ok=True)
                img_rel = rel_dir / f"img_{idx:04d}.png"
                mask_rel = rel_dir / f"mask_{idx:04d}.png"
                write_image(out_dir / img_rel, image)
                write_image(out_dir / mask_rel, mask)
                rows.append(
                    ManifestRow(
                        image_path=str(img_rel),
                        mask_path=str(mask_rel),
                        task=entry.name,
                        magnification=mag,
                        split=split,
                        source=Source.SYNTHETIC,
                        group_id=f"{entry.name}_{idx}",
                    )
                )
                idx += 1
    write_manifest(out_dir / "manifest.csv", rows)
    return Manifest(root=out_dir, rows=tuple(rows))
