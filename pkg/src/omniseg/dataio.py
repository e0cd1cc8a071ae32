"""Dataset ingestion: manifest contract, patch stitching, PNG sample loading."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .datamodel import ClassRegistry, Sample, ScaleRegistry, Source, Split
from .errors import ShapeError, ValidationError

MANIFEST_COLUMNS = (
    "image_path",
    "mask_path",
    "task",
    "magnification",
    "split",
    "source",
    "group_id",
)


@dataclass(frozen=True)
class ManifestRow:
    image_path: str
    mask_path: str
    task: str
    magnification: int
    split: Split
    source: Source
    group_id: str


@dataclass(frozen=True)
class Manifest:
    root: Path
    rows: tuple[ManifestRow, ...]

    def split_rows(self, split: Split) -> list[ManifestRow]:
        return [r for r in self.rows if r.split == split]


def load_manifest(
    path, classes: ClassRegistry, scales: ScaleRegistry, root: Path | None = None
) -> Manifest:
    """Read a delimited manifest; paths are relative to the manifest directory
    unless `root` (or OMNISEG_DATA_ROOT) overrides it. NEPTUNE TEST rows are
    dropped at ingestion.
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"manifest not found: {path}")
    if root is None:
        env_root = os.environ.get("OMNISEG_DATA_ROOT")
        root = Path(env_root) if env_root else path.parent

    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or tuple(reader.fieldnames) != MANIFEST_COLUMNS:
            raise ValidationError(
                f"manifest header must be {','.join(MANIFEST_COLUMNS)}, "
                f"got {reader.fieldnames}"
            )
        for lineno, rec in enumerate(reader, start=2):
            try:
                classes.by_name(rec["task"])
                mag = int(rec["magnification"])
                scales.by_magnification(mag)
                row = ManifestRow(
                    image_path=rec["image_path"],
                    mask_path=rec["mask_path"],
                    task=rec["task"],
                    magnification=mag,
                    split=Split(rec["split"].upper()),
                    source=Source(rec["source"].upper()),
                    group_id=rec["group_id"],
                )
            except (KeyError, ValueError) as exc:
                raise ValidationError(f"manifest row {lineno}: {exc}") from exc
            if row.source == Source.NEPTUNE and row.split == Split.TEST:
                continue
            for p in (row.image_path, row.mask_path):
                if not (root / p).is_file():
                    raise ValidationError(f"manifest row {lineno}: missing file {root / p}")
            rows.append(row)
    return Manifest(root=root, rows=tuple(rows))


def write_manifest(path, rows: list[ManifestRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(MANIFEST_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    r.image_path,
                    r.mask_path,
                    r.task,
                    r.magnification,
                    r.split.value,
                    r.source.value,
                    r.group_id,
                ]
            )


def read_image(path) -> np.ndarray:
    """RGB image scaled to [0,1], channels-last."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def read_mask(path) -> np.ndarray:
    """Binary mask; stored values must be {0,1} or {0,255}."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    values = np.unique(arr)
    if np.isin(values, (0, 1)).all():
        return arr.astype(np.uint8)
    if np.isin(values, (0, 255)).all():
        return (arr > 0).astype(np.uint8)
    raise ValidationError(f"mask {path} is not binary; found values {values[:10]}")


def write_image(path, image: np.ndarray) -> None:
    """Write a [0,1] channels-last image (or 2D {0,1} mask) as PNG."""
    if image.ndim == 2:
        data = (image.astype(np.uint8) * 255)
    else:
        data = np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data).save(path, format="PNG")


def load_sample(row: ManifestRow, root, classes: ClassRegistry, scales: ScaleRegistry) -> Sample:
    root = Path(root)
    try:
        image = read_image(root / row.image_path)
        mask = read_mask(root / row.mask_path)
    except ValidationError:
        raise
    except Exception as exc:
        raise ValidationError(f"cannot load row {row.image_path}: {exc}") from exc
    if mask.shape != image.shape[:2]:
        raise ValidationError(
            f"row {row.image_path}: mask {mask.shape} != image {image.shape[:2]}"
        )
    return Sample(
        image=image,
        mask=mask,
        task_id=classes.by_name(row.task).task_id,
        scale_id=scales.by_magnification(row.magnification).scale_id,
        source=row.source,
        split=row.split,
        meta={"image_path": row.image_path, "group_id": row.group_id},
    )


def stitch4(patches: list[np.ndarray]) -> np.ndarray:
    """Stitch four equal square patches into one double-size image.

    Placement is row-major: [top-left, top-right, bottom-left, bottom-right].
    Works for images (HxWxC) and masks (HxW); pixels are copied bit-exactly.
    """
    if len(patches) != 4:
        raise ShapeError(f"stitch4 needs exactly 4 patches, got {len(patches)}")
    first = np.asarray(patches[0])
    h, w = first.shape[:2]
    if h != w:
        raise ShapeError(f"patches must be square, got {h}x{w}")
    for i, p in enumerate(patches):
        if np.asarray(p).shape != first.shape:
            raise ShapeError(
                f"patch {i} shape {np.asarray(p).shape} != patch 0 shape {first.shape}"
            )
    top = np.concatenate([patches[0], patches[1]], axis=1)
    bottom = np.concatenate([patches[2], patches[3]], axis=1)
    return np.concatenate([top, bottom], axis=0)


def crop4(image: np.ndarray) -> list[np.ndarray]:
    """Inverse of stitch4: quadrants in row-major order."""
    h, w = image.shape[:2]
    if h != w or h % 2:
        raise ShapeError(f"crop4 needs an even square image, got {h}x{w}")
    s = h // 2
    return [image[:s, :s], image[:s, s:], image[s:, :s], image[s:, s:]]
