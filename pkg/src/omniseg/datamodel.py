"""Core value types: class/scale registries, one-hot encoders, and samples."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import RegistryError, ShapeError, ValidationError


class Source(str, enum.Enum):
    NEPTUNE = "NEPTUNE"
    HUBMAP = "HUBMAP"
    SYNTHETIC = "SYNTHETIC"


class Split(str, enum.Enum):
    TRAIN = "TRAIN"
    VAL = "VAL"
    TEST = "TEST"


@dataclass(frozen=True)
class ClassEntry:
    task_id: int
    name: str
    semantic_label: str


@dataclass(frozen=True)
class ClassRegistry:
    """Ordered tissue-type registry; task_id order fixes one-hot semantics."""

    entries: tuple[ClassEntry, ...]

    def __post_init__(self):
        ids = [e.task_id for e in self.entries]
        if ids != list(range(len(ids))):
            raise ValidationError(f"task_ids must be exactly 0..{len(ids) - 1}, got {ids}")
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate class names in {names}")

    @property
    def m(self) -> int:
        return len(self.entries)

    def entry(self, task_id: int) -> ClassEntry:
        if not 0 <= task_id < self.m:
            raise RegistryError(f"task_id {task_id} not in registry of size {self.m}")
        return self.entries[task_id]

    def by_name(self, name: str) -> ClassEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise RegistryError(
            f"unknown task name {name!r}; valid names: {[e.name for e in self.entries]}"
        )

    def to_dict(self) -> dict:
        return {
            "classes": [
                {"id": e.task_id, "name": e.name, "semantic_label": e.semantic_label}
                for e in self.entries
            ]
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassRegistry":
        return cls(
            tuple(
                ClassEntry(row["id"], row["name"], row["semantic_label"])
                for row in d["classes"]
            )
        )


@dataclass(frozen=True)
class ScaleEntry:
    scale_id: int
    magnification: int


@dataclass(frozen=True)
class ScaleRegistry:
    """Ordered magnification registry (unitless x-factors)."""

    entries: tuple[ScaleEntry, ...]

    def __post_init__(self):
        ids = [e.scale_id for e in self.entries]
        if ids != list(range(len(ids))):
            raise ValidationError(f"scale_ids must be exactly 0..{len(ids) - 1}, got {ids}")
        mags = [e.magnification for e in self.entries]
        if any(b <= a for a, b in zip(mags, mags[1:])):
            raise ValidationError(f"magnifications must be strictly increasing, got {mags}")

    @property
    def n(self) -> int:
        return len(self.entries)

    def entry(self, scale_id: int) -> ScaleEntry:
        if not 0 <= scale_id < self.n:
            raise RegistryError(f"scale_id {scale_id} not in registry of size {self.n}")
        return self.entries[scale_id]

    def by_magnification(self, magnification: int) -> ScaleEntry:
        for e in self.entries:
            if e.magnification == magnification:
                return e
        raise RegistryError(
            f"unknown magnification {magnification}; "
            f"valid: {[e.magnification for e in self.entries]}"
        )

    def to_dict(self) -> dict:
        return {
            "scales": [
                {"id": e.scale_id, "magnification": e.magnification} for e in self.entries
            ]
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScaleRegistry":
        return cls(tuple(ScaleEntry(row["id"], row["magnification"]) for row in d["scales"]))


def default_registries() -> tuple[ClassRegistry, ScaleRegistry]:
    """Seven task codes (six NEPTUNE primitives + HuBMAP microvasculature), four scales.

    PTC and HUBMAP_MV keep distinct task codes but share the semantic label "MV";
    the merge happens only at evaluation reporting.
    """
    classes = ClassRegistry(
        (
            ClassEntry(0, "TUFT", "TUFT"),
            ClassEntry(1, "CAP", "CAP"),
            ClassEntry(2, "PT", "PT"),
            ClassEntry(3, "DT", "DT"),
            ClassEntry(4, "PTC", "MV"),
            ClassEntry(5, "ART", "ART"),
            ClassEntry(6, "HUBMAP_MV", "MV"),
        )
    )
    scales = ScaleRegistry(
        (ScaleEntry(0, 5), ScaleEntry(1, 10), ScaleEntry(2, 20), ScaleEntry(3, 40))
    )
    return classes, scales


def encode_task(task_id: int, m: int) -> np.ndarray:
    """One-hot task code of length m."""
    if not 0 <= task_id < m:
        raise RegistryError(f"task_id {task_id} out of range for m={m}")
    code = np.zeros(m, dtype=np.float64)
    code[task_id] = 1.0
    return code


def encode_scale(scale_id: int, n: int) -> np.ndarray:
    """One-hot scale code of length n."""
    if not 0 <= scale_id < n:
        raise RegistryError(f"scale_id {scale_id} out of range for n={n}")
    code = np.zeros(n, dtype=np.float64)
    code[scale_id] = 1.0
    return code


def decode_onehot(code: np.ndarray) -> int:
    """Recover the id from a one-hot code."""
    code = np.asarray(code)
    if code.ndim != 1 or code.sum() != 1 or not np.isin(code, (0, 1)).all():
        raise ValidationError(f"not a one-hot vector: {code}")
    return int(np.argmax(code))


def save_registries(path, classes: ClassRegistry, scales: ScaleRegistry) -> None:
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump({**classes.to_dict(), **scales.to_dict()}, f, sort_keys=False)


def load_registries(path) -> tuple[ClassRegistry, ScaleRegistry]:
    with open(path, encoding="utf-8") as f:
        d = yaml.safe_load(f)
    return ClassRegistry.from_dict(d), ScaleRegistry.from_dict(d)


@dataclass(frozen=True)
class Sample:
    """One training/eval unit: channels-last image in [0,1], binary mask, codes."""

    image: np.ndarray  # H x W x 3, float in [0,1]
    mask: np.ndarray  # H x W, {0,1}
    task_id: int
    scale_id: int
    source: Source = Source.SYNTHETIC
    split: Split = Split.TRAIN
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.image.ndim != 3 or self.image.shape[2] != 3:
            raise ShapeError(f"image must be HxWx3, got {self.image.shape}")
        if self.mask.shape != self.image.shape[:2]:
            raise ShapeError(
                f"mask shape {self.mask.shape} != image spatial {self.image.shape[:2]}"
            )
        if not np.isin(self.mask, (0, 1)).all():
            raise ValidationError("mask must be binary {0,1}")
