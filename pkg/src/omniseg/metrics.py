"""DSC/IoU evaluation metrics and the per-class report aggregation."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError

REPORT_COLUMNS = ("Median DSC", "Mean DSC", "Std Dev DSC", "Mean IoU")


def _binary_pair(pred: np.ndarray, gt: np.ndarray):
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    return pred.astype(bool), gt.astype(bool)


def dsc(pred_mask: np.ndarray, gt_mask: np.ndarray, empty_value: float = 1.0) -> float:
    """Dice similarity coefficient; both-empty pairs score `empty_value`."""
    a, b = _binary_pair(pred_mask, gt_mask)
    denom = a.sum() + b.sum()
    if denom == 0:
        return empty_value
    return 2.0 * np.logical_and(a, b).sum() / denom


def iou(pred_mask: np.ndarray, gt_mask: np.ndarray, empty_value: float = 1.0) -> float:
    """Intersection over union; both-empty pairs score `empty_value`."""
    a, b = _binary_pair(pred_mask, gt_mask)
    union = np.logical_or(a, b).sum()
    if union == 0:
        return empty_value
    return np.logical_and(a, b).sum() / union


@dataclass(frozen=True)
class ReportRow:
    label: str
    median_dsc: float
    mean_dsc: float
    std_dsc: float
    mean_iou: float
    count: int


@dataclass(frozen=True)
class MetricsReport:
    """Per-semantic-label and overall median/mean/std DSC and mean IoU, in percent."""

    rows: tuple[ReportRow, ...]  # per-label rows then the "overall" row

    def to_dict(self) -> dict:
        return {
            r.label: {
                "Median DSC": r.median_dsc,
                "Mean DSC": r.mean_dsc,
                "Std Dev DSC": r.std_dsc,
                "Mean IoU": r.mean_iou,
                "count": r.count,
            }
            for r in self.rows
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        header = ("Label",) + REPORT_COLUMNS
        lines = ["  ".join(f"{h:>12}" for h in header)]
        for r in self.rows:
            vals = (r.median_dsc, r.mean_dsc, r.std_dsc, r.mean_iou)
            lines.append(
                "  ".join([f"{r.label:>12}"] + [f"{v:>12.2f}" for v in vals])
            )
        return "\n".join(lines) + "\n"


def _stats(dscs: list[float], ious: list[float], label: str) -> ReportRow:
    d = np.asarray(dscs, dtype=np.float64)
    std = float(d.std(ddof=1)) if d.size > 1 else 0.0
    return ReportRow(
        label=label,
        median_dsc=float(np.median(d)) * 100.0,
        mean_dsc=float(d.mean()) * 100.0,
        std_dsc=std * 100.0,
        mean_iou=float(np.mean(ious)) * 100.0,
        count=d.size,
    )


def aggregate_report(per_image: list[tuple[str, float, float]]) -> MetricsReport:
    """Aggregate (semantic_label, dsc, iou) tuples into a Table-style report."""
    if not per_image:
        raise ValidationError("aggregate_report requires a nonempty result list")
    by_label: dict[str, tuple[list, list]] = {}
    all_d, all_i = [], []
    for label, d, i in per_image:
        by_label.setdefault(label, ([], []))
        by_label[label][0].append(d)
        by_label[label][1].append(i)
        all_d.append(d)
        all_i.append(i)
    rows = [_stats(ds, is_, label) for label, (ds, is_) in sorted(by_label.items())]
    rows.append(_stats(all_d, all_i, "overall"))
    return MetricsReport(tuple(rows))
