"""Boundary-weighted dice + cross-entropy training loss."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from scipy import ndimage

from .errors import ShapeError, ValidationError

BOUNDARY_WEIGHT = 1.2
_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def boundary_weight_map(mask: np.ndarray, weight: float = BOUNDARY_WEIGHT) -> np.ndarray:
    """Weight map: `weight` on the one-pixel inner rim of the mask, 1.0 elsewhere.

    The rim is mask XOR erode(mask, 3x3 cross) with zero padding, so foreground
    touching the image border counts as boundary.
    """
    mask = np.asarray(mask)
    if not np.isin(mask, (0, 1)).all():
        raise ValidationError("boundary_weight_map requires a binary mask")
    fg = mask.astype(bool)
    eroded = ndimage.binary_erosion(fg, structure=_CROSS, border_value=0)
    weights = np.ones(mask.shape, dtype=np.float64)
    weights[fg & ~eroded] = weight
    return weights


def dice_loss(prob_fg: torch.Tensor, mask: torch.Tensor, eps: float = 1e-5) -> torch.Tensor:
    """Soft binary dice loss: 1 - (2*sum(p*y)+eps)/(sum(p)+sum(y)+eps)."""
    if prob_fg.shape != mask.shape:
        raise ShapeError(f"shape mismatch {tuple(prob_fg.shape)} vs {tuple(mask.shape)}")
    mask = mask.to(prob_fg.dtype)
    inter = (prob_fg * mask).sum()
    return 1.0 - (2.0 * inter + eps) / (prob_fg.sum() + mask.sum() + eps)


def weighted_ce_loss(
    logits: torch.Tensor, mask: torch.Tensor, weights: torch.Tensor
) -> torch.Tensor:
    """Per-pixel weighted cross-entropy, mean over pixels; logits are 2 x H x W."""
    if logits.ndim != 3 or logits.shape[0] != 2:
        raise ShapeError(f"logits must be 2 x H x W, got {tuple(logits.shape)}")
    if logits.shape[1:] != mask.shape:
        raise ShapeError(f"mask shape {tuple(mask.shape)} != logits spatial")
    if not torch.isfinite(logits).all():
        raise ValidationError("non-finite logits")
    logp = F.log_softmax(logits, dim=0)
    picked = torch.gather(logp, 0, mask.long().unsqueeze(0)).squeeze(0)
    return -(weights.to(logits.dtype) * picked).mean()


def total_loss(
    logits: torch.Tensor, mask: torch.Tensor, weights: torch.Tensor, eps: float = 1e-5
) -> torch.Tensor:
    """Unweighted sum of soft dice on the foreground probability and weighted CE."""
    prob_fg = torch.softmax(logits, dim=0)[1]
    return dice_loss(prob_fg, mask, eps) + weighted_ce_loss(logits, mask, weights)


def batch_total_loss(
    logits: torch.Tensor, masks: torch.Tensor, weights: torch.Tensor
) -> torch.Tensor:
    """Mean total loss over a batch of N x 2 x H x W logits."""
    losses = [total_loss(logits[i], masks[i], weights[i]) for i in range(logits.shape[0])]
    return torch.stack(losses).mean()
