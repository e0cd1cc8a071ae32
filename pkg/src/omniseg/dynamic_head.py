"""Class/scale-aware controller and the per-sample dynamic filtering head.

The controller is a single 1x1 convolution over the concatenated
(gap_feature || task_code || scale_code) vector, i.e. an affine map
267 -> 162. The 162 outputs are sliced into three 1x1 conv layers
(8->8, 8->8, 8->2, weights then bias per layer) that filter the
decoder map into 2-channel logits, with ReLU after layers 1 and 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ShapeError

# (in, out) channel pairs of the three 1x1 head layers.
HEAD_LAYERS = ((8, 8), (8, 8), (8, 2))
# Per-layer parameter counts: weights + bias.
LAYER_SIZES = tuple(i * o + o for i, o in HEAD_LAYERS)  # (72, 72, 18)
TOTAL_HEAD_PARAMS = sum(LAYER_SIZES)  # 162

assert TOTAL_HEAD_PARAMS == 162 and LAYER_SIZES == (72, 72, 18)


@dataclass
class HeadParams:
    """Sliced dynamic-head parameters for a batch; weights are (N, out, in)."""

    w1: torch.Tensor
    b1: torch.Tensor
    w2: torch.Tensor
    b2: torch.Tensor
    w3: torch.Tensor
    b3: torch.Tensor


def controller_in_features(m: int, n: int, gap_channels: int = 256) -> int:
    return gap_channels + m + n


def make_controller(m: int, n: int, gap_channels: int = 256) -> nn.Linear:
    """The class-aware controller: one affine layer emitting all head parameters."""
    return nn.Linear(controller_in_features(m, n, gap_channels), TOTAL_HEAD_PARAMS)


def controller_forward(
    gap_feature: torch.Tensor,
    task_code: torch.Tensor,
    scale_code: torch.Tensor,
    controller: nn.Linear,
) -> torch.Tensor:
    """Fuse gap||task||scale and map to the 162-value parameter vector per sample."""
    if gap_feature.ndim != 2:
        raise ShapeError(f"gap_feature must be N x C, got {tuple(gap_feature.shape)}")
    n_batch = gap_feature.shape[0]
    if task_code.ndim == 1:
        task_code = task_code.unsqueeze(0).expand(n_batch, -1)
    if scale_code.ndim == 1:
        scale_code = scale_code.unsqueeze(0).expand(n_batch, -1)
    fused = torch.cat([gap_feature, task_code, scale_code], dim=1)
    expected = controller.in_features
    if fused.shape[1] != expected:
        raise ShapeError(
            f"fused controller input has {fused.shape[1]} features, expected {expected} "
            f"(gap {gap_feature.shape[1]} + task {task_code.shape[1]} + scale {scale_code.shape[1]})"
        )
    return controller(fused)


def slice_params(omega: torch.Tensor) -> HeadParams:
    """Partition omega rows as [w1(64), b1(8), w2(64), b2(8), w3(16), b3(2)].

    Accepts (162,) or (N, 162); weights reshape row-major to (out, in).
    """
    if omega.ndim == 1:
        omega = omega.unsqueeze(0)
    if omega.ndim != 2 or omega.shape[1] != TOTAL_HEAD_PARAMS:
        raise ShapeError(
            f"omega must have {TOTAL_HEAD_PARAMS} entries per sample, got {tuple(omega.shape)}"
        )
    n = omega.shape[0]
    parts = []
    offset = 0
    for c_in, c_out in HEAD_LAYERS:
        w = omega[:, offset : offset + c_in * c_out].reshape(n, c_out, c_in)
        offset += c_in * c_out
        b = omega[:, offset : offset + c_out]
        offset += c_out
        parts.extend([w, b])
    assert offset == TOTAL_HEAD_PARAMS
    return HeadParams(*parts)


def head_forward(decoder_map: torch.Tensor, omega: torch.Tensor) -> torch.Tensor:
    """Filter the decoder map with per-sample 1x1 convolutions; returns N x 2 x H x W logits."""
    if decoder_map.ndim != 4 or decoder_map.shape[1] != HEAD_LAYERS[0][0]:
        raise ShapeError(
            f"decoder map must be N x {HEAD_LAYERS[0][0]} x H x W, got {tuple(decoder_map.shape)}"
        )
    p = slice_params(omega)
    if p.w1.shape[0] != decoder_map.shape[0]:
        raise ShapeError(
            f"batch mismatch: {decoder_map.shape[0]} maps vs {p.w1.shape[0]} omega rows"
        )
    x = _conv1x1(decoder_map, p.w1, p.b1)
    x = F.relu(x)
    x = _conv1x1(x, p.w2, p.b2)
    x = F.relu(x)
    return _conv1x1(x, p.w3, p.b3)


def _conv1x1(x: torch.Tensor, w: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    # Per-sample 1x1 conv == per-pixel affine map with that sample's matrix.
    return torch.einsum("noi,nihw->nohw", w, x) + b[:, :, None, None]


def prediction_probs(logits: torch.Tensor) -> torch.Tensor:
    return torch.softmax(logits, dim=1)


def prediction_mask(logits: torch.Tensor) -> torch.Tensor:
    return torch.argmax(logits, dim=1)
