"""Training-time augmentation: each transform applied independently with p=0.5.

Geometric transforms (affine, flips) hit image and mask together, with
nearest-neighbor mask resampling; photometric transforms (contrast,
brightness, coarse dropout, blur, noise) touch the image only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .datamodel import Sample


@dataclass(frozen=True)
class AugmentConfig:
    probability: float = 0.5
    max_rotation_deg: float = 15.0
    max_translate_frac: float = 0.10
    max_scale_delta: float = 0.10
    brightness_delta: float = 0.10
    contrast_range: tuple[float, float] = (0.8, 1.2)
    blur_sigma_max: float = 1.5
    noise_sigma_max: float = 0.02
    dropout_area_frac: float = 0.05


def _affine(image, mask, rng, cfg):
    h, w = mask.shape
    angle = np.deg2rad(rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg))
    scale = 1.0 + rng.uniform(-cfg.max_scale_delta, cfg.max_scale_delta)
    ty = rng.uniform(-cfg.max_translate_frac, cfg.max_translate_frac) * h
    tx = rng.uniform(-cfg.max_translate_frac, cfg.max_translate_frac) * w
    c, s = np.cos(angle), np.sin(angle)
    # Inverse map (output -> input) about the image center.
    mat = np.array([[c, -s], [s, c]]) / scale
    center = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    offset = center - mat @ (center + np.array([ty, tx]))
    out_img = np.stack(
        [
            ndimage.affine_transform(image[..., ch], mat, offset=offset, order=1, mode="nearest")
            for ch in range(image.shape[2])
        ],
        axis=2,
    )
    out_mask = ndimage.affine_transform(
        mask.astype(np.float32), mat, offset=offset, order=0, cval=0.0
    )
    return out_img, (out_mask > 0.5).astype(mask.dtype)


def _coarse_dropout(image, rng, cfg):
    h, w = image.shape[:2]
    area = cfg.dropout_area_frac * h * w
    side = max(1, int(np.sqrt(area * rng.uniform(0.2, 1.0))))
    y = rng.integers(0, max(1, h - side + 1))
    x = rng.integers(0, max(1, w - side + 1))
    out = image.copy()
    out[y : y + side, x : x + side] = rng.uniform(0.0, 1.0)
    return out


def augment(sample: Sample, rng: np.random.Generator, cfg: AugmentConfig | None = None) -> Sample:
    """Randomly transformed copy of `sample`; mask stays binary, dims unchanged."""
    cfg = cfg or AugmentConfig()
    p = cfg.probability
    img = sample.image.astype(np.float64, copy=True)
    mask = sample.mask.copy()

    if rng.random() < p:
        img, mask = _affine(img, mask, rng, cfg)
    if rng.random() < p:  # horizontal flip
        img, mask = img[:, ::-1].copy(), mask[:, ::-1].copy()
    if rng.random() < p:  # vertical flip
        img, mask = img[::-1].copy(), mask[::-1].copy()
    if rng.random() < p:  # contrast about the mean
        factor = rng.uniform(*cfg.contrast_range)
        img = (img - img.mean()) * factor + img.mean()
    if rng.random() < p:  # brightness
        img = img + rng.uniform(-cfg.brightness_delta, cfg.brightness_delta)
    if rng.random() < p:
        img = _coarse_dropout(img, rng, cfg)
    if rng.random() < p:  # gaussian blur
        sigma = rng.uniform(0.0, cfg.blur_sigma_max)
        if sigma > 0:
            img = ndimage.gaussian_filter(img, sigma=(sigma, sigma, 0))
    if rng.random() < p:  # gaussian noise
        sigma = rng.uniform(0.0, cfg.noise_sigma_max)
        img = img + rng.normal(0.0, sigma, size=img.shape)

    img = np.clip(img, 0.0, 1.0)
    return replace(sample, image=img, mask=mask)
