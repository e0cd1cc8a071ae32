"""2D residual U-Net backbone producing the decoder map and the bottleneck GAP feature."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from .errors import ShapeError, ValidationError


@dataclass(frozen=True)
class BackboneConfig:
    in_channels: int = 3
    base_channels: int = 32
    levels: int = 4
    bottleneck_channels: int = 256
    decoder_out_channels: int = 8
    groupnorm_groups: int = 8

    def __post_init__(self):
        widths = [self.base_channels * 2**l for l in range(self.levels + 1)]
        for w in widths + [self.bottleneck_channels]:
            if w % self.groupnorm_groups != 0:
                raise ValidationError(
                    f"groupnorm_groups={self.groupnorm_groups} must divide channel width {w}"
                )

    def to_dict(self) -> dict:
        return self.__dict__.copy()

    @classmethod
    def from_dict(cls, d: dict) -> "BackboneConfig":
        return cls(**d)


@dataclass
class BackboneFeatures:
    decoder_map: torch.Tensor  # N x 8 x H x W
    gap_feature: torch.Tensor  # N x bottleneck_channels


class ResidualBlock(nn.Module):
    """Two 3x3 convs, each followed by ReLU then group norm, plus a shortcut."""

    def __init__(self, in_ch, out_ch, groups):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.norm1 = nn.GroupNorm(groups, out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.norm2 = nn.GroupNorm(groups, out_ch)
        self.shortcut = (
            nn.Identity() if in_ch == out_ch else nn.Conv2d(in_ch, out_ch, 1)
        )
        self.relu = nn.ReLU(inplace=False)

    def forward(self, x):
        out = self.norm1(self.relu(self.conv1(x)))
        out = self.norm2(self.relu(self.conv2(out)))
        return out + self.shortcut(x)


class DecoderStage(nn.Module):
    """Nearest x2 upsample + channel-halving conv, skip concat, residual refinement."""

    def __init__(self, in_ch, skip_ch, out_ch, groups):
        super().__init__()
        self.up = nn.Upsample(scale_factor=2, mode="nearest")
        self.reduce = nn.Conv2d(in_ch, in_ch // 2, 1)
        self.refine = ResidualBlock(in_ch // 2 + skip_ch, out_ch, groups)

    def forward(self, x, skip):
        x = self.reduce(self.up(x))
        return self.refine(torch.cat([x, skip], dim=1))


class Backbone(nn.Module):
    """Residual U-Net; forward returns the 8-channel decoder map and a GAP vector
    taken from the 3x3 convolutional fusion layer at the bottleneck."""

    def __init__(self, config: BackboneConfig):
        super().__init__()
        self.config = config
        c = config.base_channels
        g = config.groupnorm_groups

        self.stem = ResidualBlock(config.in_channels, c, g)
        downs, encs = [], []
        ch = c
        for _ in range(config.levels):
            downs.append(nn.Conv2d(ch, ch * 2, 3, stride=2, padding=1))
            encs.append(ResidualBlock(ch * 2, ch * 2, g))
            ch *= 2
        self.down = nn.ModuleList(downs)
        self.encoder = nn.ModuleList(encs)

        self.fusion = nn.Conv2d(ch, config.bottleneck_channels, 3, padding=1)
        self.fusion_norm = nn.GroupNorm(g, config.bottleneck_channels)
        self.relu = nn.ReLU(inplace=False)

        decs = []
        dec_in = config.bottleneck_channels
        for l in range(config.levels - 1, -1, -1):
            skip_ch = c * 2**l
            decs.append(DecoderStage(dec_in, skip_ch, skip_ch, g))
            dec_in = skip_ch
        self.decoder = nn.ModuleList(decs)
        self.out_norm = nn.GroupNorm(g, c)
        self.project = nn.Conv2d(c, config.decoder_out_channels, 3, padding=1)

    def forward(self, images: torch.Tensor) -> BackboneFeatures:
        if images.ndim != 4 or images.shape[1] != self.config.in_channels:
            raise ShapeError(
                f"expected N x {self.config.in_channels} x H x W input, got {tuple(images.shape)}"
            )
        if not torch.isfinite(images).all():
            raise ValidationError("backbone input contains non-finite values")
        h, w = images.shape[2], images.shape[3]
        stride = 2**self.config.levels
        if h % stride or w % stride:
            raise ShapeError(
                f"input spatial dims {h}x{w} must be divisible by 2^levels={stride}"
            )

        x = self.stem(images)
        skips = [x]
        for down, enc in zip(self.down, self.encoder):
            x = enc(down(x))
            skips.append(x)

        bottleneck = self.fusion_norm(self.relu(self.fusion(x)))
        gap = bottleneck.mean(dim=(2, 3))

        x = bottleneck
        for stage, skip in zip(self.decoder, reversed(skips[:-1])):
            x = stage(x, skip)
        x = self.out_norm(x)
        return BackboneFeatures(decoder_map=self.project(x), gap_feature=gap)


def _init_weights(module: nn.Module) -> None:
    # ReLU gain only for convs actually followed by a ReLU; the rest (shortcuts,
    # downsamplers, channel reducers, output projection) are linear and would
    # otherwise amplify activations at every stage.
    relu_convs = {"conv1", "conv2", "fusion"}
    for name, m in module.named_modules():
        if isinstance(m, nn.Conv2d):
            leaf = name.rsplit(".", 1)[-1]
            nonlin = "relu" if leaf in relu_convs else "linear"
            nn.init.kaiming_uniform_(m.weight, mode="fan_in", nonlinearity=nonlin)
            nn.init.zeros_(m.bias)
        elif isinstance(m, nn.GroupNorm):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)


def build_backbone(config: BackboneConfig, seed: int) -> Backbone:
    """Construct a backbone with deterministic initialization under `seed`."""
    torch.manual_seed(seed)
    net = Backbone(config)
    _init_weights(net)
    return net
