"""Full network: backbone + controller + dynamic head, with checkpoint I/O."""

from __future__ import annotations

import math

import torch
import torch.nn as nn

from .backbone import Backbone, BackboneConfig, build_backbone
from .datamodel import ClassRegistry, ScaleRegistry, default_registries
from .dynamic_head import (
    TOTAL_HEAD_PARAMS,
    controller_forward,
    head_forward,
    make_controller,
)
from .errors import ValidationError


class OmniSegNet(nn.Module):
    """End-to-end network mapping (images, task codes, scale codes) to 2-channel logits."""

    def __init__(self, config: BackboneConfig, classes: ClassRegistry, scales: ScaleRegistry):
        super().__init__()
        self.config = config
        self.classes = classes
        self.scales = scales
        self.backbone = Backbone(config)
        self.controller = make_controller(
            classes.m, scales.n, config.bottleneck_channels
        )

    def forward(self, images, task_codes, scale_codes):
        feats = self.backbone(images)
        omega = controller_forward(
            feats.gap_feature, task_codes, scale_codes, self.controller
        )
        return head_forward(feats.decoder_map, omega)


def build_model(
    config: BackboneConfig | None = None,
    classes: ClassRegistry | None = None,
    scales: ScaleRegistry | None = None,
    seed: int = 0,
) -> OmniSegNet:
    """Deterministically initialized network; controller init is uniform fan-in."""
    if config is None:
        config = BackboneConfig()
    if classes is None or scales is None:
        classes, scales = default_registries()
    torch.manual_seed(seed)
    net = OmniSegNet(config, classes, scales)
    net.backbone = build_backbone(config, seed)
    bound = 1.0 / math.sqrt(net.controller.in_features)
    torch.manual_seed(seed + 1)
    nn.init.uniform_(net.controller.weight, -bound, bound)
    nn.init.zeros_(net.controller.bias)
    assert net.controller.out_features == TOTAL_HEAD_PARAMS
    return net


def save_checkpoint(path, net: OmniSegNet, epoch: int, val_dsc: float) -> None:
    torch.save(
        {
            "config": net.config.to_dict(),
            "classes": net.classes.to_dict(),
            "scales": net.scales.to_dict(),
            "state_dict": net.state_dict(),
            "epoch": epoch,
            "val_dsc": val_dsc,
        },
        path,
    )


def load_checkpoint(path) -> tuple[OmniSegNet, dict]:
    try:
        blob = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise ValidationError(f"cannot read checkpoint {path}: {exc}") from exc
    for key in ("config", "classes", "scales", "state_dict"):
        if key not in blob:
            raise ValidationError(f"checkpoint {path} missing field {key!r}")
    net = OmniSegNet(
        BackboneConfig.from_dict(blob["config"]),
        ClassRegistry.from_dict(blob["classes"]),
        ScaleRegistry.from_dict(blob["scales"]),
    )
    net.load_state_dict(blob["state_dict"])
    net.eval()
    return net, blob
