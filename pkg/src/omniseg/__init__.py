"""Single dynamic network for multi-site, multi-scale partial-label segmentation."""

from .backbone import Backbone, BackboneConfig, BackboneFeatures, build_backbone
from .datamodel import (
    ClassRegistry,
    Sample,
    ScaleRegistry,
    Source,
    Split,
    default_registries,
    encode_scale,
    encode_task,
)
from .dynamic_head import (
    HEAD_LAYERS,
    LAYER_SIZES,
    TOTAL_HEAD_PARAMS,
    controller_forward,
    head_forward,
    make_controller,
    slice_params,
)
from .losses import boundary_weight_map, dice_loss, total_loss, weighted_ce_loss
from .metrics import MetricsReport, aggregate_report, dsc, iou
from .model import OmniSegNet, build_model, load_checkpoint, save_checkpoint
from .training import ImagePool, PoolSet, TrainConfig, evaluate, lr_schedule, sgd_step, train

__all__ = [
    "Backbone",
    "BackboneConfig",
    "BackboneFeatures",
    "ClassRegistry",
    "HEAD_LAYERS",
    "ImagePool",
    "LAYER_SIZES",
    "MetricsReport",
    "OmniSegNet",
    "PoolSet",
    "Sample",
    "ScaleRegistry",
    "Source",
    "Split",
    "TOTAL_HEAD_PARAMS",
    "TrainConfig",
    "aggregate_report",
    "boundary_weight_map",
    "build_backbone",
    "build_model",
    "controller_forward",
    "default_registries",
    "dice_loss",
    "dsc",
    "encode_scale",
    "encode_task",
    "evaluate",
    "head_forward",
    "iou",
    "load_checkpoint",
    "lr_schedule",
    "make_controller",
    "save_checkpoint",
    "sgd_step",
    "slice_params",
    "total_loss",
    "train",
    "weighted_ce_loss",
]
