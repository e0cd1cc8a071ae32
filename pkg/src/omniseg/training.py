"""Partial-label training engine: per-task image pools, SGD loop, checkpoint selection."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .augment import AugmentConfig, augment
from .backbone import BackboneConfig
from .datamodel import ClassRegistry, Sample, ScaleRegistry, encode_scale, encode_task
from .dynamic_head import prediction_mask
from .errors import RegistryError, ValidationError
from .losses import batch_total_loss, boundary_weight_map
from .metrics import dsc as dsc_metric
from .metrics import iou as iou_metric
from .model import OmniSegNet, build_model, save_checkpoint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 4
    lr: float = 0.001
    lr_decay: float = 0.99
    epochs: int = 100
    aug_probability: float = 0.5
    seed: int = 0
    boundary_weight: float = 1.2
    pool_capacity: int = 8
    max_steps: int | None = None  # optional hard cap on optimizer steps
    augment_enabled: bool = True

    def __post_init__(self):
        if self.batch_size > self.pool_capacity:
            raise ValidationError("batch_size must not exceed pool capacity")
        if not 0 < self.lr_decay <= 1:
            raise ValidationError("lr_decay must be in (0, 1]")


class ImagePool:
    """FIFO buffer of same-task samples; emits a full batch once it holds enough."""

    def __init__(self, task_id: int, capacity: int = 8, batch_size: int = 4):
        self.task_id = task_id
        self.capacity = capacity
        self.batch_size = batch_size
        self.buffer: deque[Sample] = deque()

    def feed(self, sample: Sample) -> list[Sample] | None:
        if sample.task_id != self.task_id:
            raise RegistryError(
                f"sample task {sample.task_id} fed to pool for task {self.task_id}"
            )
        if len(self.buffer) >= self.capacity:
            raise ValidationError(f"pool for task {self.task_id} overflowed capacity")
        self.buffer.append(sample)
        if len(self.buffer) >= self.batch_size:
            return [self.buffer.popleft() for _ in range(self.batch_size)]
        return None

    def __len__(self):
        return len(self.buffer)


@dataclass
class PoolStats:
    fed: int = 0
    emitted: int = 0
    discarded: int = 0


class PoolSet:
    """One pool per task id, with count-conservation bookkeeping."""

    def __init__(self, task_ids, capacity: int = 8, batch_size: int = 4):
        self.pools = {t: ImagePool(t, capacity, batch_size) for t in task_ids}
        self.stats = PoolStats()

    def feed(self, sample: Sample) -> list[Sample] | None:
        if sample.task_id not in self.pools:
            raise RegistryError(f"no pool for task_id {sample.task_id}")
        self.stats.fed += 1
        batch = self.pools[sample.task_id].feed(sample)
        if batch is not None:
            self.stats.emitted += len(batch)
        return batch

    def discard_partial(self) -> int:
        """End-of-epoch flush: drop leftover samples from every pool."""
        dropped = sum(len(p) for p in self.pools.values())
        for p in self.pools.values():
            p.buffer.clear()
        self.stats.discarded += dropped
        return dropped


def sgd_step(params, grads, lr: float) -> None:
    """Plain SGD update p <- p - lr * g, in place."""
    if lr <= 0:
        raise ValidationError("lr must be positive")
    with torch.no_grad():
        for name, p, g in params_with_grads(params, grads):
            if not torch.isfinite(g).all():
                raise ValidationError(f"non-finite gradient for parameter {name}")
            p -= lr * g


def params_with_grads(params, grads):
    if isinstance(params, dict):
        for name, p in params.items():
            yield name, p, grads[name]
    else:
        for i, (p, g) in enumerate(zip(params, grads)):
            yield str(i), p, g


def batch_to_tensors(
    batch: list[Sample],
    classes: ClassRegistry,
    scales: ScaleRegistry,
    boundary_weight: float,
    dtype=torch.float32,
):
    images = torch.from_numpy(
        np.stack([s.image.transpose(2, 0, 1) for s in batch])
    ).to(dtype)
    masks = torch.from_numpy(np.stack([s.mask for s in batch]).astype(np.int64))
    weights = torch.from_numpy(
        np.stack([boundary_weight_map(s.mask, boundary_weight) for s in batch])
    ).to(dtype)
    tasks = torch.from_numpy(
        np.stack([encode_task(s.task_id, classes.m) for s in batch])
    ).to(dtype)
    scales_t = torch.from_numpy(
        np.stack([encode_scale(s.scale_id, scales.n) for s in batch])
    ).to(dtype)
    return images, masks, weights, tasks, scales_t


@torch.no_grad()
def evaluate(net: OmniSegNet, samples: list[Sample], batch_size: int = 4):
    """Un-augmented forward pass; returns (mean DSC, per-image (label, dsc, iou))."""
    if not samples:
        raise ValidationError("evaluate requires a nonempty sample list")
    net.eval()
    per_image = []
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        images, masks, _, tasks, scales_t = batch_to_tensors(
            chunk, net.classes, net.scales, boundary_weight=1.0
        )
        logits = net(images, tasks, scales_t)
        pred = prediction_mask(logits).numpy()
        for i, s in enumerate(chunk):
            label = net.classes.entry(s.task_id).semantic_label
            per_image.append(
                (label, dsc_metric(pred[i], s.mask), iou_metric(pred[i], s.mask))
            )
    mean_dsc = float(np.mean([d for _, d, _ in per_image]))
    return mean_dsc, per_image


@dataclass
class EpochLog:
    epoch: int
    lr: float
    train_loss: float
    val_dsc: float


@dataclass
class TrainResult:
    best_epoch: int
    best_val_dsc: float
    history: list[EpochLog] = field(default_factory=list)
    best_path: Path | None = None
    steps: int = 0
    net: OmniSegNet | None = None  # final-epoch weights


def lr_schedule(lr0: float, decay: float, epoch: int) -> float:
    """Learning rate used in a given epoch: lr0 * decay**epoch."""
    return lr0 * decay**epoch


def train(
    train_samples: list[Sample],
    val_samples: list[Sample],
    config: TrainConfig,
    model_config: BackboneConfig | None = None,
    classes: ClassRegistry | None = None,
    scales: ScaleRegistry | None = None,
    out_dir=None,
) -> TrainResult:
    """Full training loop: pooled homogeneous batches, SGD with per-epoch lr decay,
    best checkpoint chosen by validation mean DSC. Deterministic under config.seed.
    """
    if not train_samples:
        raise ValidationError("empty training set")
    if not val_samples:
        raise ValidationError("empty validation set")
    if classes is None or scales is None:
        from .datamodel import default_registries

        classes, scales = default_registries()

    torch.manual_seed(config.seed)
    net = build_model(model_config, classes, scales, seed=config.seed)
    params = dict(net.named_parameters())
    aug_cfg = AugmentConfig(probability=config.aug_probability)

    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    result = TrainResult(best_epoch=-1, best_val_dsc=-1.0)
    steps = 0
    done = False
    for epoch in range(config.epochs):
        lr = lr_schedule(config.lr, config.lr_decay, epoch)
        net.train()
        pools = PoolSet(
            [e.task_id for e in classes.entries], config.pool_capacity, config.batch_size
        )
        order = np.random.default_rng((config.seed, epoch)).permutation(len(train_samples))
        losses = []
        for idx in order:
            sample = train_samples[int(idx)]
            if config.augment_enabled:
                rng = np.random.default_rng((config.seed, epoch, int(idx)))
                sample = augment(sample, rng, aug_cfg)
            batch = pools.feed(sample)
            if batch is None:
                continue
            assert len({s.task_id for s in batch}) == 1, "batch must be task-homogeneous"
            images, masks, weights, tasks, scales_t = batch_to_tensors(
                batch, classes, scales, config.boundary_weight
            )
            logits = net(images, tasks, scales_t)
            loss = batch_total_loss(logits, masks, weights)
            net.zero_grad()
            loss.backward()
            sgd_step(params, {n: p.grad for n, p in params.items()}, lr)
            losses.append(float(loss.detach()))
            steps += 1
            if config.max_steps is not None and steps >= config.max_steps:
                done = True
                break
        pools.discard_partial()

        val_dsc, _ = evaluate(net, val_samples, config.batch_size)
        train_loss = float(np.mean(losses)) if losses else float("nan")
        result.history.append(EpochLog(epoch, lr, train_loss, val_dsc))
        logger.info(
            "epoch %d lr %.6g train_loss %.4f val_dsc %.4f", epoch, lr, train_loss, val_dsc
        )
        if val_dsc > result.best_val_dsc:
            result.best_epoch = epoch
            result.best_val_dsc = val_dsc
            if out_dir is not None:
                best_path = out_dir / "best.pt"
                save_checkpoint(best_path, net, epoch, val_dsc)
                (out_dir / "best").write_text(
                    f"best.pt epoch={epoch} val_dsc={val_dsc:.6f}\n", encoding="utf-8"
                )
                result.best_path = best_path
        if done:
            break

    result.steps = steps
    if out_dir is not None:
        save_checkpoint(out_dir / "last.pt", net, result.history[-1].epoch,
                        result.history[-1].val_dsc)
    result.net = net
    return result
