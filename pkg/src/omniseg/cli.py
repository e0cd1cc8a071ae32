"""Command-line entry point: train / eval / predict / stitch / gen-synthetic."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .backbone import BackboneConfig
from .datamodel import default_registries
from .dynamic_head import prediction_mask
from .errors import OmnisegError, ShapeError, ValidationError
from .metrics import aggregate_report
from .model import load_checkpoint
from .synthetic import SyntheticSpec, gen_synthetic
from .training import TrainConfig, batch_to_tensors, evaluate, train

logger = logging.getLogger("omniseg")


def _load_split_samples(manifest, split, classes, scales):
    rows = manifest.split_rows(split)
    return [dataio.load_sample(r, manifest.root, classes, scales) for r in rows]


def cmd_train(args) -> int:
    classes, scales = default_registries()
    manifest = dataio.load_manifest(args.manifest, classes, scales)
    train_samples = _load_split_samples(manifest, dataio.Split.TRAIN, classes, scales)
    val_samples = _load_split_samples(manifest, dataio.Split.VAL, classes, scales)

    config = TrainConfig(
        batch_size=args.batch_size,
        lr=args.lr,
        lr_decay=args.lr_decay,
        epochs=args.epochs,
        seed=args.seed,
        max_steps=args.max_steps,
    )
    model_config = BackboneConfig(levels=args.levels, base_channels=args.base_channels)
    out = Path(args.out)
    result = train(
        train_samples, val_samples, config, model_config, classes, scales, out_dir=out
    )
    log_lines = [
        f"epoch {h.epoch} lr {h.lr:.10g} train_loss {h.train_loss:.6f} val_dsc {h.val_dsc:.6f}"
        for h in result.history
    ]
    (out / "train_log.txt").write_text("\n".join(log_lines) + "\n", encoding="utf-8")
    print(f"best epoch {result.best_epoch} val_dsc {result.best_val_dsc:.6f}")
    return 0


def cmd_eval(args) -> int:
    net, _ = load_checkpoint(args.checkpoint)
    manifest = dataio.load_manifest(args.manifest, net.classes, net.scales)
    rows = manifest.split_rows(dataio.Split.TEST)
    if not rows:
        raise ValidationError("no test rows in manifest")
    samples = [dataio.load_sample(r, manifest.root, net.classes, net.scales) for r in rows]
    _, per_image = evaluate(net, samples, batch_size=args.batch_size)
    report = aggregate_report(per_image)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    print(report.to_text(), end="")
    return 0


def cmd_predict(args) -> int:
    import torch

    net, _ = load_checkpoint(args.checkpoint)
    image = dataio.read_image(args.image)
    h, w = image.shape[:2]
    stride = 2**net.config.levels
    if h % stride or w % stride:
        raise ShapeError(
            f"input is {h}x{w}; spatial dims must be divisible by {stride} "
            f"(for 256x256 patches, combine four with `omniseg stitch` into 512x512)"
        )
    entry = net.classes.by_name(args.task)
    scale = net.scales.by_magnification(args.magnification)
    from .datamodel import Sample

    sample = Sample(
        image=image,
        mask=np.zeros(image.shape[:2], dtype=np.uint8),
        task_id=entry.task_id,
        scale_id=scale.scale_id,
    )
    images, _, _, tasks, scales_t = batch_to_tensors(
        [sample], net.classes, net.scales, boundary_weight=1.0
    )
    with torch.no_grad():
        logits = net(images, tasks, scales_t)
    mask = prediction_mask(logits)[0].numpy().astype(np.uint8)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataio.write_image(out / "mask.png", mask)
    overlay = image.copy()
    tint = np.array([1.0, 0.0, 0.0])
    fg = mask.astype(bool)
    overlay[fg] = 0.6 * overlay[fg] + 0.4 * tint
    dataio.write_image(out / "overlay.png", overlay)
    print(f"wrote {out / 'mask.png'} and {out / 'overlay.png'}")
    return 0


def cmd_stitch(args) -> int:
    patches = [dataio.read_image(p) for p in args.images]
    stitched = dataio.stitch4(patches)
    dataio.write_image(args.out, stitched)
    print(f"wrote {args.out}")
    return 0


def cmd_gen_synthetic(args) -> int:
    spec = SyntheticSpec(
        train_per_task=args.count,
        val_per_task=args.val_count,
        test_per_task=args.test_count,
        image_size=args.size,
        noise=args.noise,
        seed=args.seed,
    )
    manifest = gen_synthetic(spec, args.out)
    print(f"wrote {len(manifest.rows)} rows to {Path(args.out) / 'manifest.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="omniseg",
        description="Multi-site multi-scale partially-labeled segmentation pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--lr-decay", type=float, default=0.99)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--base-channels", type=int, default=32)
    p.add_argument("--workers", type=int, default=0, help="data-loading workers (results are N-independent)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the manifest test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--workers", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="segment one image with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--magnification", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("stitch", help="stitch four square patches into one image")
    p.add_argument("images", nargs=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stitch)

    p = sub.add_parser("gen-synthetic", help="generate a synthetic dataset + manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=8, help="training images per task")
    p.add_argument("--val-count", type=int, default=2)
    p.add_argument("--test-count", type=int, default=2)
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--noise", type=float, default=0.03)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_synthetic)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OmnisegError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # unexpected runtime failure
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
