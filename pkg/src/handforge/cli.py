"""Command-line surface: dataset generation, training, evaluation, ablation
grids, the annotation server and single-scene previews.

Exit codes: 0 success, 1 usage error, 2 runtime failure. Explicit flags win
over the config file; the config file wins over built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .dataset import generate_dataset, load_manifest
from .errors import HandforgeError
from .evaluate import (
    MetricReport,
    ablation_csv,
    ablation_rows,
    ablation_text,
    evaluate_dataset,
    report_csv,
    report_text,
)
from .masks import mask_from_instance
from .plots import save_ablation_figure, save_metrics_figure, save_training_curves
from .randomize import (
    DatasetPreset,
    RandomizationConfig,
    config_from_dict,
    load_config,
    sample_scene,
)
from .render import render, save_image
from .train import (
    EarlyStopConfig,
    LineSearchConfig,
    PixelSegmenter,
    fit,
    line_search_lr,
    load_checkpoint,
    save_checkpoint,
    training_log_csv,
)

USAGE_EXIT = 1
RUNTIME_EXIT = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(USAGE_EXIT)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="handforge",
                     description="synthetic hand-segmentation dataset forge")
    parser.add_argument("--version", action="version", version=f"handforge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="render a randomized dataset")
    gen.add_argument("--preset", required=True, help="dataset preset A..F")
    gen.add_argument("--count", type=int, default=1000, help="number of images")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output dataset directory")
    gen.add_argument("--config", help="randomization config YAML")
    gen.add_argument("--backgrounds", help="real background image directory (preset F)")
    gen.add_argument("--train-fraction", type=float, default=0.8)
    gen.add_argument("--jobs", type=int, default=1, help="parallel render workers")
    gen.add_argument("--format", default="png", choices=["png", "ppm"])

    tr = sub.add_parser("train", help="train the reference pixel segmenter")
    tr.add_argument("--data", required=True, help="dataset dir or annotations.json")
    tr.add_argument("--lr", type=float, default=None, help="fixed learning rate")
    tr.add_argument("--lr-search", nargs="*", type=float, metavar="RATE",
                    default=None, help="line search (optional explicit grid)")
    tr.add_argument("--patience", type=int, default=15)
    tr.add_argument("--max-epochs", type=int, default=150)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--out", default=".", help="output directory for checkpoint/logs")

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    ev.add_argument("--model", required=True,
                    help="checkpoint .npz, or 'gt' for a ground-truth self-check")
    ev.add_argument("--data", required=True, help="dataset dir or annotations.json")
    ev.add_argument("--split", default="all", choices=["train", "val", "test", "all"])
    ev.add_argument("--out", default=".", help="output directory for reports")
    ev.add_argument("--name", default=None, help="model identity in reports")

    ab = sub.add_parser("ablate", help="comparison grid from eval report JSONs")
    ab.add_argument("--reports", nargs="+", required=True, help="report.json files")
    ab.add_argument("--out", default=".", help="output directory")

    an = sub.add_parser("annotate", help="serve the polygon annotation tool")
    an.add_argument("--images", required=True, help="directory of real images")
    an.add_argument("--port", type=int, default=8008)
    an.add_argument("--host", default="127.0.0.1")
    an.add_argument("--manifest-out", default=None)
    an.add_argument("--ui", default=None, help="built UI bundle directory")

    pv = sub.add_parser("preview", help="render one sample with its mask")
    pv.add_argument("--preset", required=True)
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--index", type=int, default=0)
    pv.add_argument("--config", help="randomization config YAML")
    pv.add_argument("--backgrounds", help="real background image directory")
    pv.add_argument("--out", default=".", help="output directory")

    return parser


def _resolve_config(args) -> RandomizationConfig:
    config = load_config(args.config) if getattr(args, "config", None) \
        else config_from_dict({})
    if getattr(args, "backgrounds", None):  # explicit flag beats config file
        from dataclasses import replace
        config = replace(config, backgrounds_dir=args.backgrounds)
    return config


def _load_data(path: str):
    manifest_path = path
    if os.path.isdir(path):
        manifest_path = os.path.join(path, "annotations.json")
    if not os.path.exists(manifest_path):
        raise HandforgeError(f"dataset manifest not found: {manifest_path}")
    return load_manifest(manifest_path)


# ---------------------------------------------------------------------------
# Subcommand bodies
# ---------------------------------------------------------------------------

def _cmd_generate(args, parser) -> int:
    if args.count < 1:
        parser.error("--count must be >= 1")
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    preset = DatasetPreset.parse(args.preset)
    config = _resolve_config(args)
    manifest = generate_dataset(config, preset, args.count, args.seed, args.out,
                                train_fraction=args.train_fraction, jobs=args.jobs,
                                image_format=args.format)
    counts = manifest.split_counts
    print(f"dataset {manifest.name}: {len(manifest.records)} images "
          f"(train={counts.get('train', 0)} val={counts.get('val', 0)}) "
          f"-> {os.path.join(str(args.out), 'annotations.json')}")
    return 0


def _cmd_train(args, parser) -> int:
    if (args.lr is None) == (args.lr_search is None):
        parser.error("choose exactly one of --lr or --lr-search")
    manifest = _load_data(args.data)
    train_set = manifest.filter_split("train")
    val_set = manifest.filter_split("val")
    if not train_set.records or not val_set.records:
        raise HandforgeError("dataset needs non-empty train and val splits")
    os.makedirs(args.out, exist_ok=True)
    early = EarlyStopConfig(patience=args.patience, max_epochs=args.max_epochs)

    if args.lr_search is not None:
        cfg = LineSearchConfig(tuple(args.lr_search)) if args.lr_search else LineSearchConfig()
        best_rate, entries = line_search_lr(
            lambda: PixelSegmenter(seed=args.seed), cfg, train_set, val_set,
            early_cfg=early)
        print(f"{'rate':>10}  {'mean_iou':>8}  {'best_epoch':>10}  {'val_loss':>10}")
        for e in entries:
            print(f"{e.rate:>10g}  {e.report.mean_iou:8.4f}  "
                  f"{e.checkpoint.epoch:>10d}  {e.checkpoint.val_losses.total:10.6f}")
        chosen = next(e for e in entries if e.rate == best_rate)
        ckpt, history, rate = chosen.checkpoint, chosen.history, best_rate
        with open(os.path.join(args.out, "lr_search.csv"), "w", encoding="utf-8") as fh:
            fh.write("rate,mean_iou,best_epoch,val_loss\n")
            for e in entries:
                fh.write(f"{e.rate!r},{e.report.mean_iou!r},"
                         f"{e.checkpoint.epoch},{e.checkpoint.val_losses.total!r}\n")
        print(f"selected learning rate {best_rate:g}")
    else:
        model = PixelSegmenter(seed=args.seed)
        rate = args.lr
        ckpt, history = fit(model, train_set, val_set, early, learning_rate=rate)

    ckpt_path = os.path.join(args.out, "checkpoint.npz")
    save_checkpoint(ckpt, ckpt_path)
    log_path = os.path.join(args.out, "training_log.csv")
    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write(training_log_csv(history, early, rate))
    save_training_curves(history, os.path.join(args.out, "training_curves.png"))
    print(f"best epoch {ckpt.epoch} (val loss {ckpt.val_losses.total:.6f}); "
          f"ran {len(history)} epochs; checkpoint -> {ckpt_path}")
    return 0


def _write_report_files(report: MetricReport, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(report_text(report))
    with open(os.path.join(out_dir, "report.csv"), "w", encoding="utf-8") as fh:
        fh.write(report_csv(report))
    doc = {
        "dataset": report.dataset_name,
        "model": report.model_name,
        "rows": [[r[0], r[1], r[2], r[3]] for r in report.rows],
        "means": {"iou": report.mean_iou, "precision": report.mean_precision,
                  "recall": report.mean_recall},
    }
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    save_metrics_figure(report, os.path.join(out_dir, "report.png"))


def _cmd_eval(args, parser) -> int:
    manifest = _load_data(args.data)
    subset = manifest if args.split == "all" else manifest.filter_split(args.split)
    if not subset.records:
        raise HandforgeError(f"no records in split {args.split!r}")
    if args.model == "gt":
        predictions = {rec.image_id: rec.mask() for rec in subset.records}
        model_name = args.name or "ground-truth"
    else:
        ckpt = load_checkpoint(args.model)
        model = PixelSegmenter(seed=ckpt.seed)
        model.initialize(ckpt)
        predictions = {rec.image_id: model.predict(rec.load_image())
                       for rec in subset.records}
        model_name = args.name or f"{ckpt.model_kind}@epoch{ckpt.epoch}"
    report = evaluate_dataset(predictions, subset, model_name=model_name)
    _write_report_files(report, args.out)
    print(f"{report.dataset_name}: mean IoU {report.mean_iou:.4f}  "
          f"precision {report.mean_precision:.4f}  recall {report.mean_recall:.4f} "
          f"({len(report.rows)} images) -> {args.out}")
    return 0


def _cmd_ablate(args, parser) -> int:
    reports = []
    for path in args.reports:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        report = MetricReport(dataset_name=doc["dataset"], model_name=doc["model"],
                              rows=[tuple(r) for r in doc["rows"]])
        reports.append(report)
    rows = ablation_rows(reports)
    os.makedirs(args.out, exist_ok=True)
    text = ablation_text(rows)
    with open(os.path.join(args.out, "ablation.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    with open(os.path.join(args.out, "ablation.csv"), "w", encoding="utf-8") as fh:
        fh.write(ablation_csv(rows))
    save_ablation_figure(rows, os.path.join(args.out, "ablation.png"))
    print(text, end="")
    return 0


def _cmd_annotate(args, parser) -> int:
    from .service import serve

    serve(args.images, port=args.port, host=args.host,
          manifest_path=args.manifest_out, ui_dir=args.ui)
    return 0


def _cmd_preview(args, parser) -> int:
    preset = DatasetPreset.parse(args.preset)
    config = _resolve_config(args)
    scene = sample_scene(config, preset, args.seed, args.index)
    out = render(scene)
    mask = mask_from_instance(out.labels)
    os.makedirs(args.out, exist_ok=True)
    stem = os.path.join(args.out, f"preview_{preset.letter}_{args.seed}_{args.index}")
    save_image(f"{stem}_rgb.png", out.color)
    save_image(f"{stem}_mask.png",
               np.repeat((mask * 255).astype(np.uint8)[:, :, None], 3, axis=2))
    overlay = out.color.copy()
    overlay[mask] = (0.45 * overlay[mask] + 0.55 * np.array([220, 40, 40])).astype(np.uint8)
    save_image(f"{stem}_overlay.png", overlay)
    print(f"wrote {stem}_rgb.png, {stem}_mask.png, {stem}_overlay.png")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "annotate": _cmd_annotate,
    "preview": _cmd_preview,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args, parser)
    except HandforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
