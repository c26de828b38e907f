"""Pixel-level segmentation metrics and dataset-level reporting.

IoU, precision and recall are computed per image from the TP/FP/FN pixel
decomposition and averaged (unweighted) across the dataset. mAP is
deliberately not provided; single-instance masks make it uninformative here.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import HandforgeError, MissingPredictionError
from .masks import as_mask


@dataclass(frozen=True)
class PixelConfusion:
    tp: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise HandforgeError("confusion counts must be non-negative")


def confusion(pred, gt) -> PixelConfusion:
    """TP/FP/FN pixel counts for a predicted mask against its ground truth."""
    p = as_mask(pred)
    g = as_mask(gt)
    if p.shape != g.shape:
        raise HandforgeError(f"mask dimensions differ: {p.shape} vs {g.shape}")
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    return PixelConfusion(tp, fp, fn)


def metrics(c: PixelConfusion) -> tuple:
    """(IoU, precision, recall) with documented degenerate conventions:
    empty/empty scores 1.0 everywhere; an empty side otherwise scores 0."""
    if c.tp == 0 and c.fp == 0 and c.fn == 0:
        return (1.0, 1.0, 1.0)
    iou = c.tp / (c.tp + c.fp + c.fn)
    precision = c.tp / (c.tp + c.fp) if (c.tp + c.fp) > 0 else 0.0
    recall = c.tp / (c.tp + c.fn) if (c.tp + c.fn) > 0 else 0.0
    return (iou, precision, recall)


def merge_instances(masks) -> np.ndarray:
    """Union multiple predicted instance masks into a single hand mask."""
    masks = list(masks)
    out = as_mask(masks[0]).copy()
    for m in masks[1:]:
        out |= as_mask(m)
    return out


@dataclass
class MetricReport:
    dataset_name: str
    model_name: str
    rows: list = field(default_factory=list)  # (image_id, iou, precision, recall)

    @property
    def mean_iou(self) -> float:
        return float(np.mean([r[1] for r in self.rows])) if self.rows else 0.0

    @property
    def mean_precision(self) -> float:
        return float(np.mean([r[2] for r in self.rows])) if self.rows else 0.0

    @property
    def mean_recall(self) -> float:
        return float(np.mean([r[3] for r in self.rows])) if self.rows else 0.0


def evaluate_dataset(predictions: dict, manifest, model_name: str = "model") -> MetricReport:
    """Score per-image predictions against a dataset manifest.

    predictions maps image id -> mask (or list of instance masks, merged by
    union). Every manifest record needs an entry; an empty mask is a valid
    "no detection" prediction.
    """
    report = MetricReport(dataset_name=manifest.name, model_name=model_name)
    for record in manifest.records:
        if record.image_id not in predictions:
            raise MissingPredictionError(record.image_id)
        pred = predictions[record.image_id]
        if isinstance(pred, (list, tuple)):
            pred = merge_instances(pred)
        iou, precision, recall = metrics(confusion(pred, record.mask()))
        report.rows.append((record.image_id, iou, precision, recall))
    return report


# ---------------------------------------------------------------------------
# Report output: text + CSV (figures live in plots.py)
# ---------------------------------------------------------------------------

CSV_COLUMNS = ["dataset", "image_id", "iou", "precision", "recall", "summary"]


def report_csv(report: MetricReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for image_id, iou, p, r in report.rows:
        writer.writerow([report.dataset_name, image_id,
                         repr(float(iou)), repr(float(p)), repr(float(r)), 0])
    writer.writerow([report.dataset_name, "MEAN", repr(report.mean_iou),
                     repr(report.mean_precision), repr(report.mean_recall), 1])
    return buf.getvalue()


def parse_report_csv(text: str) -> list[dict]:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        rows.append({
            "dataset": row["dataset"],
            "image_id": row["image_id"],
            "iou": float(row["iou"]),
            "precision": float(row["precision"]),
            "recall": float(row["recall"]),
            "summary": bool(int(row["summary"])),
        })
    return rows


def report_text(report: MetricReport) -> str:
    lines = [
        f"dataset: {report.dataset_name}",
        f"model:   {report.model_name}",
        f"images:  {len(report.rows)}",
        "",
        f"{'image_id':>12}  {'iou':>8}  {'precision':>9}  {'recall':>8}",
    ]
    for image_id, iou, p, r in report.rows:
        lines.append(f"{str(image_id):>12}  {iou:8.4f}  {p:9.4f}  {r:8.4f}")
    lines.append("-" * 44)
    lines.append(f"{'MEAN':>12}  {report.mean_iou:8.4f}  "
                 f"{report.mean_precision:9.4f}  {report.mean_recall:8.4f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Multi-dataset ablation grid
# ---------------------------------------------------------------------------

_PRESET_ORDER = "ABCDEF"


def _preset_rank(model_name: str) -> int:
    head = model_name.strip()[:1].upper()
    return _PRESET_ORDER.index(head) if head in _PRESET_ORDER else len(_PRESET_ORDER)


def ablation_rows(reports) -> list[dict]:
    """Grid rows (training preset x evaluation set), ordered A -> F."""
    if not reports:
        raise HandforgeError("ablation needs at least one report")
    rows = [
        {
            "trained_on": r.model_name,
            "evaluated_on": r.dataset_name,
            "iou": r.mean_iou,
            "precision": r.mean_precision,
            "recall": r.mean_recall,
        }
        for r in reports
    ]
    rows.sort(key=lambda row: (_preset_rank(row["trained_on"]),
                               row["trained_on"], row["evaluated_on"]))
    return rows


def ablation_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trained_on", "evaluated_on", "iou", "precision", "recall"])
    for row in rows:
        writer.writerow([row["trained_on"], row["evaluated_on"],
                         repr(float(row["iou"])), repr(float(row["precision"])),
                         repr(float(row["recall"]))])
    return buf.getvalue()


def ablation_text(rows: list[dict]) -> str:
    w1 = max(10, max(len(r["trained_on"]) for r in rows))
    w2 = max(12, max(len(r["evaluated_on"]) for r in rows))
    lines = [f"{'trained_on':<{w1}}  {'evaluated_on':<{w2}}  "
             f"{'iou':>8}  {'precision':>9}  {'recall':>8}"]
    for r in rows:
        lines.append(f"{r['trained_on']:<{w1}}  {r['evaluated_on']:<{w2}}  "
                     f"{r['iou']:8.4f}  {r['precision']:9.4f}  {r['recall']:8.4f}")
    return "\n".join(lines) + "\n"
