"""Matplotlib figures emitted next to the delimited report files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_metrics_figure(report, path) -> None:
    """Per-image IoU distribution with the dataset means in the title."""
    ious = [r[1] for r in report.rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(ious, bins=20, range=(0.0, 1.0), color="#4878cf", edgecolor="white")
    ax.axvline(report.mean_iou, color="#d1495b", linestyle="--",
               label=f"mean IoU = {report.mean_iou:.3f}")
    ax.set_xlabel("per-image IoU")
    ax.set_ylabel("images")
    ax.set_title(f"{report.dataset_name} | {report.model_name} | "
                 f"P={report.mean_precision:.3f} R={report.mean_recall:.3f}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_ablation_figure(rows, path) -> None:
    """Grouped bars of mean IoU per (training preset x evaluation set)."""
    trained = list(dict.fromkeys(r["trained_on"] for r in rows))
    evaluated = list(dict.fromkeys(r["evaluated_on"] for r in rows))
    fig, ax = plt.subplots(figsize=(max(7, 1.6 * len(trained)), 4.5))
    width = 0.8 / max(1, len(evaluated))
    for k, ev in enumerate(evaluated):
        xs, ys = [], []
        for i, tr in enumerate(trained):
            match = [r for r in rows if r["trained_on"] == tr and r["evaluated_on"] == ev]
            if match:
                xs.append(i + k * width)
                ys.append(match[0]["iou"])
        ax.bar(xs, ys, width=width, label=ev)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(trained))])
    ax.set_xticklabels(trained, rotation=20, ha="right")
    ax.set_ylabel("mean IoU")
    ax.set_ylim(0, 1)
    ax.set_title("training preset vs evaluation set")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_training_curves(history, path) -> None:
    epochs = [rec.epoch for rec in history]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(epochs, [rec.train.total for rec in history], label="train total")
    ax.plot(epochs, [rec.val.total for rec in history], label="val total")
    best = min(history, key=lambda rec: rec.val.total)
    ax.axvline(best.epoch, color="grey", linestyle=":",
               label=f"best epoch {best.epoch}")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
