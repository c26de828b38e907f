"""Training orchestration: early stopping on total validation loss, best
checkpoint selection, learning-rate line search, parameter freezing, and a
desk-scale per-pixel logistic segmenter that exercises the whole loop.

Any segmentation model can plug in by implementing TrainableModel; losses
flow through the five-term breakdown whose unweighted sum is monitored.
"""

from __future__ import annotations

import abc
import csv
import io
from dataclasses import dataclass

import numpy as np

from .detection import LossBreakdown
from .errors import ConfigError, TrainingAborted
from .evaluate import MetricReport, evaluate_dataset

DEFAULT_LEARNING_RATE = 2.5e-4
LR_RANGE = (1e-5, 1e-3)


class TrainableModel(abc.ABC):
    """Contract every trainable segmentation model satisfies.

    Frozen parameters must be bit-identical across train_epoch calls and
    validation_loss must not touch parameters at all.
    """

    @abc.abstractmethod
    def initialize(self, weights=None):
        """Reset to fresh weights, or adopt a Checkpoint / parameter vector."""

    @abc.abstractmethod
    def train_epoch(self, train_set, learning_rate: float) -> LossBreakdown:
        ...

    @abc.abstractmethod
    def validation_loss(self, val_set) -> LossBreakdown:
        ...

    @abc.abstractmethod
    def predict(self, image) -> np.ndarray:
        """Binary hand mask for an (h, w, 3) uint8 image."""

    @abc.abstractmethod
    def parameters(self) -> np.ndarray:
        ...

    @abc.abstractmethod
    def freeze(self, spec):
        """Exclude parameters from updates; composes as set union."""


@dataclass(frozen=True)
class EarlyStopConfig:
    patience: int = 15
    max_epochs: int = 150

    def __post_init__(self):
        if not (1 <= self.patience <= self.max_epochs):
            raise ConfigError("need 1 <= patience <= max_epochs")


@dataclass
class Checkpoint:
    epoch: int
    parameters: np.ndarray
    val_losses: LossBreakdown
    model_kind: str = "pixel-segmenter"
    seed: int = 0


@dataclass
class EpochRecord:
    epoch: int
    train: LossBreakdown
    val: LossBreakdown


def fit(model: TrainableModel, train_set, val_set, cfg: EarlyStopConfig,
        learning_rate: float = DEFAULT_LEARNING_RATE):
    """Early-stopped training loop returning (best checkpoint, history).

    A tie in validation loss is not an improvement; training stops once
    cfg.patience epochs pass without a new best, or at cfg.max_epochs.
    """
    history: list[EpochRecord] = []
    best: Checkpoint | None = None
    for epoch in range(1, cfg.max_epochs + 1):
        try:
            train_lb = model.train_epoch(train_set, learning_rate)
            val_lb = model.validation_loss(val_set)
        except Exception as exc:  # noqa: BLE001 - contract: abort with history
            raise TrainingAborted(epoch, history, exc)
        history.append(EpochRecord(epoch, train_lb, val_lb))
        if best is None or val_lb.total < best.val_losses.total:
            best = Checkpoint(epoch=epoch, parameters=model.parameters().copy(),
                              val_losses=val_lb,
                              model_kind=getattr(model, "kind", "model"),
                              seed=getattr(model, "seed", 0))
        elif epoch - best.epoch >= cfg.patience:
            break
    return best, history


@dataclass(frozen=True)
class LineSearchConfig:
    rates: tuple = (1e-5, 1e-4, 2.5e-4, 1e-3)

    def __post_init__(self):
        if not self.rates:
            raise ConfigError("line search needs at least one rate")
        for r in self.rates:
            if not (LR_RANGE[0] <= r <= LR_RANGE[1]):
                raise ConfigError(
                    f"rate {r} outside the searched range {LR_RANGE}")


@dataclass
class LineSearchEntry:
    rate: float
    checkpoint: Checkpoint
    history: list
    report: MetricReport


def line_search_lr(model_factory, cfg: LineSearchConfig, train_set, val_set,
                   selection_set=None, early_cfg: EarlyStopConfig | None = None):
    """Fit one model per rate and pick the argmax mean-IoU rate on the
    designated (real-world when available) validation set; ties break toward
    the smaller rate."""
    early_cfg = early_cfg or EarlyStopConfig()
    selection = selection_set if selection_set is not None else val_set
    entries = []
    for rate in sorted(cfg.rates):
        model = model_factory()
        ckpt, history = fit(model, train_set, val_set, early_cfg, learning_rate=rate)
        model.initialize(ckpt)
        predictions = {rec.image_id: model.predict(rec.load_image())
                       for rec in selection.records}
        report = evaluate_dataset(predictions, selection, model_name=f"lr={rate:g}")
        entries.append(LineSearchEntry(rate, ckpt, history, report))
    best = max(entries, key=lambda e: e.report.mean_iou)  # max keeps the first
    return best.rate, entries


# ---------------------------------------------------------------------------
# Checkpoint + log files
# ---------------------------------------------------------------------------

def save_checkpoint(ckpt: Checkpoint, path) -> None:
    np.savez(path, version=1, epoch=ckpt.epoch, parameters=ckpt.parameters,
             val_losses=np.array(ckpt.val_losses.as_tuple()),
             model_kind=ckpt.model_kind, seed=ckpt.seed)


def load_checkpoint(path) -> Checkpoint:
    with np.load(path, allow_pickle=False) as data:
        losses = data["val_losses"]
        return Checkpoint(
            epoch=int(data["epoch"]),
            parameters=np.array(data["parameters"]),
            val_losses=LossBreakdown(*(float(v) for v in losses)),
            model_kind=str(data["model_kind"]),
            seed=int(data["seed"]),
        )


LOG_COLUMNS = ["epoch", "rpn_class_loss", "rpn_bbox_loss", "mrcnn_class_loss",
               "mrcnn_bbox_loss", "mrcnn_mask_loss", "total", "val_total"]


def training_log_csv(history, cfg: EarlyStopConfig,
                     learning_rate: float) -> str:
    buf = io.StringIO()
    buf.write(f"# patience: {cfg.patience}\n")
    buf.write(f"# max_epochs: {cfg.max_epochs}\n")
    buf.write(f"# learning_rate: {learning_rate:g}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LOG_COLUMNS)
    for rec in history:
        writer.writerow([rec.epoch, *(repr(float(v)) for v in rec.train.as_tuple()),
                         repr(float(rec.train.total)), repr(float(rec.val.total))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Reference model: per-pixel logistic segmenter
# ---------------------------------------------------------------------------

N_FEATURES = 6  # r, g, b, x/width, y/height, 3x3 intensity std
N_PARAMS = N_FEATURES + 1
_WEIGHT_INDICES = tuple(range(N_FEATURES))
_BIAS_INDEX = N_FEATURES

# sampled design matrices shared across same-seed models (line search reuse)
_PIXEL_CACHE: dict = {}


def pixel_features(image_u8: np.ndarray) -> np.ndarray:
    """Per-pixel feature matrix, shape (h*w, 6), all features in [0, 1]."""
    img = np.asarray(image_u8, dtype=np.float64) / 255.0
    h, w = img.shape[:2]
    intensity = img.mean(axis=2)
    padded = np.pad(intensity, 1, mode="edge")
    s1 = np.zeros((h, w))
    s2 = np.zeros((h, w))
    for dy in range(3):
        for dx in range(3):
            win = padded[dy:dy + h, dx:dx + w]
            s1 += win
            s2 += win * win
    var = s2 / 9.0 - (s1 / 9.0) ** 2
    std = np.sqrt(np.clip(var, 0.0, None))
    xs = (np.arange(w) + 0.5) / w
    ys = (np.arange(h) + 0.5) / h
    feats = np.empty((h * w, N_FEATURES), dtype=np.float64)
    feats[:, 0] = img[:, :, 0].reshape(-1)
    feats[:, 1] = img[:, :, 1].reshape(-1)
    feats[:, 2] = img[:, :, 2].reshape(-1)
    feats[:, 3] = np.broadcast_to(xs[None, :], (h, w)).reshape(-1)
    feats[:, 4] = np.broadcast_to(ys[:, None], (h, w)).reshape(-1)
    feats[:, 5] = std.reshape(-1)
    return feats


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def logistic_loss_and_grad(params: np.ndarray, feats: np.ndarray, targets: np.ndarray):
    """Mean binary cross-entropy and its analytic gradient."""
    w = params[:N_FEATURES]
    b = params[_BIAS_INDEX]
    z = feats @ w + b
    # softplus(z) - y*z == -y ln p - (1-y) ln (1-p), numerically stable
    loss = float(np.mean(np.logaddexp(0.0, z) - targets * z))
    residual = _sigmoid(z) - targets
    grad = np.empty(N_PARAMS)
    grad[:N_FEATURES] = feats.T @ residual / len(targets)
    grad[_BIAS_INDEX] = float(residual.mean())
    return loss, grad


class PixelSegmenter(TrainableModel):
    """Logistic regression over 6 per-pixel features, trained by mini-batch
    SGD on pixel-wise cross-entropy. Stands in for the full network so the
    orchestration and evaluation paths run end to end on a desk."""

    kind = "pixel-segmenter"

    def __init__(self, seed: int = 0, pixels_per_class: int = 1200,
                 batch_size: int = 4096):
        self.seed = int(seed)
        self.pixels_per_class = pixels_per_class
        self.batch_size = batch_size
        self._frozen: set = set()
        self.initialize()

    # -- contract ----------------------------------------------------------

    def initialize(self, weights=None):
        if weights is None:
            self.params = np.zeros(N_PARAMS, dtype=np.float64)
        elif isinstance(weights, Checkpoint):
            self.params = np.array(weights.parameters, dtype=np.float64)
        else:
            self.params = np.array(weights, dtype=np.float64)
        if self.params.shape != (N_PARAMS,):
            raise ConfigError(f"expected {N_PARAMS} parameters")
        self.rng = np.random.default_rng(self.seed)

    def parameters(self) -> np.ndarray:
        return self.params.copy()

    def freeze(self, spec):
        self._frozen |= self._resolve_freeze(spec)

    def _resolve_freeze(self, spec) -> set:
        if isinstance(spec, str):
            spec = [spec]
        out: set = set()
        for item in spec:
            if item == "weights":
                out.update(_WEIGHT_INDICES)
            elif item == "bias":
                out.add(_BIAS_INDEX)
            elif item == "all":
                out.update(range(N_PARAMS))
            elif isinstance(item, int):
                if not (0 <= item < N_PARAMS):
                    raise ConfigError(f"no parameter index {item}")
                out.add(item)
            else:
                raise ConfigError(f"unknown freeze spec entry {item!r}")
        return out

    def train_epoch(self, train_set, learning_rate: float) -> LossBreakdown:
        feats, targets = self._pixels(train_set)
        free = np.array([i for i in range(N_PARAMS) if i not in self._frozen], dtype=int)
        order = self.rng.permutation(len(targets))
        loss_sum = 0.0
        for start in range(0, len(order), self.batch_size):
            idx = order[start:start + self.batch_size]
            loss, grad = logistic_loss_and_grad(self.params, feats[idx], targets[idx])
            loss_sum += loss * len(idx)
            if free.size and learning_rate != 0.0:
                self.params[free] -= learning_rate * grad[free]
        return LossBreakdown(mrcnn_mask_loss=loss_sum / len(targets))

    def validation_loss(self, val_set) -> LossBreakdown:
        feats, targets = self._pixels(val_set)
        loss, _ = logistic_loss_and_grad(self.params, feats, targets)
        return LossBreakdown(mrcnn_mask_loss=loss)

    def predict(self, image) -> np.ndarray:
        h, w = np.asarray(image).shape[:2]
        feats = pixel_features(image)
        probs = _sigmoid(feats @ self.params[:N_FEATURES] + self.params[_BIAS_INDEX])
        return (probs >= 0.5).reshape(h, w)

    # -- pixel sampling ----------------------------------------------------

    def _pixels(self, dataset):
        """Sampled (features, targets) for a manifest; per-record substreams
        keyed by (model seed, image id) make the cache order-independent."""
        key = (id(dataset), self.seed, self.pixels_per_class)
        cached = _PIXEL_CACHE.get(key)
        if cached is not None:
            return cached[1], cached[2]
        all_feats = []
        all_targets = []
        for record in dataset.records:
            feats = pixel_features(record.load_image())
            gt = record.mask().reshape(-1)
            rng = np.random.default_rng([self.seed, record.image_id])
            pos = np.flatnonzero(gt)
            neg = np.flatnonzero(~gt)
            take_pos = min(len(pos), self.pixels_per_class)
            take_neg = min(len(neg), self.pixels_per_class)
            chosen = []
            if take_pos:
                chosen.append(rng.choice(pos, size=take_pos, replace=False))
            if take_neg:
                chosen.append(rng.choice(neg, size=take_neg, replace=False))
            idx = np.concatenate(chosen)
            all_feats.append(feats[idx])
            all_targets.append(gt[idx].astype(np.float64))
        feats = np.vstack(all_feats)
        targets = np.concatenate(all_targets)
        # the dataset object is pinned so id() keys can never be recycled
        _PIXEL_CACHE[key] = (dataset, feats, targets)
        return feats, targets
