"""Single training runs with early stopping on the validation set."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from numpy.typing import NDArray

from dpgcnn.autodiff import ops
from dpgcnn.autodiff.optim import Adam
from dpgcnn.autodiff.rng import Rng
from dpgcnn.autodiff.tensor import Array, Tape, Tensor, backward
from dpgcnn.datasets.base import VertexDataset
from dpgcnn.datasets.link import LinkTask
from dpgcnn.datasets.splits import Split
from dpgcnn.errors import DivergedLoss
from dpgcnn.layers.common import Dropout
from dpgcnn.layers.models import GraphContext, Model, count_params
from dpgcnn.layers.spec import ModelSpec
from dpgcnn.training.metrics import RunMetrics
from dpgcnn.utils.config import TrainConfig
from dpgcnn.utils.logging import get_logger

log = get_logger(__name__)

IntArray = NDArray[np.int64]


@dataclass
class Masks:
    """Labels and the logit rows each part of the task is scored on."""

    labels: IntArray
    train: IntArray
    val: IntArray
    test: IntArray


@dataclass
class TrainedRun:
    """Metrics of a finished run plus the restored best model and its inputs."""

    metrics: RunMetrics
    model: Model
    context: GraphContext
    masks: Masks


def _loss_and_accuracy(logits: Array, labels: IntArray, rows: IntArray) -> Tuple[float, float]:
    loss = ops.masked_softmax_cross_entropy(Tensor(logits), labels, rows).value[0, 0]
    predicted = np.argmax(logits[rows], axis=1)
    return float(loss), float(np.mean(predicted == labels[rows]))


def evaluate(
    model: Model, ctx: GraphContext, labels: IntArray, rows: IntArray
) -> Tuple[float, float]:
    """Eval-mode (loss, accuracy) over ``rows``.

    Raises:
        EmptyMask: If ``rows`` is empty.
    """
    logits = model.forward(ctx, Tape()).value
    return _loss_and_accuracy(logits, labels, rows)


def predict(model: Model, ctx: GraphContext) -> IntArray:
    """Arg-max class per logit row (ties go to the lowest class index)."""
    return np.argmax(model.forward(ctx, Tape()).value, axis=1).astype(np.int64)


@dataclass
class EarlyStopping:
    """Patience counter plus the best epoch seen so far.

    The counter resets whenever validation loss reaches a new minimum or
    validation accuracy a new maximum. The best epoch is the one with the
    lowest validation loss, ties going to higher accuracy, then the
    earlier epoch.
    """

    patience: int
    min_loss: float = math.inf
    max_acc: float = -math.inf
    bad_epochs: int = 0
    best_epoch: int = 0
    best_key: Tuple[float, float] = (math.inf, math.inf)

    def update(self, epoch: int, val_loss: float, val_acc: float) -> Tuple[bool, bool]:
        """Return (improved_best, should_stop)."""
        key = (val_loss, -val_acc)
        improved = key < self.best_key
        if improved:
            self.best_key = key
            self.best_epoch = epoch

        if val_loss <= self.min_loss or val_acc >= self.max_acc:
            self.min_loss = min(self.min_loss, val_loss)
            self.max_acc = max(self.max_acc, val_acc)
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
        return improved, self.bad_epochs >= self.patience


def fit(
    model: Model,
    ctx: GraphContext,
    masks: Masks,
    cfg: TrainConfig,
    seed: int,
    timestamps: bool = True,
) -> RunMetrics:
    """Full-batch Adam on the training rows; restores the best validation epoch.

    Each epoch draws dropout from its own child stream of ``seed``, so a
    run is a pure function of (model init, data, cfg, seed).

    Raises:
        DivergedLoss: If the training or validation loss becomes non-finite.
    """
    started = time.perf_counter()
    params = model.parameters()
    optimizer = Adam(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    dropout_rng = Rng(seed).spawn("dropout")
    stopper = EarlyStopping(cfg.patience)
    metrics = RunMetrics(seed=seed, params=count_params(model))
    best_state: Dict[str, Array] = model.state_dict()
    keep = cfg.dropout_keep if model.spec.dropout_keep is None else model.spec.dropout_keep

    for epoch in range(1, cfg.max_epochs + 1):
        tape = Tape(debug=cfg.debug)
        plan = Dropout(keep, dropout_rng.spawn(str(epoch)))
        logits = model.forward(ctx, tape, plan)
        loss = ops.masked_softmax_cross_entropy(logits, masks.labels, masks.train)
        train_loss = float(loss.value[0, 0])
        if not math.isfinite(train_loss):
            raise DivergedLoss(seed, epoch, train_loss)
        predicted = np.argmax(logits.value[masks.train], axis=1)
        train_acc = float(np.mean(predicted == masks.labels[masks.train]))

        backward(tape, loss)
        optimizer.step()

        val_loss, val_acc = evaluate(model, ctx, masks.labels, masks.val)
        if not math.isfinite(val_loss):
            raise DivergedLoss(seed, epoch, val_loss)

        metrics.epochs = epoch
        metrics.train_loss_curve.append(train_loss)
        metrics.train_acc_curve.append(train_acc)
        metrics.val_loss_curve.append(val_loss)
        metrics.val_acc_curve.append(val_acc)
        log.debug(
            "epoch",
            seed=seed,
            epoch=epoch,
            train_loss=round(train_loss, 5),
            train_acc=round(train_acc, 4),
            val_loss=round(val_loss, 5),
            val_acc=round(val_acc, 4),
        )

        improved, stop = stopper.update(epoch, val_loss, val_acc)
        if improved:
            best_state = model.state_dict()
        if stop:
            metrics.stopped_early = True
            log.info("early_stop", seed=seed, epoch=epoch, best_epoch=stopper.best_epoch)
            break

    model.load_state_dict(best_state)
    logits = model.forward(ctx, Tape()).value
    metrics.best_epoch = stopper.best_epoch
    _, metrics.train_acc = _loss_and_accuracy(logits, masks.labels, masks.train)
    metrics.val_loss, metrics.val_acc = _loss_and_accuracy(logits, masks.labels, masks.val)
    _, metrics.test_acc = _loss_and_accuracy(logits, masks.labels, masks.test)
    metrics.wall_ms = (time.perf_counter() - started) * 1000.0 if timestamps else 0.0

    log.info(
        "run_finished",
        seed=seed,
        epochs=metrics.epochs,
        best_epoch=metrics.best_epoch,
        val_acc=round(metrics.val_acc, 4),
        test_acc=round(metrics.test_acc, 4),
    )
    return metrics


def fit_vertex(
    spec: ModelSpec,
    dataset: VertexDataset,
    split: Split,
    cfg: TrainConfig,
    seed: int,
    timestamps: bool = True,
) -> TrainedRun:
    """Train a vertex classifier on one split.

    Raises:
        DimensionMismatch: If the spec does not fit the dataset.
        EmptyMask: If a split part is empty.
    """
    spec.check_dataset(dataset.in_features, dataset.num_classes)
    ctx = GraphContext.prepare(
        dataset.features, dataset.graph, spec, sparsify_k=cfg.sparsify_k, seed=seed
    )
    model = Model.init(spec, Rng(seed), dataset.in_features)
    masks = Masks(dataset.labels, split.train, split.val, split.test)
    metrics = fit(model, ctx, masks, cfg, seed, timestamps)
    return TrainedRun(metrics, model, ctx, masks)


def fit_link(
    spec: ModelSpec,
    features: Array,
    task: LinkTask,
    cfg: TrainConfig,
    seed: int,
    timestamps: bool = True,
) -> TrainedRun:
    """Train a link direction classifier; one logit row per labeled pair."""
    spec.check_dataset(int(features.shape[1]), None)
    ctx = GraphContext.prepare(
        features,
        task.graph,
        spec,
        target_pairs=task.pairs,
        sparsify_k=cfg.sparsify_k,
        seed=seed,
    )
    model = Model.init(spec, Rng(seed), int(features.shape[1]))
    masks = Masks(task.labels, task.train, task.val, task.test)
    metrics = fit(model, ctx, masks, cfg, seed, timestamps)
    return TrainedRun(metrics, model, ctx, masks)


def train_vertex(
    spec: ModelSpec,
    dataset: VertexDataset,
    split: Split,
    cfg: TrainConfig,
    seed: int,
    timestamps: bool = True,
) -> RunMetrics:
    return fit_vertex(spec, dataset, split, cfg, seed, timestamps).metrics


def train_link(
    spec: ModelSpec,
    features: Array,
    task: LinkTask,
    cfg: TrainConfig,
    seed: int,
    timestamps: bool = True,
) -> RunMetrics:
    return fit_link(spec, features, task, cfg, seed, timestamps).metrics

