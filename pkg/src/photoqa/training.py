"""Shared mini-batch training loop with best-validation checkpointing.

Gradient accumulation is sequential in sample order, so runs are bit
reproducible for a given seed. A non-finite loss aborts with epoch and
iteration context.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .nncore import ParamStore, adagrad_step, clip_global_norm, sgd_step, tape

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainSettings:
    epochs: int = 45
    batch_size: int = 32
    optimizer: str = "adagrad"  # or "sgd"
    lr: float = 0.1
    clip_norm: float = 5.0
    seed: int = 0
    # Optional starting value of the Adagrad accumulator (TensorFlow-style);
    # 0 gives the textbook rule.
    adagrad_init_accum: float = 0.0


@dataclass
class EpochStats:
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = -1
    best_val_accuracy: float = -1.0


def run_training(
    store: ParamStore,
    train_samples: list,
    loss_fn,
    settings: TrainSettings,
    val_samples: list | None = None,
    val_fn=None,
) -> TrainHistory:
    """Train by minimizing mean loss_fn(sample) per batch.

    val_fn(sample) must return (loss_value, correct_bool); when provided, the
    parameter state with the best validation accuracy (earliest epoch wins
    ties) is restored at the end.
    """
    if not train_samples:
        raise TrainingError("empty training split")
    if settings.optimizer not in ("sgd", "adagrad"):
        raise TrainingError(f"unknown optimizer '{settings.optimizer}'")

    if settings.optimizer == "adagrad" and settings.adagrad_init_accum > 0.0:
        for p in store:
            p.accum[...] = settings.adagrad_init_accum

    order_rng = np.random.default_rng(settings.seed)
    history = TrainHistory()
    best_state = None

    for epoch in range(settings.epochs):
        order = order_rng.permutation(len(train_samples))
        epoch_loss = 0.0
        for it, start in enumerate(range(0, len(order), settings.batch_size)):
            batch = order[start : start + settings.batch_size]
            batch_loss = 0.0
            for sample_idx in batch:
                loss = loss_fn(train_samples[int(sample_idx)])
                value = float(loss.value)
                if not math.isfinite(value):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch} iteration {it}"
                    )
                batch_loss += value
                tape.backward(loss, seed=1.0 / len(batch))
            epoch_loss += batch_loss
            clip_global_norm(store, settings.clip_norm)
            if settings.optimizer == "adagrad":
                adagrad_step(store, settings.lr)
            else:
                sgd_step(store, settings.lr)

        train_loss = epoch_loss / len(train_samples)
        val_loss = float("nan")
        val_acc = float("nan")
        if val_samples and val_fn is not None:
            total_loss = 0.0
            hits = 0
            for sample in val_samples:
                loss_value, correct = val_fn(sample)
                total_loss += loss_value
                hits += int(correct)
            val_loss = total_loss / len(val_samples)
            val_acc = hits / len(val_samples)
            if val_acc > history.best_val_accuracy:
                history.best_val_accuracy = val_acc
                history.best_epoch = epoch
                best_state = store.state()

        history.epochs.append(EpochStats(train_loss, val_loss, val_acc))
        log.info(
            "epoch %d: train_loss=%.4f val_loss=%.4f val_acc=%.3f",
            epoch, train_loss, val_loss, val_acc,
        )

    if best_state is not None:
        store.load_state(best_state)
    return history
