"""
Mridangam Stroke Transcriber - Training Loop

Mini-batch Adam training with per-epoch shuffling, validation-accuracy
early stopping and restoration of the best epoch's weights.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.dataset_io import LabeledDataset
from src.nn.layers import LayerSpec, NetworkError
from src.nn.network import Network, backward, cross_entropy, evaluate_network, forward, init_network
from src.nn.optimizer import AdamState, adam_step

logger = logging.getLogger(__name__)


class TrainingError(Exception):
    """Raised when training cannot start or diverges."""

    pass


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters (25 epochs, Adam at lr 0.0002)."""

    epochs: int = 25
    learning_rate: float = 0.0002
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 5
    class_weights: Optional[Tuple[float, ...]] = None
    seed: int = 0

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise TrainingError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size <= 0:
            raise TrainingError(f"batch_size must be positive, got {self.batch_size}")
        if self.patience < 1:
            raise TrainingError(f"patience must be at least 1, got {self.patience}")
        if self.epochs < 1:
            raise TrainingError(f"epochs must be at least 1, got {self.epochs}")


@dataclass
class TrainHistory:
    """Per-epoch metrics; best_epoch is the 0-based epoch with the highest val accuracy."""

    train_loss: List[float] = field(default_factory=list)
    train_acc: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    val_acc: List[float] = field(default_factory=list)
    best_epoch: int = -1

    @property
    def epochs_completed(self) -> int:
        return len(self.train_loss)

    @property
    def best_val_acc(self) -> float:
        return self.val_acc[self.best_epoch] if self.best_epoch >= 0 else float("nan")

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,train_acc,val_loss,val_acc"]
        for i in range(self.epochs_completed):
            lines.append(
                f"{i + 1},{self.train_loss[i]:.6f},{self.train_acc[i]:.6f},"
                f"{self.val_loss[i]:.6f},{self.val_acc[i]:.6f}"
            )
        return "\n".join(lines) + "\n"


def train(
    train_set: LabeledDataset,
    val_set: LabeledDataset,
    arch: Sequence[LayerSpec],
    config: TrainConfig = TrainConfig(),
) -> Tuple[Network, TrainHistory]:
    """
    Train a network and return the weights of its best validation epoch.

    Training stops early once validation accuracy has not improved for
    `patience` consecutive epochs.

    Raises:
        TrainingError: On empty sets, bad config or a non-finite loss
    """
    config.validate()
    if len(train_set) == 0 or len(val_set) == 0:
        raise TrainingError(
            f"Training needs non-empty sets (train={len(train_set)}, val={len(val_set)})"
        )

    net = init_network(arch, seed=config.seed, dtype=np.float32)
    if train_set.dim != net.input_dim:
        raise TrainingError(
            f"Feature width {train_set.dim} does not match network input {net.input_dim}"
        )

    x_train = train_set.features.astype(np.float32, copy=False)
    y_train = train_set.labels
    x_val = val_set.features.astype(np.float32, copy=False)
    weights = None if config.class_weights is None else np.asarray(config.class_weights, dtype=np.float32)

    shuffle_rng = np.random.default_rng([config.seed, 1])
    dropout_rng = np.random.default_rng([config.seed, 2])
    state = AdamState.zeros_like(net.parameters())
    history = TrainHistory()
    best_net: Optional[Network] = None
    stale_epochs = 0
    step = 0

    n = len(train_set)
    num_batches = math.ceil(n / config.batch_size)
    logger.info(
        f"🚀 Training {len(arch)}-layer network on {n} strokes "
        f"({len(val_set)} validation), {config.epochs} epochs"
    )

    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        loss_sum, correct = 0.0, 0

        for b in range(num_batches):
            idx = order[b * config.batch_size:(b + 1) * config.batch_size]
            probs, cache = forward(net, x_train[idx], training=True, rng=dropout_rng)
            loss = cross_entropy(probs, y_train[idx], weights)
            if not math.isfinite(loss):
                raise TrainingError(f"Non-finite loss at epoch {epoch + 1}, batch {b + 1}")

            grads = backward(net, cache, y_train[idx], weights)
            step += 1
            adam_step(
                net.parameters(),
                grads.as_list(),
                state,
                lr=config.learning_rate,
                beta1=config.beta1,
                beta2=config.beta2,
                eps=config.eps,
                t=step,
            )
            net.mark_updated()

            loss_sum += loss * len(idx)
            correct += int(np.sum(np.argmax(probs, axis=1) == y_train[idx]))

        val_loss, val_acc = evaluate_network(net, x_val, val_set.labels)
        history.train_loss.append(loss_sum / n)
        history.train_acc.append(correct / n)
        history.val_loss.append(val_loss)
        history.val_acc.append(val_acc)

        logger.info(
            f"📈 Epoch {epoch + 1}/{config.epochs} - loss {loss_sum / n:.4f} "
            f"acc {correct / n:.4f} - val_loss {val_loss:.4f} val_acc {val_acc:.4f}"
        )

        if best_net is None or val_acc > history.val_acc[history.best_epoch]:
            history.best_epoch = epoch
            best_net = net.copy()
            stale_epochs = 0
        else:
            stale_epochs += 1
            if stale_epochs >= config.patience:
                logger.info(
                    f"⏹️ Early stopping after epoch {epoch + 1}; "
                    f"best val_acc {history.best_val_acc:.4f} at epoch {history.best_epoch + 1}"
                )
                break

    return best_net, history


def accuracy(net: Network, dataset: LabeledDataset) -> float:
    if len(dataset) == 0:
        raise NetworkError("Cannot score an empty dataset")
    return evaluate_network(net, dataset.features.astype(np.float32, copy=False), dataset.labels)[1]
