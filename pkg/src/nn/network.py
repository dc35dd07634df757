"""
Mridangam Stroke Transcriber - Feedforward Network

Dense ReLU layers with inverted dropout and a softmax output, trained with
(optionally class-weighted) categorical cross-entropy. Forward and backward
passes are plain numpy matrix products.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.dataset_io import StrokeLabel
from src.nn.layers import Activation, LayerSpec, NetworkError, validate_architecture

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


@dataclass
class DenseLayer:
    spec: LayerSpec
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)


@dataclass
class Network:
    """
    Ordered dense layers.

    `generation` increases after every parameter update so that a stale
    forward cache can be detected.
    """

    layers: List[DenseLayer]
    generation: int = 0

    @property
    def architecture(self) -> List[LayerSpec]:
        return [layer.spec for layer in self.layers]

    @property
    def input_dim(self) -> int:
        return self.layers[0].spec.in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].spec.out_dim

    @property
    def dtype(self) -> np.dtype:
        return self.layers[0].weights.dtype

    def parameters(self) -> List[np.ndarray]:
        """Weights and biases in layer order (w0, b0, w1, b1, ...)."""
        params = []
        for layer in self.layers:
            params.extend([layer.weights, layer.bias])
        return params

    def mark_updated(self) -> None:
        self.generation += 1

    def copy(self) -> "Network":
        return Network(
            [DenseLayer(l.spec, l.weights.copy(), l.bias.copy()) for l in self.layers],
            self.generation,
        )

    def astype(self, dtype) -> "Network":
        return Network(
            [DenseLayer(l.spec, l.weights.astype(dtype), l.bias.astype(dtype)) for l in self.layers],
            self.generation,
        )


@dataclass
class ForwardCache:
    """Per-layer inputs, pre-activations and dropout masks from one forward pass."""

    inputs: List[np.ndarray]
    pre_activations: List[np.ndarray]
    masks: List[Optional[np.ndarray]]
    probs: np.ndarray
    generation: int


@dataclass
class Gradients:
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def as_list(self) -> List[np.ndarray]:
        grads = []
        for w, b in zip(self.weights, self.biases):
            grads.extend([w, b])
        return grads


def init_network(arch: Sequence[LayerSpec], seed: int = 0, dtype=np.float32) -> Network:
    """
    He-normal weights (std sqrt(2/in_dim)) and zero biases.

    Raises:
        NetworkError: If the layer dims do not chain
    """
    validate_architecture(arch)
    rng = np.random.default_rng(seed)
    layers = []
    for spec in arch:
        std = np.sqrt(2.0 / spec.in_dim)
        weights = (rng.standard_normal((spec.out_dim, spec.in_dim)) * std).astype(dtype)
        layers.append(DenseLayer(spec, weights, np.zeros(spec.out_dim, dtype=dtype)))
    return Network(layers)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted by the row max for stability."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _check_batch(net: Network, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch)
    if batch.ndim == 1:
        batch = batch[None, :]
    if batch.ndim != 2 or batch.shape[1] != net.input_dim:
        raise NetworkError(f"Expected input of width {net.input_dim}, got shape {batch.shape}")
    if not np.all(np.isfinite(batch)):
        raise NetworkError("Input contains non-finite values")
    return batch.astype(net.dtype, copy=False)


def forward(
    net: Network,
    batch: np.ndarray,
    training: bool = False,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    masks: Optional[Sequence[Optional[np.ndarray]]] = None,
) -> Tuple[np.ndarray, ForwardCache]:
    """
    Class probabilities for a batch.

    In training mode inverted dropout is applied: kept units are scaled by
    1/(1-p). Masks come from `rng`, a generator seeded with `seed`, or are
    reused from `masks` (a previous cache's masks) to freeze them.

    Returns:
        (probabilities, cache)

    Raises:
        NetworkError: On dimension mismatch or non-finite input
    """
    x = _check_batch(net, batch)
    if training and masks is None and rng is None:
        rng = np.random.default_rng(seed)

    inputs, pre_acts, used_masks = [], [], []
    for i, layer in enumerate(net.layers):
        inputs.append(x)
        z = x @ layer.weights.T + layer.bias
        pre_acts.append(z)

        if layer.spec.activation is Activation.SOFTMAX:
            x = softmax(z)
            used_masks.append(None)
            continue

        a = np.maximum(z, 0)
        rate = layer.spec.dropout_after
        mask = None
        if training and rate:
            if masks is not None:
                mask = masks[i]
            else:
                mask = (rng.random(a.shape) >= rate).astype(a.dtype) / (1.0 - rate)
            a = a * mask
        used_masks.append(mask)
        x = a

    cache = ForwardCache(inputs, pre_acts, used_masks, x, net.generation)
    return x, cache


def _sample_weights(targets: np.ndarray, class_weights: Optional[np.ndarray], dtype) -> np.ndarray:
    if class_weights is None:
        return np.ones(len(targets), dtype=dtype)
    return np.asarray(class_weights, dtype=dtype)[targets]


def _check_targets(targets: Sequence[int], num_classes: int) -> np.ndarray:
    targets = np.asarray(targets, dtype=np.int64)
    if targets.size and (targets.min() < 0 or targets.max() >= num_classes):
        raise NetworkError(f"Target index outside 0..{num_classes - 1}")
    return targets


def cross_entropy(
    probs: np.ndarray, targets: Sequence[int], class_weights: Optional[np.ndarray] = None
) -> float:
    """
    Mean of w[target] * -log p[target], probabilities floored at 1e-12.

    Raises:
        NetworkError: On an invalid target index
    """
    probs = np.asarray(probs)
    targets = _check_targets(targets, probs.shape[1])
    picked = np.maximum(probs[np.arange(len(targets)), targets], PROB_FLOOR)
    weights = _sample_weights(targets, class_weights, probs.dtype)
    return float(np.mean(weights * -np.log(picked)))


def backward(
    net: Network,
    cache: ForwardCache,
    targets: Sequence[int],
    class_weights: Optional[np.ndarray] = None,
) -> Gradients:
    """
    Exact gradients of the (weighted) cross-entropy for every parameter.

    The softmax and loss are fused: the output-layer gradient is
    (p - onehot) * w[target] / batch.

    Raises:
        NetworkError: If the cache predates the network's last update
    """
    if cache.generation != net.generation:
        raise NetworkError(
            f"Stale forward cache (generation {cache.generation}, network {net.generation})"
        )

    probs = cache.probs
    batch = probs.shape[0]
    targets = _check_targets(targets, probs.shape[1])
    weights = _sample_weights(targets, class_weights, probs.dtype)

    delta = probs.copy()
    delta[np.arange(batch), targets] -= 1
    delta *= weights[:, None] / batch

    grad_w: List[np.ndarray] = [None] * len(net.layers)
    grad_b: List[np.ndarray] = [None] * len(net.layers)

    for i in reversed(range(len(net.layers))):
        layer = net.layers[i]
        grad_w[i] = delta.T @ cache.inputs[i]
        grad_b[i] = delta.sum(axis=0)
        if i == 0:
            break

        upstream = delta @ layer.weights
        prev_mask = cache.masks[i - 1]
        if prev_mask is not None:
            upstream = upstream * prev_mask
        delta = upstream * (cache.pre_activations[i - 1] > 0)

    return Gradients(grad_w, grad_b)


def predict_batch(net: Network, features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Argmax labels (lowest index wins ties) and probabilities for a batch."""
    probs, _ = forward(net, features, training=False)
    return np.argmax(probs, axis=1), probs


def predict(net: Network, feature: np.ndarray) -> Tuple[StrokeLabel, np.ndarray]:
    """
    Most probable stroke class of one feature vector.

    Raises:
        NetworkError: On dimension mismatch
    """
    feature = np.asarray(feature)
    if feature.ndim != 1:
        raise NetworkError(f"predict expects one feature vector, got shape {feature.shape}")
    labels, probs = predict_batch(net, feature)
    return StrokeLabel(int(labels[0])), probs[0]


def evaluate_network(
    net: Network,
    features: np.ndarray,
    labels: Sequence[int],
    class_weights: Optional[np.ndarray] = None,
    batch_size: int = 256,
) -> Tuple[float, float]:
    """Eval-mode (loss, accuracy) over a dataset, in batches."""
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise NetworkError("Cannot evaluate on an empty set")

    loss_sum, correct = 0.0, 0
    for start in range(0, len(labels), batch_size):
        x = features[start:start + batch_size]
        y = labels[start:start + batch_size]
        probs, _ = forward(net, x, training=False)
        loss_sum += cross_entropy(probs, y, class_weights) * len(y)
        correct += int(np.sum(np.argmax(probs, axis=1) == y))
    return loss_sum / len(labels), correct / len(labels)
