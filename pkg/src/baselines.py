"""
Mridangam Stroke Transcriber - Baseline Classifiers

The template classifier labels a stroke with the class whose mean spectrum
correlates best with it (Pearson); the reference SVM is six one-vs-rest
linear hinge-loss scorers trained by subgradient descent.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from src.dataset_io import NUM_CLASSES, StrokeLabel
from src.features import TemplateSet

logger = logging.getLogger(__name__)


class ZeroVarianceError(Exception):
    """Raised when a correlation input is constant."""

    pass


class BaselineError(Exception):
    """Raised on invalid baseline training or prediction input."""

    pass


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Centered correlation of two equal-length vectors, clamped to [-1, 1].

    Raises:
        ZeroVarianceError: If either vector is constant
        BaselineError: On length mismatch or fewer than two elements
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise BaselineError(f"pearson needs equal-length vectors of length >= 2, got {x.shape} and {y.shape}")

    xc = x - x.mean()
    yc = y - y.mean()
    nx, ny = np.sqrt(xc @ xc), np.sqrt(yc @ yc)
    if nx == 0 or ny == 0:
        raise ZeroVarianceError("Correlation undefined for a constant vector")
    return float(np.clip((xc @ yc) / (nx * ny), -1.0, 1.0))


def template_correlations(templates: TemplateSet, feature: np.ndarray) -> np.ndarray:
    """Correlation with every template; a constant input correlates 0 with everything."""
    scores = np.zeros(templates.num_classes)
    for c, template in enumerate(templates.templates):
        try:
            scores[c] = pearson(feature, template)
        except ZeroVarianceError:
            scores[c] = 0.0
    return scores


def template_classify(templates: TemplateSet, feature: np.ndarray) -> StrokeLabel:
    """Label of the best-correlated template; ties go to the lowest class index."""
    return StrokeLabel(int(np.argmax(template_correlations(templates, feature))))


def template_classify_batch(templates: TemplateSet, features: np.ndarray) -> np.ndarray:
    return np.array(
        [int(np.argmax(template_correlations(templates, f))) for f in np.asarray(features)],
        dtype=np.int64,
    )


# =============================================================================
# LINEAR SVM
# =============================================================================


@dataclass
class SvmModel:
    """One linear scorer per class: weights (K x D) and biases (K)."""

    weights: np.ndarray
    bias: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def svm_train(
    features: np.ndarray,
    labels: Sequence[int],
    epochs: int = 20,
    lr: float = 0.01,
    reg: float = 1e-4,
    seed: int = 0,
    batch_size: int = 32,
    num_classes: int = NUM_CLASSES,
) -> SvmModel:
    """
    Train one-vs-rest linear scorers on the L2-regularized hinge loss.

    Each mini-batch takes a hinge subgradient step followed by the implicit
    L2 shrink w <- w / (1 + lr*reg), which stays stable for any reg.

    Raises:
        BaselineError: On an empty set or a class with no examples
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if len(x) == 0:
        raise BaselineError("Cannot train an SVM on an empty set")
    counts = np.bincount(y, minlength=num_classes)
    for c, n in enumerate(counts):
        if n == 0:
            raise BaselineError(f"Class {c} has no training examples")

    n, dim = x.shape
    weights = np.zeros((num_classes, dim))
    bias = np.zeros(num_classes)
    signs = np.where(y[:, None] == np.arange(num_classes)[None, :], 1.0, -1.0)
    rng = np.random.default_rng(seed)
    shrink = 1.0 / (1.0 + lr * reg)

    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            scores = x[idx] @ weights.T + bias
            active = (signs[idx] * scores < 1.0) * signs[idx]
            weights = (weights + lr * (active.T @ x[idx]) / len(idx)) * shrink
            bias = (bias + lr * active.sum(axis=0) / len(idx)) * shrink

        logger.debug(f"SVM epoch {epoch + 1}/{epochs} complete")

    return SvmModel(weights, bias)


def svm_scores(model: SvmModel, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.shape[-1] != model.dim:
        raise BaselineError(f"Feature width {features.shape[-1]} does not match SVM width {model.dim}")
    return features @ model.weights.T + model.bias


def svm_predict(model: SvmModel, feature: np.ndarray) -> StrokeLabel:
    """Class with the highest score; ties go to the lowest index."""
    return StrokeLabel(int(np.argmax(svm_scores(model, feature))))


def svm_predict_batch(model: SvmModel, features: np.ndarray) -> np.ndarray:
    return np.argmax(svm_scores(model, features), axis=1)
