"""
Mridangam Stroke Transcriber - Evaluation Module

Onset matching against ground truth (15 ms tolerance), confusion matrices,
per-class precision/recall/F1 and plain-text/CSV report formatting.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.dataset_io import LABEL_NAMES, NUM_CLASSES

logger = logging.getLogger(__name__)

ONSET_TOLERANCE = 0.015


class EvaluationError(Exception):
    """Raised when evaluation inputs are inconsistent."""

    pass


@dataclass(frozen=True)
class OnsetMatchReport:
    """Result of one-to-one onset matching."""

    matched: int
    false_positives: int
    missed: int
    accuracy: float
    mean_abs_offset: float
    pairs: Tuple[Tuple[int, int], ...] = ()

    @property
    def truth_count(self) -> int:
        return self.matched + self.missed

    @property
    def detected_count(self) -> int:
        return self.matched + self.false_positives

    @property
    def precision(self) -> float:
        return self.matched / self.detected_count if self.detected_count else 0.0

    @property
    def recall(self) -> float:
        return self.accuracy

    @property
    def f_measure(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def summary(self) -> str:
        return (
            f"matched {self.matched}/{self.truth_count} "
            f"({100 * self.accuracy:.1f}%), false positives {self.false_positives}, "
            f"F-measure {self.f_measure:.3f}, mean offset {1000 * self.mean_abs_offset:.2f} ms"
        )


def _check_sorted(values: np.ndarray, name: str) -> None:
    if np.any(np.diff(values) < 0):
        raise EvaluationError(f"{name} onsets must be sorted ascending")


def match_onsets(
    detected: Sequence[float], truth: Sequence[float], tolerance: float = ONSET_TOLERANCE
) -> OnsetMatchReport:
    """
    Greedy one-to-one onset matching in time order.

    Each truth onset, in order, takes the nearest unconsumed detection whose
    offset is strictly below `tolerance`; ties go to the earlier detection.

    Raises:
        EvaluationError: If either input is unsorted
    """
    detected = np.asarray(detected, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    _check_sorted(detected, "Detected")
    _check_sorted(truth, "Truth")

    consumed = np.zeros(len(detected), dtype=bool)
    pairs: List[Tuple[int, int]] = []
    offsets: List[float] = []

    for ti, t in enumerate(truth):
        lo = np.searchsorted(detected, t - tolerance, side="left")
        hi = np.searchsorted(detected, t + tolerance, side="right")
        best, best_offset = None, None
        for di in range(lo, hi):
            if consumed[di]:
                continue
            offset = abs(detected[di] - t)
            if offset < tolerance and (best_offset is None or offset < best_offset):
                best, best_offset = di, offset
        if best is not None:
            consumed[best] = True
            pairs.append((ti, best))
            offsets.append(best_offset)

    matched = len(pairs)
    return OnsetMatchReport(
        matched=matched,
        false_positives=len(detected) - matched,
        missed=len(truth) - matched,
        accuracy=matched / len(truth) if len(truth) else 0.0,
        mean_abs_offset=float(np.mean(offsets)) if offsets else 0.0,
        pairs=tuple(pairs),
    )


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows = true label, columns = predicted label."""

    counts: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def names(self) -> List[str]:
        if self.num_classes == NUM_CLASSES:
            return list(LABEL_NAMES)
        return [str(i) for i in range(self.num_classes)]

    def to_csv(self) -> str:
        names = self.names()
        lines = ["true\\predicted," + ",".join(names)]
        for name, row in zip(names, self.counts):
            lines.append(name + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ClassMetrics:
    """Per-class precision, recall and F1 with overall accuracy."""

    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    accuracy: float
    degenerate: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def to_csv(self, names: Optional[Sequence[str]] = None) -> str:
        names = list(names or (LABEL_NAMES if len(self.precision) == NUM_CLASSES else range(len(self.precision))))
        lines = ["metric," + ",".join(str(n) for n in names)]
        for metric, values in (("precision", self.precision), ("recall", self.recall), ("f1", self.f1)):
            lines.append(metric + "," + ",".join(f"{v:.4f}" for v in values))
        lines.append(f"accuracy,{self.accuracy:.4f}")
        return "\n".join(lines) + "\n"


def confusion(
    preds: Sequence[int], truths: Sequence[int], num_classes: int = NUM_CLASSES
) -> ConfusionMatrix:
    """
    Count (truth, prediction) pairs.

    Raises:
        EvaluationError: On length mismatch or out-of-range labels
    """
    preds = np.asarray(preds, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if preds.shape != truths.shape:
        raise EvaluationError(f"{len(preds)} predictions but {len(truths)} truths")
    for arr in (preds, truths):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise EvaluationError(f"Label outside 0..{num_classes - 1}")

    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (truths, preds), 1)
    return ConfusionMatrix(counts)


def metrics(cm: ConfusionMatrix) -> ClassMetrics:
    """
    Precision, recall, F1 per class and overall accuracy.

    Zero denominators give 0 and set the class's degenerate flag.

    Raises:
        EvaluationError: If the matrix is empty
    """
    counts = cm.counts.astype(np.int64)
    total = int(counts.sum())
    if total == 0:
        raise EvaluationError("Confusion matrix is empty")

    tp = np.diag(counts).astype(np.float64)
    predicted = counts.sum(axis=0)
    actual = counts.sum(axis=1)

    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros_like(tp), where=actual > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    degenerate = (predicted == 0) | (actual == 0)

    return ClassMetrics(
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=int(np.trace(counts)) / total,
        degenerate=degenerate,
    )


def format_table(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    """Left-aligned plain-text table."""
    cells = [[str(h) for h in header]] + [[_cell(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _cell(value: object) -> str:
    if isinstance(value, float):
        return "n/a" if np.isnan(value) else f"{value:.3f}"
    return str(value)


def format_confusion(cm: ConfusionMatrix) -> str:
    names = cm.names()
    rows = [[name] + [int(v) for v in row] for name, row in zip(names, cm.counts)]
    return format_table(["true \\ pred"] + names, rows)


def format_metrics(m: ClassMetrics) -> str:
    names = LABEL_NAMES if len(m.precision) == NUM_CLASSES else [str(i) for i in range(len(m.precision))]
    rows = [
        ["precision"] + [float(v) for v in m.precision],
        ["recall"] + [float(v) for v in m.recall],
        ["f1"] + [float(v) for v in m.f1],
    ]
    return format_table(["metric"] + list(names), rows) + f"\naccuracy {m.accuracy:.4f}"
