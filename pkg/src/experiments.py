"""
Mridangam Stroke Transcriber - Experiments Module

Drives the two studies built on top of the pipeline:

- the tonic-invariance grid: train on recordings augmented with one set of
  semitone shifts, test on recordings shifted by another set, reporting
  accuracy on seen compositions and on a held-out composition;
- the class-imbalance comparison: baseline, class-weighted and balanced
  classifiers trained on one split and scored on the same untouched test
  split.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.augment import GRID_SEMITONES, OnsetSource, build_augmented_dataset
from src.cache import FeatureCache
from src.dataset_io import (
    LABEL_NAMES,
    LabeledDataset,
    Recording,
    balance_dataset,
    compute_class_weights,
    split_train_val,
)
from src.evaluation import (
    ClassMetrics,
    ConfusionMatrix,
    confusion,
    format_confusion,
    format_metrics,
    format_table,
    metrics,
)
from src.features import DEFAULT_FEATURES, FeatureConfig
from src.nn.layers import LayerSpec, build_architecture, reference_architecture
from src.nn.network import Network, predict_batch
from src.nn.training import TrainConfig, TrainHistory, accuracy, train
from src.onset import OnsetConfig

logger = logging.getLogger(__name__)


class ExperimentError(Exception):
    """Raised on an invalid grid or experiment configuration."""

    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Everything an experiment run needs besides the data.

    When `architecture` is None the full-size classifier is used for
    12,000-bin features and a 256-64 hidden stack for any other width.
    `holdout` names the composition kept out of training for the held-out
    column; by default it is the last recording.
    """

    train: TrainConfig = field(default_factory=TrainConfig)
    features: FeatureConfig = DEFAULT_FEATURES
    architecture: Optional[Tuple[LayerSpec, ...]] = None
    dropout: float = 0.25
    onset_source: OnsetSource = OnsetSource.ANNOTATIONS
    onset_config: Optional[OnsetConfig] = None
    train_fraction: float = 0.8
    seed: int = 0
    holdout: Optional[str] = None
    max_workers: int = 1

    def resolve_architecture(self) -> List[LayerSpec]:
        if self.architecture is not None:
            return list(self.architecture)
        if self.features.dim == 12000:
            return reference_architecture(self.dropout)
        return build_architecture((self.features.dim, 256, 64, 6), dropout=self.dropout)


# =============================================================================
# TONIC-INVARIANCE GRID
# =============================================================================


@dataclass(frozen=True)
class InvarianceRow:
    """Train on shift 0 plus `train_shifts`; test on `test_shifts` only."""

    train_shifts: Tuple[int, ...]
    test_shifts: Tuple[int, ...]
    reference: Optional[float] = None  # published accuracy, percent

    @property
    def all_train_shifts(self) -> List[int]:
        return sorted({0, *self.train_shifts})


DEFAULT_INVARIANCE_GRID: Tuple[InvarianceRow, ...] = (
    InvarianceRow((), (-1, 1), 71.0),
    InvarianceRow((), (-2, 2), 58.0),
    InvarianceRow((-1, 1), (-2, 2), 68.0),
    InvarianceRow((-1, 1), (-3, 3), 52.0),
    InvarianceRow((-2, -1, 1, 2), (-3, 3), 72.0),
)


@dataclass
class InvarianceResult:
    row: InvarianceRow
    seen_accuracy: float
    held_out_accuracy: float
    train_size: int
    test_size: int


@dataclass
class InvarianceReport:
    results: List[InvarianceResult]
    holdout: Optional[str] = None

    HEADER = (
        "train_shifts",
        "test_shifts",
        "seen_accuracy",
        "held_out_accuracy",
        "reference_accuracy",
        "train_size",
        "test_size",
    )

    def _rows(self) -> List[List[object]]:
        return [
            [
                format_shifts(r.row.all_train_shifts),
                format_shifts(r.row.test_shifts),
                r.seen_accuracy,
                r.held_out_accuracy,
                "" if r.row.reference is None else r.row.reference / 100.0,
                r.train_size,
                r.test_size,
            ]
            for r in self.results
        ]

    def to_csv(self) -> str:
        lines = [",".join(self.HEADER)]
        for row in self._rows():
            lines.append(",".join(_csv_cell(v) for v in row))
        return "\n".join(lines) + "\n"

    def format(self) -> str:
        return format_table(self.HEADER, self._rows())


def _csv_cell(value: object) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.6f}"
    return str(value)


def format_shifts(shifts: Sequence[int]) -> str:
    return " ".join(f"{s:+d}" if s else "0" for s in shifts) or "none"


def parse_grid(text: str) -> List[InvarianceRow]:
    """
    Parse rows written as `train:test` separated by semicolons, shifts
    comma-separated, e.g. `:-1,1;-1,1:-2,2`. An empty train side means
    no augmentation.

    Raises:
        ExperimentError: On malformed rows or an empty grid
    """
    rows = []
    for number, chunk in enumerate((c.strip() for c in text.split(";")), start=1):
        if not chunk:
            continue
        if chunk.count(":") != 1:
            raise ExperimentError(f"Grid row {number} '{chunk}' must look like train:test")
        train_text, test_text = chunk.split(":")
        try:
            train_shifts = tuple(int(s) for s in train_text.split(",") if s.strip())
            test_shifts = tuple(int(s) for s in test_text.split(",") if s.strip())
        except ValueError:
            raise ExperimentError(f"Grid row {number} '{chunk}' has a non-integer shift") from None
        rows.append(InvarianceRow(tuple(s for s in train_shifts if s != 0), test_shifts))
    if not rows:
        raise ExperimentError("empty grid")
    return rows


def validate_grid(grid: Sequence[InvarianceRow]) -> None:
    if not grid:
        raise ExperimentError("empty grid")
    for i, row in enumerate(grid, start=1):
        if not row.test_shifts:
            raise ExperimentError(f"Grid row {i} has no test shifts")
        for s in (*row.train_shifts, *row.test_shifts):
            if abs(s) > GRID_SEMITONES:
                raise ExperimentError(
                    f"Grid row {i}: shift {s} outside +/-{GRID_SEMITONES} semitones"
                )


def train_classifier(
    dataset: LabeledDataset, config: ExperimentConfig, train_config: Optional[TrainConfig] = None
) -> Tuple[Network, TrainHistory]:
    """80/20 split of `dataset`, then train with early stopping on the 20%."""
    train_part, val_part = split_train_val(dataset, config.train_fraction, config.seed)
    return train(train_part, val_part, config.resolve_architecture(), train_config or config.train)


def _run_row(
    row: InvarianceRow,
    recordings: Sequence[Recording],
    config: ExperimentConfig,
    holdout: Optional[str],
    cache: FeatureCache,
) -> InvarianceResult:
    def build(recs, shifts):
        return build_augmented_dataset(
            recs, shifts, config.features, config.onset_source, config.onset_config, cache
        )

    train_shifts = row.all_train_shifts
    seen_train = build(recordings, train_shifts)
    seen_test = build(recordings, row.test_shifts)
    net, _ = train_classifier(seen_train, config)
    seen_accuracy = accuracy(net, seen_test)

    held_out_accuracy = float("nan")
    if holdout is not None:
        training = [r for r in recordings if r.name != holdout]
        held = [r for r in recordings if r.name == holdout]
        held_net, _ = train_classifier(build(training, train_shifts), config)
        held_out_accuracy = accuracy(held_net, build(held, row.test_shifts))

    logger.info(
        f"📊 train {format_shifts(train_shifts)} / test {format_shifts(row.test_shifts)}: "
        f"seen {seen_accuracy:.3f}, held-out {held_out_accuracy:.3f}"
    )
    return InvarianceResult(row, seen_accuracy, held_out_accuracy, len(seen_train), len(seen_test))


def run_invariance_grid(
    recordings: Sequence[Recording],
    grid: Sequence[InvarianceRow] = DEFAULT_INVARIANCE_GRID,
    config: ExperimentConfig = ExperimentConfig(),
    cache: Optional[FeatureCache] = None,
) -> InvarianceReport:
    """
    Train and test one classifier per grid row.

    Args:
        recordings: Loaded recordings at their original tonic
        grid: Rows of (train shifts, test shifts)
        config: Training, feature and onset settings
        cache: Feature memo shared by the rows (a fresh one by default)

    Returns:
        Report with seen-composition and held-out accuracy per row

    Raises:
        ExperimentError: On an empty grid, shifts beyond +/-3 or no recordings
    """
    validate_grid(grid)
    if not recordings:
        raise ExperimentError("No recordings to run the grid on")

    names = [r.name for r in recordings]
    holdout = config.holdout
    if holdout is not None and holdout not in names:
        raise ExperimentError(f"Held-out composition '{holdout}' is not among {names}")
    if len(recordings) < 2:
        logger.warning("⚠️ Only one recording: held-out accuracy is not available")
        holdout = None
    elif holdout is None:
        holdout = names[-1]

    cache = cache if cache is not None else FeatureCache()
    logger.info(f"🚀 Running {len(grid)}-row invariance grid on {len(recordings)} recordings")

    if config.max_workers > 1:
        with ThreadPoolExecutor(max_workers=config.max_workers) as pool:
            results = list(
                pool.map(lambda row: _run_row(row, recordings, config, holdout, cache), grid)
            )
    else:
        results = [_run_row(row, recordings, config, holdout, cache) for row in grid]

    stats = cache.get_stats()
    logger.debug(f"Feature cache: {stats['hits']} hits, {stats['misses']} misses")
    return InvarianceReport(results, holdout)


# =============================================================================
# CLASS-IMBALANCE COMPARISON
# =============================================================================


IMBALANCE_REFERENCES: Dict[str, Dict[str, object]] = {
    "baseline": {
        "accuracy": 0.83,
        "precision": (0.80, 0.85, 0.90, 0.83, 0.81, 0.87),
        "recall": (0.79, 0.84, 0.65, 0.77, 0.94, 0.84),
        "f1": (0.79, 0.84, 0.75, 0.80, 0.87, 0.85),
    },
    "weighted": {
        "accuracy": 0.817,
        "precision": (0.77, 0.83, 0.67, 0.63, 0.85, 0.92),
        "recall": (0.84, 0.87, 0.81, 0.83, 0.85, 0.76),
        "f1": (0.80, 0.85, 0.74, 0.72, 0.85, 0.83),
    },
    "balanced": {"accuracy": 0.76},
}


@dataclass
class VariantResult:
    name: str
    confusion: ConfusionMatrix
    metrics: ClassMetrics
    train_size: int
    reference: Dict[str, object]


@dataclass
class ImbalanceReport:
    variants: List[VariantResult]
    test_size: int

    def summary_rows(self) -> List[List[object]]:
        return [
            [v.name, v.train_size, v.metrics.accuracy, v.reference.get("accuracy", "")]
            for v in self.variants
        ]

    def to_csv(self) -> str:
        lines = ["variant,class,precision,recall,f1,reference_precision,reference_recall,reference_f1"]
        for v in self.variants:
            for c, name in enumerate(LABEL_NAMES[: v.metrics.precision.shape[0]]):
                refs = [
                    f"{v.reference[k][c]:.2f}" if k in v.reference else ""
                    for k in ("precision", "recall", "f1")
                ]
                lines.append(
                    f"{v.name},{name},{v.metrics.precision[c]:.6f},{v.metrics.recall[c]:.6f},"
                    f"{v.metrics.f1[c]:.6f},{','.join(refs)}"
                )
            lines.append(f"{v.name},accuracy,{v.metrics.accuracy:.6f},,,{v.reference.get('accuracy', '')},,")
        return "\n".join(lines) + "\n"

    def format(self) -> str:
        parts = [format_table(("variant", "train_size", "accuracy", "reference"), self.summary_rows())]
        for v in self.variants:
            parts.append(f"\n[{v.name}]\n{format_confusion(v.confusion)}\n{format_metrics(v.metrics)}")
        return "\n".join(parts)


def run_imbalance_comparison(
    dataset: LabeledDataset, config: ExperimentConfig = ExperimentConfig(), per_class: int = 400
) -> ImbalanceReport:
    """
    Score baseline, weighted and balanced classifiers on one test split.

    The test split is a uniform 20% of `dataset` and keeps the corpus's
    natural class frequencies. The balanced variant draws `per_class`
    strokes of each class from the training split, clipped to its smallest
    class.
    """
    pool, test_set = split_train_val(dataset, config.train_fraction, config.seed)
    if len(test_set) == 0:
        raise ExperimentError("Test split is empty; the dataset is too small")

    smallest = int(pool.class_counts.min())
    if smallest < per_class:
        logger.warning(
            f"⚠️ Smallest class has {smallest} training strokes; balancing at {smallest} instead of {per_class}"
        )
    weights = tuple(float(w) for w in compute_class_weights(pool.class_counts))
    variants = [
        ("baseline", pool, config.train),
        ("weighted", pool, replace(config.train, class_weights=weights)),
        ("balanced", balance_dataset(pool, min(per_class, smallest), config.seed), config.train),
    ]

    results = []
    for name, train_pool, train_config in variants:
        logger.info(f"🚀 Training {name} classifier on {len(train_pool)} strokes")
        net, _ = train_classifier(train_pool, config, train_config)
        preds, _ = predict_batch(net, test_set.features.astype(np.float32, copy=False))
        cm = confusion(preds, test_set.labels, test_set.num_classes)
        results.append(
            VariantResult(name, cm, metrics(cm), len(train_pool), IMBALANCE_REFERENCES[name])
        )
        logger.info(f"✅ {name}: test accuracy {results[-1].metrics.accuracy:.3f}")

    return ImbalanceReport(results, len(test_set))
