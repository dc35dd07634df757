"""
Experiment driver tests for Mridangam Stroke Transcriber.

These tests verify grid parsing and run scaled-down versions of the
tonic-invariance grid and the class-imbalance comparison.
"""

import math
import os
import sys
import unittest

import numpy as np

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.cache import FeatureCache
from src.dataset_io import LabeledDataset, Recording
from src.experiments import (
    DEFAULT_INVARIANCE_GRID,
    ExperimentConfig,
    ExperimentError,
    InvarianceRow,
    format_shifts,
    parse_grid,
    run_imbalance_comparison,
    run_invariance_grid,
    validate_grid,
)
from src.features import FeatureConfig
from src.nn import TrainConfig, build_architecture
from src.synth import SynthCorpusSpec, generate_corpus

SMALL_FEATURES = FeatureConfig(decimate=10)


def small_config(**overrides) -> ExperimentConfig:
    settings = dict(
        train=TrainConfig(epochs=2, learning_rate=0.001, batch_size=16, seed=0),
        features=SMALL_FEATURES,
        architecture=tuple(build_architecture([1200, 16, 6], dropout=0.0)),
    )
    settings.update(overrides)
    return ExperimentConfig(**settings)


def synth_recording(name: str, tonic: float, seed: int) -> Recording:
    spec = SynthCorpusSpec(tonic_hz=tonic, strokes_per_class=4, seed=seed)
    clip, annotations = generate_corpus(spec)
    return Recording(name, clip, tuple(annotations))


class TestGridParsing(unittest.TestCase):
    """Test grid text and validation."""

    def test_parse_rows(self):
        """Test parsing of train and test shift rows."""
        grid = parse_grid(":-1,1; -1,1:-2,2")
        self.assertEqual(grid[0], InvarianceRow((), (-1, 1)))
        self.assertEqual(grid[1].train_shifts, (-1, 1))
        self.assertEqual(grid[1].all_train_shifts, [-1, 0, 1])

    def test_zero_train_shift_is_implicit(self):
        """Test that the zero train shift is implicit."""
        self.assertEqual(parse_grid("0:1")[0].train_shifts, ())

    def test_empty_grid(self):
        """Test that an empty grid is rejected."""
        with self.assertRaises(ExperimentError) as ctx:
            parse_grid(" ; ")
        self.assertIn("empty grid", str(ctx.exception))
        with self.assertRaises(ExperimentError):
            validate_grid([])

    def test_malformed_rows(self):
        """Test that a row without a colon is rejected."""
        with self.assertRaises(ExperimentError):
            parse_grid("-1,1")
        with self.assertRaises(ExperimentError):
            parse_grid("a:1")

    def test_range_and_missing_tests(self):
        """Test that out-of-range shifts and empty test lists are rejected."""
        with self.assertRaises(ExperimentError):
            validate_grid([InvarianceRow((), (4,))])
        with self.assertRaises(ExperimentError):
            validate_grid([InvarianceRow((1,), ())])

    def test_default_grid(self):
        """Test that the default grid is valid."""
        self.assertEqual(len(DEFAULT_INVARIANCE_GRID), 5)
        validate_grid(DEFAULT_INVARIANCE_GRID)
        self.assertEqual(DEFAULT_INVARIANCE_GRID[4].all_train_shifts, [-2, -1, 0, 1, 2])
        self.assertEqual([row.reference for row in DEFAULT_INVARIANCE_GRID], [71.0, 58.0, 68.0, 52.0, 72.0])

    def test_format_shifts(self):
        """Test the display form of shift lists."""
        self.assertEqual(format_shifts([0, -1, 1]), "0 -1 +1")
        self.assertEqual(format_shifts([]), "none")


class TestArchitectureChoice(unittest.TestCase):
    """Test the default classifier size for each feature width."""

    def test_full_width_uses_reference_stack(self):
        """Test that full-width features use the reference layers."""
        arch = ExperimentConfig().resolve_architecture()
        self.assertEqual(len(arch), 7)
        self.assertEqual(arch[0].out_dim, 15000)

    def test_decimated_width_uses_small_stack(self):
        """Test that decimated features use the small layers."""
        arch = ExperimentConfig(features=SMALL_FEATURES).resolve_architecture()
        self.assertEqual([spec.out_dim for spec in arch], [256, 64, 6])


class TestInvarianceGrid(unittest.TestCase):
    """Test a one-row grid on two short synthetic recordings."""

    def setUp(self):
        self.recordings = [synth_recording("alpha", 160.0, 1), synth_recording("beta", 170.0, 2)]

    def test_one_row(self):
        """Test a single-row grid report."""
        cache = FeatureCache()
        report = run_invariance_grid(
            self.recordings, parse_grid(":-1,1"), small_config(), cache
        )
        self.assertEqual(report.holdout, "beta")
        result = report.results[0]
        self.assertEqual(result.train_size, 2 * 24)
        self.assertEqual(result.test_size, 2 * 2 * 24)
        self.assertTrue(0.0 <= result.seen_accuracy <= 1.0)
        self.assertTrue(0.0 <= result.held_out_accuracy <= 1.0)
        self.assertGreater(cache.hits, 0)

        csv = report.to_csv().strip().split("\n")
        self.assertEqual(csv[0].split(",")[:2], ["train_shifts", "test_shifts"])
        self.assertTrue(csv[1].startswith("0,-1 +1,"))

    def test_single_recording_has_no_held_out(self):
        """Test that one recording leaves nothing to hold out."""
        report = run_invariance_grid(self.recordings[:1], parse_grid(":1"), small_config())
        self.assertIsNone(report.holdout)
        self.assertTrue(math.isnan(report.results[0].held_out_accuracy))
        self.assertIn("nan", report.to_csv())

    def test_unknown_holdout(self):
        """Test that an unknown held-out recording is rejected."""
        with self.assertRaises(ExperimentError):
            run_invariance_grid(self.recordings, parse_grid(":1"), small_config(holdout="gamma"))

    def test_no_recordings(self):
        """Test that an empty recording list is rejected."""
        with self.assertRaises(ExperimentError):
            run_invariance_grid([], parse_grid(":1"), small_config())


class TestImbalanceComparison(unittest.TestCase):
    """Test the three-variant comparison on a skewed toy set."""

    def setUp(self):
        rng = np.random.default_rng(0)
        counts = [60, 40, 20, 30, 80, 50]
        labels = np.concatenate([np.full(n, c) for c, n in enumerate(counts)]).astype(np.int64)
        features = (np.eye(8)[labels] * 3 + 0.3 * rng.standard_normal((len(labels), 8))).astype(np.float32)
        self.dataset = LabeledDataset(features, labels)
        self.config = ExperimentConfig(
            train=TrainConfig(epochs=3, learning_rate=0.01, batch_size=16, seed=0),
            architecture=tuple(build_architecture([8, 16, 6], dropout=0.0)),
        )

    def test_three_variants_share_test_split(self):
        """Test that all three variants are scored on one test split."""
        with self.assertLogs("src.experiments", level="WARNING"):
            report = run_imbalance_comparison(self.dataset, self.config, per_class=400)

        names = [v.name for v in report.variants]
        self.assertEqual(names, ["baseline", "weighted", "balanced"])
        self.assertEqual(report.test_size, 56)
        for variant in report.variants:
            self.assertEqual(variant.confusion.total, 56)

        pool_size = report.variants[0].train_size
        self.assertEqual(pool_size, 224)
        self.assertEqual(report.variants[2].train_size % 6, 0)
        self.assertLess(report.variants[2].train_size, pool_size)

    def test_report_outputs(self):
        """Test the comparison report text and CSV."""
        report = run_imbalance_comparison(self.dataset, self.config, per_class=5)
        csv = report.to_csv()
        self.assertIn("weighted,accuracy,", csv)
        self.assertIn("baseline,mid1,", csv)
        self.assertEqual(report.variants[2].train_size, 30)
        self.assertIn("[balanced]", report.format())


if __name__ == "__main__":
    unittest.main()
