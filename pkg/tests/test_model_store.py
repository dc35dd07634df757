"""
Model storage tests for Mridangam Stroke Transcriber.

These tests verify the binary container for networks, template sets and
SVM models.
"""

import os
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.baselines import SvmModel, svm_predict_batch
from src.features import FeatureConfig, TemplateSet
from src.model_store import (
    SVM_MAGIC,
    ModelFormatError,
    load_network,
    load_svm,
    load_templates,
    save_network,
    save_svm,
    save_templates,
    write_array_file,
)
from src.nn import build_architecture, init_network, predict_batch


class TestNetworkFile(unittest.TestCase):
    """Test saving and loading networks."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / "model.bin"
        self.features = FeatureConfig(decimate=10, normalize=True)
        self.net = init_network(build_architecture([1200, 32, 6], dropout=0.3), seed=4)

    def tearDown(self):
        self.tmp.cleanup()

    def test_predictions_survive_reload(self):
        """Test that a reloaded network predicts exactly as saved."""
        save_network(self.path, self.net, self.features)
        loaded, features = load_network(self.path)

        self.assertEqual(features, self.features)
        self.assertEqual(loaded.architecture, self.net.architecture)
        x = np.random.default_rng(0).random((25, 1200)).astype(np.float32)
        labels_a, probs_a = predict_batch(self.net, x)
        labels_b, probs_b = predict_batch(loaded, x)
        np.testing.assert_array_equal(labels_a, labels_b)
        np.testing.assert_array_equal(probs_a, probs_b)

    def test_identical_models_identical_bytes(self):
        """Test that saving one model twice gives identical bytes."""
        other = Path(self.tmp.name) / "copy.bin"
        save_network(self.path, self.net, self.features)
        save_network(other, self.net.copy(), self.features)
        self.assertEqual(self.path.read_bytes(), other.read_bytes())
        self.assertEqual(self.path.read_bytes()[:4], b"MRNN")

    def test_wrong_kind_of_file(self):
        """Test that a template file is not accepted as a network."""
        save_templates(self.path, TemplateSet(np.ones((6, 4)), np.ones(6)))
        with self.assertRaises(ModelFormatError):
            load_network(self.path)

    def test_truncated_file(self):
        """Test that a truncated network file is rejected."""
        save_network(self.path, self.net, self.features)
        self.path.write_bytes(self.path.read_bytes()[:-100])
        with self.assertRaises(ModelFormatError):
            load_network(self.path)

    def test_missing_file(self):
        """Test that a missing model file raises ModelFormatError."""
        with self.assertRaises(ModelFormatError):
            load_network(Path(self.tmp.name) / "absent.bin")


class TestBaselineFiles(unittest.TestCase):
    """Test template and SVM files."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_templates(self):
        """Test that template sets reload exactly."""
        templates = TemplateSet(np.arange(24, dtype=np.float64).reshape(6, 4), np.array([3, 1, 4, 1, 5, 9]))
        save_templates(self.dir / "t.bin", templates)
        loaded, features = load_templates(self.dir / "t.bin")
        np.testing.assert_array_equal(loaded.templates, templates.templates)
        np.testing.assert_array_equal(loaded.counts, templates.counts)
        self.assertEqual(features, FeatureConfig())

    def test_svm_predictions(self):
        """Test that a reloaded SVM keeps its weights and predictions."""
        rng = np.random.default_rng(1)
        model = SvmModel(
            rng.standard_normal((6, 12)),
            rng.standard_normal(6),
        )
        save_svm(self.dir / "s.bin", model, FeatureConfig(decimate=1000))
        loaded, features = load_svm(self.dir / "s.bin")
        self.assertEqual(features.dim, 12)
        x = rng.standard_normal((40, 12))
        np.testing.assert_array_equal(svm_predict_batch(loaded, x), svm_predict_batch(model, x))
        np.testing.assert_array_equal(loaded.weights, model.weights)

    def test_unknown_array_type(self):
        """Test that an unsupported element type is rejected."""
        write_array_file(self.dir / "i.bin", SVM_MAGIC, {}, [np.zeros(3)], dtype="<i4")
        with self.assertRaises(ModelFormatError):
            load_svm(self.dir / "i.bin")


if __name__ == "__main__":
    unittest.main()
