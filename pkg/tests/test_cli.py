"""
Command-line tests for Mridangam Stroke Transcriber.

These tests drive `main()` end to end on a tiny synthetic corpus and check
the exit codes of the error paths.
"""

import io
import os
import sys
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.cli import (
    architecture_from,
    build_parser,
    main,
    onset_config_from,
    parse_shifts,
    settings_from_args,
)
from src.config import ConfigurationError, resolve_settings
from src.dataset_io import AudioClip, load_annotations, load_manifest, write_wav
from src.features import FeatureConfig, load_feature_cache, save_feature_cache
from src.model_store import load_network, save_network
from src.nn import build_architecture, init_network
from src.onset import OnsetConfig

SMALL_FLAGS = ["--decimate", "10", "--arch", "1200,16,6", "--epochs", "2", "--batch-size", "16"]


def run(argv):
    """main() with stderr captured; returns (exit code, stderr text)."""
    with patch("sys.stderr", new_callable=io.StringIO) as err:
        code = main(argv)
    return code, err.getvalue()


class TestHelpers(unittest.TestCase):
    """Test settings helpers."""

    def test_parse_shifts(self):
        """Test parsing of the comma-separated shift list."""
        self.assertEqual(parse_shifts("-2,-1, 1,2"), [-2, -1, 1, 2])
        self.assertEqual(parse_shifts(""), [])
        with self.assertRaises(ConfigurationError):
            parse_shifts("up")

    def test_architecture_must_match_features(self):
        """Test that the input layer must match the feature width."""
        settings = resolve_settings({"arch": "1000,6", "decimate": 10})
        with self.assertRaises(ConfigurationError) as ctx:
            architecture_from(settings, 1200)
        self.assertIn("1200,256,64,6", str(ctx.exception))

    def test_reference_architecture_by_default(self):
        """Test the default layer widths."""
        settings = resolve_settings({})
        arch = architecture_from(settings, 12000)
        self.assertEqual(len(arch), 7)


class TestCommands(unittest.TestCase):
    """Run the subcommands on a generated corpus."""

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir = Path(cls.tmp.name)
        cls.corpus = cls.dir / "corpus"
        code, _ = run([
            "synth", "--out-dir", str(cls.corpus), "--strokes-per-class", "4",
            "--recordings", "2", "--tonic", "170",
        ])
        assert code == 0

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_synth_outputs(self):
        """Test that synth writes a manifest with one entry per recording."""
        entries = load_manifest(self.corpus / "manifest.csv")
        self.assertEqual([e.name for e in entries], ["synth1", "synth2"])
        self.assertEqual(len(load_annotations(self.corpus / "synth1.csv")), 24)
        self.assertTrue((self.corpus / "synth1.json").exists())

    def test_train_then_transcribe(self):
        """Test training a model and transcribing with it."""
        model = self.dir / "model.bin"
        code, err = run(
            ["train", str(self.corpus / "manifest.csv"), "--model-out", str(model), "--shifts", "1"]
            + SMALL_FLAGS
        )
        self.assertEqual(code, 0, err)
        history = Path(f"{model}.history.csv").read_text().strip().split("\n")
        self.assertEqual(history[0], "epoch,train_loss,train_acc,val_loss,val_acc")

        net, features = load_network(model)
        self.assertEqual(features.decimate, 10)
        self.assertEqual(net.input_dim, 1200)

        out = self.dir / "strokes.csv"
        code, err = run(["transcribe", str(self.corpus / "synth1.wav"), "--model", str(model), "--out", str(out)])
        self.assertEqual(code, 0, err)
        lines = out.read_text().strip().split("\n")
        self.assertEqual(lines[0], "seconds,label")
        self.assertGreater(len(lines), 1)
        label = lines[1].split(",")[1]
        self.assertIn(label, ["lo", "hi", "mid1", "mid2", "mid3", "composite"])

    def test_training_is_deterministic(self):
        """Test that two identical training runs write identical models."""
        outputs = []
        for name in ("first.bin", "second.bin"):
            model = self.dir / name
            code, err = run(["train", str(self.corpus / "manifest.csv"), "--model-out", str(model)] + SMALL_FLAGS)
            self.assertEqual(code, 0, err)
            outputs.append((model.read_bytes(), Path(f"{model}.history.csv").read_bytes()))
        self.assertEqual(outputs[0], outputs[1])

    def test_transcribe_silence_writes_header_only(self):
        """Test that transcribing silence writes only the header."""
        model = self.dir / "silent_model.bin"
        save_network(model, init_network(build_architecture([1200, 6]), seed=0), FeatureConfig(decimate=10))
        wav = self.dir / "silence.wav"
        write_wav(wav, AudioClip(np.zeros(48000), 48000))
        out = self.dir / "silence.csv"

        code, err = run(["transcribe", str(wav), "--model", str(model), "--out", str(out)])
        self.assertEqual(code, 0, err)
        self.assertEqual(out.read_text(), "seconds,label\n")

    def test_eval_onsets_report(self):
        """Test the onset evaluation report."""
        out = self.dir / "onsets.csv"
        code, err = run(["eval-onsets", str(self.corpus / "manifest.csv"), "--out", str(out)])
        self.assertEqual(code, 0, err)
        lines = out.read_text().strip().split("\n")
        self.assertTrue(lines[0].startswith("recording,truth,detected,matched"))
        self.assertEqual(len(lines), 3)
        self.assertEqual(lines[1].split(",")[1], "24")

    def test_augment_writes_shifted_copies(self):
        """Test that augment writes one shifted copy per shift."""
        out_dir = self.dir / "shifted"
        code, err = run(["augment", str(self.corpus / "manifest.csv"), "--out-dir", str(out_dir), "--shifts", "-1,1"])
        self.assertEqual(code, 0, err)
        names = sorted(e.name for e in load_manifest(out_dir / "manifest.csv"))
        self.assertEqual(names, ["synth1_s+1", "synth1_s-1", "synth2_s+1", "synth2_s-1"])

    def test_train_weighted_logs_class_weights(self):
        """Test that --weighted trains with inverse-frequency class weights."""
        model = self.dir / "weighted.bin"
        with self.assertLogs("src.cli", level="INFO") as logs:
            code, err = run(
                ["train", str(self.corpus / "manifest.csv"), "--model-out", str(model), "--weighted"]
                + SMALL_FLAGS
            )
        self.assertEqual(code, 0, err)
        self.assertTrue(any("Class weights" in line for line in logs.output))
        self.assertTrue(model.exists())

    def test_train_balanced_subsamples_each_class(self):
        """Test that --balanced N trains on N strokes of every class."""
        model = self.dir / "balanced.bin"
        with self.assertLogs("src.cli", level="INFO") as logs:
            code, err = run(
                ["train", str(self.corpus / "manifest.csv"), "--model-out", str(model), "--balanced", "2"]
                + SMALL_FLAGS
            )
        self.assertEqual(code, 0, err)
        counts = [line for line in logs.output if "Training counts" in line][0]
        for name in ("lo", "hi", "mid1", "mid2", "mid3", "composite"):
            self.assertIn(f"'{name}': 2", counts)

    def test_train_holdout_leaves_composition_out(self):
        """Test that --holdout drops one composition before feature extraction."""
        model = self.dir / "holdout.bin"
        cache = self.dir / "holdout_features.bin"
        code, err = run(
            ["train", str(self.corpus / "manifest.csv"), "--model-out", str(model),
             "--holdout", "synth2", "--features-out", str(cache)]
            + SMALL_FLAGS
        )
        self.assertEqual(code, 0, err)
        rows, labels = load_feature_cache(cache)
        self.assertEqual(rows.shape, (24, 1200))
        self.assertEqual(len(labels), 24)

        code, err = run(
            ["train", str(self.corpus / "manifest.csv"), "--model-out", str(model), "--holdout", "synth9"]
            + SMALL_FLAGS
        )
        self.assertEqual(code, 2)
        self.assertIn("synth9", err)

    def test_train_from_feature_cache_matches_manifest(self):
        """Test that training from a feature cache file gives the same model as the manifest."""
        cache = self.dir / "all_features.bin"
        direct, cached = self.dir / "direct.bin", self.dir / "cached.bin"
        code, err = run(
            ["train", str(self.corpus / "manifest.csv"), "--model-out", str(direct), "--features-out", str(cache)]
            + SMALL_FLAGS
        )
        self.assertEqual(code, 0, err)
        code, err = run(["train", "--features-in", str(cache), "--model-out", str(cached)] + SMALL_FLAGS)
        self.assertEqual(code, 0, err)
        self.assertEqual(direct.read_bytes(), cached.read_bytes())

    def test_feature_cache_width_must_match(self):
        """Test that a cache file of the wrong width is rejected."""
        cache = self.dir / "narrow.bin"
        save_feature_cache(cache, np.zeros((6, 40), dtype=np.float32), list(range(6)))
        code, err = run(["baseline", "--features-in", str(cache), "--decimate", "10"])
        self.assertEqual(code, 2)
        self.assertIn("40-bin", err)

    def test_missing_manifest_and_cache(self):
        """Test that train needs a manifest or a feature cache file."""
        code, err = run(["train", "--model-out", str(self.dir / "none.bin")] + SMALL_FLAGS)
        self.assertEqual(code, 2)
        self.assertIn("--features-in", err)

    def test_experiment_reports_seen_and_held_out(self):
        """Test a one-row invariance grid report from the command line."""
        out = self.dir / "grid.csv"
        with patch("sys.stdout", new_callable=io.StringIO):
            code, err = run(
                ["experiment", str(self.corpus / "manifest.csv"), "--grid", ":1", "--out", str(out)]
                + SMALL_FLAGS
            )
        self.assertEqual(code, 0, err)
        lines = out.read_text().strip().split("\n")
        header = lines[0].split(",")
        self.assertIn("seen_accuracy", header)
        self.assertIn("held_out_accuracy", header)
        self.assertEqual(len(lines), 2)
        row = dict(zip(header, lines[1].split(",")))
        self.assertNotEqual(row["held_out_accuracy"], "nan")
        self.assertGreaterEqual(float(row["seen_accuracy"]), 0.0)

    def test_onset_flags_reach_the_detector(self):
        """Test that the peak-picking flags override the defaults."""
        args = build_parser().parse_args([
            "eval-onsets", "m.csv", "--window", "1024", "--hop", "240", "--pre", "2",
            "--post", "4", "--delta-ratio", "0.2", "--wait", "5", "--merge-threshold", "0.05",
        ])
        settings = settings_from_args(args)
        self.assertEqual(
            onset_config_from(settings),
            OnsetConfig(window=1024, hop=240, pre=2, post=4, delta_ratio=0.2, wait=5),
        )
        self.assertEqual(settings["merge_threshold"], 0.05)

        model = self.dir / "flags_model.bin"
        save_network(model, init_network(build_architecture([1200, 6]), seed=0), FeatureConfig(decimate=10))
        out = self.dir / "no_onsets.csv"
        code, err = run([
            "transcribe", str(self.corpus / "synth1.wav"), "--model", str(model),
            "--out", str(out), "--delta-ratio", "1.5",
        ])
        self.assertEqual(code, 0, err)
        self.assertEqual(out.read_text(), "seconds,label\n")

    def test_synth_from_recipe_file(self):
        """Test that synth --recipes reproduces a corpus from its recipe JSON."""
        out_dir = self.dir / "from_recipes"
        code, err = run([
            "synth", "--out-dir", str(out_dir), "--strokes-per-class", "4", "--tonic", "170",
            "--recipes", str(self.corpus / "synth1.json"),
        ])
        self.assertEqual(code, 0, err)
        self.assertEqual((out_dir / "synth.wav").read_bytes(), (self.corpus / "synth1.wav").read_bytes())
        self.assertEqual((out_dir / "synth.csv").read_text(), (self.corpus / "synth1.csv").read_text())

    def test_baseline_model_round_trip(self):
        """Test that a saved template or SVM baseline scores the same when reloaded."""
        for method in ("template", "svm"):
            model = self.dir / f"{method}.bin"
            with patch("sys.stdout", new_callable=io.StringIO) as fitted:
                code, err = run([
                    "baseline", str(self.corpus / "manifest.csv"), "--method", method,
                    "--decimate", "10", "--model-out", str(model), "--svm-epochs", "3",
                ])
            self.assertEqual(code, 0, err)
            with patch("sys.stdout", new_callable=io.StringIO) as reloaded:
                code, err = run([
                    "baseline", str(self.corpus / "manifest.csv"), "--method", method,
                    "--model-in", str(model),
                ])
            self.assertEqual(code, 0, err)
            self.assertEqual(fitted.getvalue(), reloaded.getvalue())

    def test_template_baseline(self):
        """Test the template baseline report and confusion file."""
        confusion_out = self.dir / "template_confusion.csv"
        with patch("sys.stdout", new_callable=io.StringIO) as out:
            code, err = run([
                "baseline", str(self.corpus / "manifest.csv"), "--decimate", "10",
                "--confusion-out", str(confusion_out),
            ])
        self.assertEqual(code, 0, err)
        self.assertIn("accuracy", out.getvalue())
        self.assertTrue(confusion_out.read_text().startswith("true\\predicted,lo"))


class TestErrorExits(unittest.TestCase):
    """Test error exit codes."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_empty_grid(self):
        """Test that an empty experiment grid exits with 2."""
        run(["synth", "--out-dir", str(self.dir), "--strokes-per-class", "1"])
        code, err = run(["experiment", str(self.dir / "manifest.csv"), "--grid", ";"])
        self.assertEqual(code, 2)
        self.assertIn("empty grid", err)

    def test_unknown_config_key(self):
        """Test that an unknown config key exits with 2."""
        config = self.dir / "bad.env"
        config.write_text("learning_rate=0.1\n")
        code, err = run(["synth", "--out-dir", str(self.dir), "--config", str(config)])
        self.assertEqual(code, 2)
        self.assertIn("learning_rate", err)

    def test_malformed_manifest(self):
        """Test that a malformed manifest exits with 3."""
        manifest = self.dir / "manifest.csv"
        manifest.write_text("only_one_field.wav\n")
        code, _ = run(["eval-onsets", str(manifest)])
        self.assertEqual(code, 3)

    def test_not_a_model_file(self):
        """Test that a non-model file exits with 4."""
        model = self.dir / "junk.bin"
        model.write_bytes(b"JUNKJUNKJUNK")
        wav = self.dir / "a.wav"
        write_wav(wav, AudioClip(np.zeros(4800), 48000))
        code, _ = run(["transcribe", str(wav), "--model", str(model)])
        self.assertEqual(code, 4)

    def test_bad_log_level(self):
        """Test that an unknown log level exits with 2."""
        code, _ = run(["synth", "--out-dir", str(self.dir), "--log-level", "LOUD"])
        self.assertEqual(code, 2)


if __name__ == "__main__":
    unittest.main()
