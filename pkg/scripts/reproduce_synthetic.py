#!/usr/bin/env python3
"""
Mridangam Stroke Transcriber - Synthetic Reproduction Runs

Runs the desk-scale checks end to end on generated corpora:
- Reference classifier parameter counts
- Neural transcription accuracy on a 600-stroke corpus
- Template baseline ordering against the neural classifier
- Tonic-invariance direction with +/-1, +/-2 semitone augmentation
- Byte-identical model files from repeated seeded training

Usage: python scripts/reproduce_synthetic.py [--out-dir runs/] [--skip-invariance]
"""

import argparse
import sys
import tempfile
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.augment import build_augmented_dataset
from src.baselines import template_classify_batch
from src.dataset_io import Recording, split_train_val
from src.experiments import ExperimentConfig, parse_grid, run_invariance_grid, train_classifier
from src.features import FeatureConfig, compute_templates
from src.model_store import save_network
from src.nn import TrainConfig, accuracy, build_architecture, param_count, reference_architecture
from src.synth import SynthCorpusSpec, generate_corpus

FEATURES = FeatureConfig(decimate=10)
EXPECTED_PARAMS = [180_015_000, 135_009_000, 40_504_500, 6_751_500, 675_450, 45_100, 606]


def synth_recording(name: str, seed: int, tonic: float) -> Recording:
    clip, annotations = generate_corpus(SynthCorpusSpec(tonic_hz=tonic, strokes_per_class=100, seed=seed))
    return Recording(name, clip, tuple(annotations))


def scaled_config(seed: int) -> ExperimentConfig:
    return ExperimentConfig(
        train=TrainConfig(epochs=25, learning_rate=0.0002, batch_size=32, seed=seed),
        features=FEATURES,
        architecture=tuple(build_architecture([1200, 256, 64, 6], dropout=0.25)),
        seed=seed,
    )


def check_param_counts() -> bool:
    print("🔍 Checking reference classifier parameter counts...")
    counts = [param_count(spec) for spec in reference_architecture()]
    if counts != EXPECTED_PARAMS:
        print(f"❌ Parameter counts {counts} differ from {EXPECTED_PARAMS}")
        return False
    print(f"✅ {len(counts)} layers, {sum(counts):,} parameters")
    return True


def check_transcription(tonic: float, seed: int) -> bool:
    print(f"🔍 Training on a 600-stroke synthetic corpus at {tonic:.0f} Hz...")
    start = time.time()
    dataset = build_augmented_dataset([synth_recording("synth", seed, tonic)], [0], FEATURES)
    train_set, test_set = split_train_val(dataset, 0.8, seed)
    net, history = train_classifier(train_set, scaled_config(seed))
    neural = accuracy(net, test_set)

    templates = compute_templates(train_set.features, train_set.labels)
    template = float((template_classify_batch(templates, test_set.features) == test_set.labels).mean())

    print(f"   neural accuracy   {neural:.3f} (best epoch {history.best_epoch + 1})")
    print(f"   template accuracy {template:.3f}")
    print(f"   took {time.time() - start:.0f}s")

    ok = True
    if neural < 0.95:
        print("❌ Neural accuracy below 0.95")
        ok = False
    if not 0.4 < template < neural:
        print("❌ Template accuracy should sit between 0.4 and the neural accuracy")
        ok = False
    if ok:
        print("✅ Transcription and baseline ordering look good")
    return ok


def check_invariance(tonic: float, seed: int) -> bool:
    print("🔍 Running the tonic-invariance comparison (+/-2 semitone test set)...")
    recordings = [synth_recording("first", seed + 1, tonic), synth_recording("second", seed + 2, tonic)]
    report = run_invariance_grid(recordings, parse_grid(":-2,2;-2,-1,1,2:-2,2"), scaled_config(seed))
    print(report.format())

    plain, augmented = report.results
    gain = augmented.held_out_accuracy - plain.held_out_accuracy
    if gain < 0.05:
        print(f"❌ Augmentation gained {gain:+.3f} on the held-out composition (need +0.05)")
        return False
    print(f"✅ Augmentation gained {gain:+.3f} on the held-out composition")
    return True


def check_determinism(tonic: float, seed: int, out_dir: Path) -> bool:
    print("🔍 Training twice with the same seed...")
    dataset = build_augmented_dataset([synth_recording("synth", seed, tonic)], [0], FEATURES)
    config = scaled_config(seed)
    blobs = []
    for run in ("a", "b"):
        net, history = train_classifier(dataset, config)
        path = out_dir / f"determinism_{run}.bin"
        save_network(path, net, FEATURES)
        blobs.append((path.read_bytes(), history.to_csv()))
    if blobs[0] != blobs[1]:
        print("❌ Repeated training produced different model files or histories")
        return False
    print("✅ Model files and histories are byte-identical")
    return True


def main():
    """Run every reproduction step and exit nonzero if any fails."""
    parser = argparse.ArgumentParser(description="Synthetic reproduction runs")
    parser.add_argument("--out-dir", help="Where to keep model files (default: a temp dir)")
    parser.add_argument("--tonic", type=float, default=160.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--skip-invariance", action="store_true", help="Skip the slowest step")
    args = parser.parse_args()

    print("🚀 MRIDANGAM SYNTHETIC REPRODUCTION")
    print("=" * 50)

    try:
        with tempfile.TemporaryDirectory() as tmp:
            out_dir = Path(args.out_dir or tmp)
            out_dir.mkdir(parents=True, exist_ok=True)

            results = [
                check_param_counts(),
                check_transcription(args.tonic, args.seed),
            ]
            if not args.skip_invariance:
                results.append(check_invariance(args.tonic, args.seed))
            results.append(check_determinism(args.tonic, args.seed, out_dir))

    except KeyboardInterrupt:
        print("\n⚠️ Interrupted by user")
        sys.exit(1)
    except Exception as e:
        print(f"\n❌ Reproduction failed with error: {e}")
        sys.exit(1)

    print("\n" + "=" * 50)
    if all(results):
        print("🎉 ALL CHECKS PASSED")
    else:
        print(f"❌ {results.count(False)} CHECK(S) FAILED")
        sys.exit(1)


if __name__ == "__main__":
    main()
