"""
Mridangam Stroke Transcriber - Command Line Interface

Single entry point with one subcommand per pipeline stage:

    python -m src.cli transcribe recording.wav --model model.bin --out strokes.csv
    python -m src.cli train manifest.csv --model-out model.bin --shifts -1,1
    python -m src.cli augment manifest.csv --shifts -2,-1,1,2 --out-dir shifted/
    python -m src.cli eval-onsets manifest.csv
    python -m src.cli synth --out-dir corpus/ --tonic 160
    python -m src.cli experiment manifest.csv --mode invariance
    python -m src.cli baseline manifest.csv --method template

Settings resolve as flag > config file (--config) > MRIDANGAM_<KEY>
environment variable > built-in default.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from src.augment import OnsetSource, augment_recording, build_augmented_dataset, shift_suffix
from src.baselines import svm_predict_batch, svm_train, template_classify_batch
from src.config import ConfigurationError, resolve_settings
from src.dataset_io import (
    Annotation,
    LabeledDataset,
    Recording,
    StrokeLabel,
    balance_dataset,
    compute_class_weights,
    describe_counts,
    format_annotations,
    load_manifest,
    load_recordings,
    load_wav,
    split_train_val,
    write_annotations,
    write_wav,
)
from src.evaluation import OnsetMatchReport, confusion, format_confusion, format_metrics, match_onsets, metrics
from src.experiments import (
    DEFAULT_INVARIANCE_GRID,
    ExperimentConfig,
    parse_grid,
    run_imbalance_comparison,
    run_invariance_grid,
)
from src.features import (
    FeatureConfig,
    compute_templates,
    extract_all,
    load_feature_cache,
    save_feature_cache,
)
from src.model_store import (
    load_network,
    load_svm,
    load_templates,
    save_network,
    save_svm,
    save_templates,
)
from src.nn.layers import (
    REFERENCE_DIMS,
    LayerSpec,
    NetworkError,
    build_architecture,
    reference_architecture,
    parse_dims,
)
from src.nn.network import predict_batch
from src.nn.training import TrainConfig, train
from src.onset import OnsetConfig, detect_onsets
from src.services.error_service import ErrorService
from src.synth import (
    SynthCorpusSpec,
    default_recipes,
    generate_corpus,
    recipes_from_json,
    recipes_to_json,
)

logger = logging.getLogger(__name__)

# =============================================================================
# SETTINGS HELPERS
# =============================================================================


def parse_shifts(text: str) -> List[int]:
    """Comma-separated semitone shifts, e.g. '-2,-1,1,2'."""
    try:
        return [int(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise ConfigurationError(f"Shifts must be comma-separated integers, got '{text}'") from None


def settings_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    return resolve_settings(vars(args), getattr(args, "config", None))


def feature_config_from(settings: Dict[str, Any]) -> FeatureConfig:
    config = FeatureConfig(normalize=bool(settings["normalize"]), decimate=int(settings["decimate"]))
    config.validate()
    return config


def onset_config_from(settings: Dict[str, Any]) -> OnsetConfig:
    config = OnsetConfig(
        window=settings["window"],
        hop=settings["hop"],
        pre=settings["pre"],
        post=settings["post"],
        delta_ratio=settings["delta_ratio"],
        wait=settings["wait"],
    )
    config.validate()
    return config


def train_config_from(settings: Dict[str, Any], class_weights=None) -> TrainConfig:
    return TrainConfig(
        epochs=settings["epochs"],
        learning_rate=settings["lr"],
        batch_size=settings["batch_size"],
        patience=settings["patience"],
        class_weights=class_weights,
        seed=settings["seed"],
    )


def architecture_from(settings: Dict[str, Any], feature_dim: int) -> List[LayerSpec]:
    """
    Raises:
        ConfigurationError: If the first layer width differs from the feature width
    """
    dims = parse_dims(settings["arch"])
    if not dims or dims[0] != feature_dim:
        raise ConfigurationError(
            f"Architecture {settings['arch']} does not start at the feature width {feature_dim}; "
            f"with --decimate {settings['decimate']} use e.g. --arch {feature_dim},256,64,6"
        )
    if tuple(dims) == REFERENCE_DIMS:
        return reference_architecture(settings["dropout"])
    return build_architecture(dims, dropout=settings["dropout"])


def onset_source_from(settings: Dict[str, Any]) -> OnsetSource:
    try:
        return OnsetSource(str(settings["onset_source"]).lower())
    except ValueError:
        choices = ", ".join(s.value for s in OnsetSource)
        raise ConfigurationError(
            f"onset_source must be one of {choices}, got '{settings['onset_source']}'"
        ) from None


def experiment_config_from(settings: Dict[str, Any], holdout: Optional[str] = None) -> ExperimentConfig:
    features = feature_config_from(settings)
    return ExperimentConfig(
        train=train_config_from(settings),
        features=features,
        architecture=tuple(architecture_from(settings, features.dim)),
        dropout=settings["dropout"],
        onset_source=onset_source_from(settings),
        onset_config=onset_config_from(settings),
        train_fraction=settings["train_fraction"],
        seed=settings["seed"],
        holdout=holdout,
        max_workers=settings["workers"],
    )


def _load(manifest: str, settings: Dict[str, Any]) -> List[Recording]:
    return load_recordings(
        load_manifest(manifest), settings["merge_threshold"], max_workers=settings["workers"]
    )


def _build_dataset(
    recordings: Sequence[Recording], settings: Dict[str, Any], features: FeatureConfig
) -> LabeledDataset:
    shifts = sorted({0, *parse_shifts(settings["shifts"])})
    return build_augmented_dataset(
        recordings,
        shifts,
        features,
        onset_source_from(settings),
        onset_config_from(settings),
    )


def _dataset_from_args(
    args: argparse.Namespace,
    settings: Dict[str, Any],
    features: FeatureConfig,
    holdout: Optional[str] = None,
) -> LabeledDataset:
    """
    Build the labeled dataset from the manifest, or read it from --features-in.

    Writes the result to --features-out when given.

    Raises:
        ConfigurationError: On a missing source, an unknown holdout or a
            cache file whose width differs from the feature settings
    """
    if args.features_in:
        if holdout:
            raise ConfigurationError("--holdout needs a manifest; feature cache files carry no composition names")
        rows, labels = load_feature_cache(args.features_in)
        if rows.shape[1] != features.dim:
            raise ConfigurationError(
                f"{args.features_in} holds {rows.shape[1]}-bin features but the settings give {features.dim}"
            )
        dataset = LabeledDataset(rows, labels)
        logger.info(f"📂 Read {len(dataset)} feature rows from {args.features_in}")
    else:
        if not args.manifest:
            raise ConfigurationError("Give a manifest or --features-in")
        recordings = _load(args.manifest, settings)
        if holdout:
            names = [r.name for r in recordings]
            if holdout not in names:
                raise ConfigurationError(f"--holdout '{holdout}' is not in the manifest ({names})")
            recordings = [r for r in recordings if r.name != holdout]
            logger.info(f"Holding out composition '{holdout}'")
        dataset = _build_dataset(recordings, settings, features)

    if args.features_out:
        save_feature_cache(args.features_out, dataset.features, dataset.labels)
    return dataset


def _write_or_print(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
        logger.info(f"💾 Wrote {out}")
    else:
        sys.stdout.write(text)


# =============================================================================
# COMMANDS
# =============================================================================


def cmd_transcribe(args: argparse.Namespace) -> int:
    """Detect onsets, classify each stroke and write a `seconds,label` CSV."""
    settings = settings_from_args(args)
    net, features = load_network(args.model)
    if net.input_dim != features.dim:
        raise NetworkError(
            f"Model expects {net.input_dim} inputs but its feature settings give {features.dim}"
        )

    clip = load_wav(args.wav)
    onsets = detect_onsets(clip, onset_config_from(settings))
    annotations: List[Annotation] = []
    if onsets:
        labels, _ = predict_batch(net, extract_all(clip, onsets, features).astype(np.float32))
        annotations = [Annotation(t, StrokeLabel(int(c))) for t, c in zip(onsets, labels)]

    text = format_annotations(annotations, header=True)
    _write_or_print(text, args.out)
    logger.info(f"✅ Transcribed {len(annotations)} strokes from {args.wav}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    """Build the (optionally augmented) dataset, train and save the best model."""
    settings = settings_from_args(args)
    features = feature_config_from(settings)
    arch = architecture_from(settings, features.dim)

    dataset = _dataset_from_args(args, settings, features, holdout=args.holdout)
    train_set, val_set = split_train_val(dataset, settings["train_fraction"], settings["seed"])
    if args.balanced is not None:
        train_set = balance_dataset(train_set, args.balanced, settings["seed"])

    class_weights = None
    if args.weighted:
        class_weights = tuple(float(w) for w in compute_class_weights(train_set.class_counts))
        logger.info(f"Class weights: {[round(w, 4) for w in class_weights]}")

    logger.info(f"Training counts: {describe_counts(train_set.class_counts)}")
    net, history = train(train_set, val_set, arch, train_config_from(settings, class_weights))

    save_network(args.model_out, net, features)
    history_out = args.history_out or f"{args.model_out}.history.csv"
    Path(history_out).write_text(history.to_csv(), encoding="utf-8")

    if args.confusion_out:
        preds, _ = predict_batch(net, val_set.features.astype(np.float32, copy=False))
        Path(args.confusion_out).write_text(
            confusion(preds, val_set.labels).to_csv(), encoding="utf-8"
        )

    logger.info(
        f"✅ Best val_acc {history.best_val_acc:.4f} at epoch {history.best_epoch + 1}; "
        f"model saved to {args.model_out}"
    )
    return 0


def cmd_augment(args: argparse.Namespace) -> int:
    """Write pitch-shifted copies of every recording plus a manifest listing them."""
    settings = settings_from_args(args)
    shifts = [s for s in parse_shifts(settings["shifts"]) if s != 0]
    if not shifts:
        raise ConfigurationError("augment needs at least one non-zero shift (--shifts)")

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_lines = []
    for recording in _load(args.manifest, settings):
        for s in shifts:
            shifted = augment_recording(recording, s)
            stem = f"{recording.name}{shift_suffix(s)}"
            write_wav(out_dir / f"{stem}.wav", shifted.clip)
            write_annotations(out_dir / f"{stem}.csv", shifted.annotations)
            manifest_lines.append(f"{stem}.wav,{stem}.csv")

    (out_dir / "manifest.csv").write_text("\n".join(manifest_lines) + "\n", encoding="utf-8")
    logger.info(f"✅ Wrote {len(manifest_lines)} shifted recordings to {out_dir}")
    return 0


REPORT_HEADER = (
    "recording,truth,detected,matched,false_positives,missed,"
    "accuracy,precision,recall,f_measure,mean_abs_offset"
)


def _report_line(name: str, report: OnsetMatchReport) -> str:
    return (
        f"{name},{report.truth_count},{report.detected_count},{report.matched},"
        f"{report.false_positives},{report.missed},{report.accuracy:.6f},"
        f"{report.precision:.6f},{report.recall:.6f},{report.f_measure:.6f},"
        f"{report.mean_abs_offset:.6f}"
    )


def cmd_eval_onsets(args: argparse.Namespace) -> int:
    """Score the onset detector against each recording's merged annotations."""
    settings = settings_from_args(args)
    onset_config = onset_config_from(settings)
    lines = [REPORT_HEADER]
    for recording in _load(args.manifest, settings):
        detected = detect_onsets(recording.clip, onset_config)
        truth = [a.onset for a in recording.annotations]
        report = match_onsets(detected, truth, settings["tolerance"])
        logger.info(f"{recording.name}: {report.summary()}")
        lines.append(_report_line(recording.name, report))

    _write_or_print("\n".join(lines) + "\n", args.out)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    """Render synthetic compositions with exact annotations and their recipe JSON."""
    settings = settings_from_args(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.recipes:
        recipes = recipes_from_json(Path(args.recipes).read_text(encoding="utf-8"))
        logger.info(f"Using {len(recipes)} stroke recipes from {args.recipes}")
    else:
        recipes = default_recipes()

    manifest_lines = []
    for i in range(args.recordings):
        spec = SynthCorpusSpec(
            tonic_hz=args.tonic,
            strokes_per_class=args.strokes_per_class,
            inter_onset=(args.min_gap, args.max_gap),
            seed=settings["seed"] + i,
        )
        clip, annotations = generate_corpus(spec, recipes)
        stem = args.name if args.recordings == 1 else f"{args.name}{i + 1}"
        write_wav(out_dir / f"{stem}.wav", clip, subtype="PCM_24")
        write_annotations(out_dir / f"{stem}.csv", annotations)
        (out_dir / f"{stem}.json").write_text(recipes_to_json(recipes, spec), encoding="utf-8")
        manifest_lines.append(f"{stem}.wav,{stem}.csv")

    (out_dir / "manifest.csv").write_text("\n".join(manifest_lines) + "\n", encoding="utf-8")
    logger.info(f"✅ Wrote {args.recordings} synthetic recording(s) to {out_dir}")
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    """Run the tonic-invariance grid or the class-imbalance comparison."""
    settings = settings_from_args(args)
    config = experiment_config_from(settings, holdout=args.holdout)
    recordings = _load(args.manifest, settings)

    if args.mode == "invariance":
        grid = parse_grid(args.grid) if args.grid is not None else list(DEFAULT_INVARIANCE_GRID)
        report = run_invariance_grid(recordings, grid, config)
    else:
        dataset = build_augmented_dataset(
            recordings, [0], config.features, config.onset_source, config.onset_config
        )
        report = run_imbalance_comparison(dataset, config, per_class=args.per_class)

    _write_or_print(report.to_csv(), args.out)
    if args.out:
        print(report.format())
    return 0


def cmd_baseline(args: argparse.Namespace) -> int:
    """
    Fit the template or SVM baseline and score it on the validation split.

    With --model-in the saved baseline is reloaded instead of fitted, and
    its stored feature settings replace --decimate/--normalize.
    """
    settings = settings_from_args(args)
    loaded = None
    if args.model_in:
        load = load_templates if args.method == "template" else load_svm
        loaded, features = load(args.model_in)
        logger.info(f"📂 Loaded {args.method} baseline from {args.model_in}")
    else:
        features = feature_config_from(settings)

    dataset = _dataset_from_args(args, settings, features)
    train_set, val_set = split_train_val(dataset, settings["train_fraction"], settings["seed"])

    if loaded is not None:
        if loaded.dim != features.dim:
            raise NetworkError(f"Baseline expects {loaded.dim} inputs but its feature settings give {features.dim}")
        if args.method == "template":
            preds = template_classify_batch(loaded, val_set.features)
        else:
            preds = svm_predict_batch(loaded, val_set.features)
    elif args.method == "template":
        templates = compute_templates(train_set.features, train_set.labels)
        preds = template_classify_batch(templates, val_set.features)
        if args.model_out:
            save_templates(args.model_out, templates, features)
    else:
        model = svm_train(
            train_set.features,
            train_set.labels,
            epochs=args.svm_epochs,
            lr=args.svm_lr,
            reg=args.svm_reg,
            seed=settings["seed"],
        )
        preds = svm_predict_batch(model, val_set.features)
        if args.model_out:
            save_svm(args.model_out, model, features)

    cm = confusion(preds, val_set.labels)
    result = metrics(cm)
    print(format_confusion(cm))
    print(format_metrics(result))
    if args.confusion_out:
        Path(args.confusion_out).write_text(cm.to_csv(), encoding="utf-8")
    logger.info(f"✅ {args.method} baseline accuracy {result.accuracy:.4f}")
    return 0


# =============================================================================
# PARSER
# =============================================================================


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Flat key=value settings file")
    parser.add_argument("--seed", type=int, help="Random seed (default 0)")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--workers", type=int, help="Threads for loading files and grid rows")


def _add_features(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--decimate", type=int, help="Average groups of N bins (10 gives 1,200 inputs)")
    parser.add_argument(
        "--normalize", action="store_const", const=True, help="Scale each spectrum to unit maximum"
    )
    parser.add_argument(
        "--onset-source",
        choices=[s.value for s in OnsetSource],
        help="Feature onsets from annotations (default) or re-detected",
    )
    parser.add_argument("--shifts", "--augment", dest="shifts", help="Semitone shifts, e.g. -1,1")
    parser.add_argument("--train-fraction", type=float, help="Training share of the split (default 0.8)")


def _add_training(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--arch", help="Layer widths, e.g. 1200,256,64,6")
    parser.add_argument("--dropout", type=float, help="Dropout rate (default 0.25)")
    parser.add_argument("--epochs", type=int, help="Maximum epochs (default 25)")
    parser.add_argument("--lr", type=float, help="Adam learning rate (default 0.0002)")
    parser.add_argument("--batch-size", type=int, help="Mini-batch size (default 32)")
    parser.add_argument("--patience", type=int, help="Early-stopping patience (default 5)")


def _add_onset(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--window", type=int, help="STFT window in samples (default 2048)")
    parser.add_argument("--hop", type=int, help="STFT hop in samples (default 480)")
    parser.add_argument("--pre", type=int, help="Peak-picking frames before a peak (default 3)")
    parser.add_argument("--post", type=int, help="Peak-picking frames after a peak (default 3)")
    parser.add_argument(
        "--delta-ratio", type=float, help="Peak threshold over the local mean, times max(env) (default 0.07)"
    )
    parser.add_argument("--wait", type=int, help="Minimum frames between onsets (default 3)")


def _add_manifest(parser: argparse.ArgumentParser, optional: bool = False) -> None:
    parser.add_argument("manifest", nargs="?" if optional else None)
    parser.add_argument(
        "--merge-threshold", type=float, help="Merge strokes closer than this into composites (default 0.03 s)"
    )


def _add_feature_files(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--features-in", help="Read features and labels from a feature cache file")
    parser.add_argument("--features-out", help="Write the extracted features to a feature cache file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mridangam",
        description="Mridangam stroke transcription: onsets, features, classifiers and experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transcribe", help="Transcribe a WAV file into seconds,label lines")
    p.add_argument("wav")
    p.add_argument("--model", required=True, help="Trained network file")
    p.add_argument("--out", help="Output CSV (default: stdout)")
    _add_common(p)
    _add_onset(p)
    p.set_defaults(func=cmd_transcribe)

    p = sub.add_parser("train", help="Train the neural classifier")
    _add_manifest(p, optional=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--history-out", help="Per-epoch CSV (default: <model-out>.history.csv)")
    p.add_argument("--confusion-out", help="Validation confusion matrix CSV")
    p.add_argument("--weighted", action="store_true", help="Inverse-frequency class weights in the loss")
    p.add_argument("--balanced", type=int, metavar="N", help="Train on N strokes per class")
    p.add_argument("--holdout", help="Composition to leave out of training")
    _add_common(p)
    _add_features(p)
    _add_feature_files(p)
    _add_onset(p)
    _add_training(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("augment", help="Write pitch-shifted copies of a dataset")
    _add_manifest(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--shifts", "--augment", dest="shifts", help="Semitone shifts, e.g. -2,-1,1,2")
    _add_common(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("eval-onsets", help="Score onset detection against annotations")
    _add_manifest(p)
    p.add_argument("--tolerance", type=float, help="Match tolerance in seconds (default 0.015)")
    p.add_argument("--out", help="Output CSV (default: stdout)")
    _add_common(p)
    _add_onset(p)
    p.set_defaults(func=cmd_eval_onsets)

    p = sub.add_parser("synth", help="Generate a synthetic labeled corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--name", default="synth")
    p.add_argument("--tonic", type=float, default=160.0, help="Tonic in Hz (default 160)")
    p.add_argument("--strokes-per-class", type=int, default=100)
    p.add_argument("--min-gap", type=float, default=0.15, help="Minimum inter-onset gap (s)")
    p.add_argument("--max-gap", type=float, default=0.35, help="Maximum inter-onset gap (s)")
    p.add_argument("--recordings", type=int, default=1, help="Number of compositions to render")
    p.add_argument("--recipes", help="Stroke recipe JSON, e.g. one written by an earlier synth run")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("experiment", help="Tonic-invariance grid or class-imbalance comparison")
    _add_manifest(p)
    p.add_argument("--mode", choices=["invariance", "imbalance"], default="invariance")
    p.add_argument("--grid", help="Rows 'train:test' separated by ';', e.g. ':-1,1;-1,1:-2,2'")
    p.add_argument("--holdout", help="Composition held out for the held-out column")
    p.add_argument("--per-class", type=int, default=400, help="Balanced variant size per class")
    p.add_argument("--out", help="Report CSV (default: stdout)")
    _add_common(p)
    _add_features(p)
    _add_onset(p)
    _add_training(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("baseline", help="Template-correlation or linear SVM baseline")
    _add_manifest(p, optional=True)
    p.add_argument("--method", choices=["template", "svm"], default="template")
    p.add_argument("--model-in", help="Score a saved template or SVM file instead of fitting one")
    p.add_argument("--model-out", help="Save the fitted templates or SVM")
    p.add_argument("--confusion-out", help="Validation confusion matrix CSV")
    p.add_argument("--svm-epochs", type=int, default=20)
    p.add_argument("--svm-lr", type=float, default=0.01)
    p.add_argument("--svm-reg", type=float, default=1e-4)
    _add_common(p)
    _add_features(p)
    _add_feature_files(p)
    _add_onset(p)
    p.set_defaults(func=cmd_baseline)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run the subcommand and map errors to exit codes."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        if args.log_level:
            level = args.log_level.upper()
            if not isinstance(logging.getLevelName(level), int):
                raise ConfigurationError(f"Unknown log level '{args.log_level}'")
            logging.getLogger().setLevel(level)
        return args.func(args)
    except KeyboardInterrupt:
        print("\n⏹️ Interrupted", file=sys.stderr)
        return 130
    except Exception as e:
        return ErrorService.handle_error(e, args.command)


if __name__ == "__main__":
    sys.exit(main())
