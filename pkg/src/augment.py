"""
Mridangam Stroke Transcriber - Pitch-Shift Augmentation Module

Resampling-based pitch shift (pitch and tempo change together), matching
annotation time scaling, and the builder that pools features from every
(recording, shift) pair into one labeled dataset.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence

import numpy as np
from scipy.signal import resample

from src.cache import FeatureCache
from src.dataset_io import AudioClip, Annotation, LabeledDataset, Recording
from src.evaluation import ONSET_TOLERANCE, match_onsets
from src.features import DEFAULT_FEATURES, FeatureConfig, extract_all
from src.onset import OnsetConfig, detect_onsets

logger = logging.getLogger(__name__)

MAX_SEMITONES = 12
GRID_SEMITONES = 3


class AugmentError(Exception):
    """Raised on invalid shift requests."""

    pass


class OnsetSource(Enum):
    """Where stroke onsets come from when building a dataset."""

    ANNOTATIONS = "annotations"  # scaled manual annotations
    DETECTED = "detected"  # re-run onset detection on the shifted audio


@dataclass(frozen=True)
class ShiftSpec:
    """A semitone shift within the experiment range of +/-3."""

    semitones: int

    def __post_init__(self):
        if not -GRID_SEMITONES <= self.semitones <= GRID_SEMITONES:
            raise AugmentError(
                f"Shift {self.semitones} outside [-{GRID_SEMITONES}, {GRID_SEMITONES}] semitones"
            )

    @property
    def rate_factor(self) -> float:
        return rate_factor(self.semitones)


def rate_factor(semitones: int) -> float:
    return 2.0 ** (semitones / 12.0)


def pitch_shift(clip: AudioClip, semitones: int) -> AudioClip:
    """
    Shift pitch by resampling: every component at f Hz moves to f * 2^(s/12)
    and the duration scales by 2^(-s/12).

    Raises:
        AugmentError: If |semitones| > 12
    """
    if abs(semitones) > MAX_SEMITONES:
        raise AugmentError(f"Shift of {semitones} semitones exceeds +/-{MAX_SEMITONES}")
    if semitones == 0:
        return clip

    new_length = int(round(len(clip) / rate_factor(semitones)))
    shifted = resample(clip.samples, new_length)
    overshoot = int(np.count_nonzero(np.abs(shifted) > 1.0))
    if overshoot:
        logger.debug(
            f"Clipped {overshoot} samples of a {semitones:+d} semitone shift (peak {np.abs(shifted).max():.4f})"
        )
    return AudioClip(np.clip(shifted, -1.0, 1.0), clip.sample_rate)


def scale_annotations(annotations: Sequence[Annotation], semitones: int) -> List[Annotation]:
    """Rescale onset times by 2^(-s/12); labels and order unchanged."""
    if semitones == 0:
        return list(annotations)
    factor = 1.0 / rate_factor(semitones)
    return [Annotation(a.onset * factor, a.label) for a in annotations]


def augment_recording(recording: Recording, semitones: int) -> Recording:
    """Pitch-shifted copy of a recording with matching annotations."""
    return Recording(
        name=recording.name,
        clip=pitch_shift(recording.clip, semitones),
        annotations=tuple(scale_annotations(recording.annotations, semitones)),
    )


def shift_suffix(semitones: int) -> str:
    return f"_s{semitones:+d}"


def _recording_features(
    recording: Recording,
    semitones: int,
    feature_config: FeatureConfig,
    onset_source: OnsetSource,
    onset_config: Optional[OnsetConfig],
) -> LabeledDataset:
    shifted = augment_recording(recording, semitones)
    truth_times = [a.onset for a in shifted.annotations]
    truth_labels = [int(a.label) for a in shifted.annotations]

    if onset_source is OnsetSource.DETECTED:
        detected = detect_onsets(shifted.clip, onset_config)
        report = match_onsets(detected, truth_times, ONSET_TOLERANCE)
        features = extract_all(shifted.clip, detected, feature_config)
        rows = [di for _, di in report.pairs]
        labels = [truth_labels[ti] for ti, _ in report.pairs]
        features = features[rows] if rows else np.zeros((0, feature_config.dim))
        if report.false_positives:
            logger.info(
                f"{recording.name}{shift_suffix(semitones)}: dropped "
                f"{report.false_positives} unmatched detections"
            )
    else:
        features = extract_all(shifted.clip, truth_times, feature_config)
        labels = truth_labels

    n = len(labels)
    return LabeledDataset(
        features=np.asarray(features, dtype=np.float32).reshape(n, feature_config.dim),
        labels=np.asarray(labels, dtype=np.int64),
        groups=np.array([recording.name] * n, dtype=object),
        shifts=np.full(n, semitones, dtype=np.int64),
    )


def build_augmented_dataset(
    recordings: Sequence[Recording],
    shifts: Iterable[int],
    feature_config: FeatureConfig = DEFAULT_FEATURES,
    onset_source: OnsetSource = OnsetSource.ANNOTATIONS,
    onset_config: Optional[OnsetConfig] = None,
    cache: Optional[FeatureCache] = None,
) -> LabeledDataset:
    """
    Pool features from every recording at every shift.

    Args:
        recordings: Loaded recordings (annotations already merged)
        shifts: Distinct semitone shifts; include 0 for the original pitch
        feature_config: Feature settings
        onset_source: Scaled annotations (default) or re-detected onsets
        onset_config: Detector settings for OnsetSource.DETECTED
        cache: Optional memo shared across calls

    Raises:
        AugmentError: On duplicate shifts or an empty shift set
    """
    shifts = list(shifts)
    if not shifts:
        raise AugmentError("No shifts requested")
    if len(set(shifts)) != len(shifts):
        raise AugmentError(f"Duplicate shifts in {shifts}")
    for s in shifts:
        if abs(s) > MAX_SEMITONES:
            raise AugmentError(f"Shift of {s} semitones exceeds +/-{MAX_SEMITONES}")

    parts = []
    for recording in recordings:
        for s in shifts:
            def compute(rec=recording, semitones=s):
                return _recording_features(rec, semitones, feature_config, onset_source, onset_config)

            if cache is None:
                parts.append(compute())
            else:
                key = (recording.name, s, onset_source.value, feature_config, onset_config)
                parts.append(cache.get_or_compute(key, compute))

    if not any(len(p) for p in parts):
        return LabeledDataset.empty(feature_config.dim)

    dataset = LabeledDataset.concat(parts)
    logger.info(
        f"Built dataset of {len(dataset)} strokes from {len(recordings)} recordings x shifts {shifts}"
    )
    return dataset
