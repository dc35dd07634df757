"""
Mridangam Stroke Transcriber - Feature Extraction Module

Turns each stroke into a fixed-length DFT magnitude vector: the window runs
from 0.03 s before the stroke's onset to 0.03 s before the next onset, is
zero-padded to 48,000 samples, and the magnitudes of bins 0..11,999
(1 Hz spacing at 48 kHz) form the feature vector. Also builds per-class
template spectra and reads/writes the binary feature cache.
"""

import logging
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from src.dataset_io import NUM_CLASSES, AudioClip, StrokeLabel

logger = logging.getLogger(__name__)

CACHE_MAGIC = b"MRFC"
CACHE_VERSION = 1


class FeatureError(Exception):
    """Raised when a stroke window or feature set is invalid."""

    pass


@dataclass(frozen=True)
class FeatureConfig:
    """
    Stroke spectrum settings.

    `decimate` block-averages groups of bins (10 turns 12,000 bins into
    1,200); `normalize` scales each vector to unit maximum.
    """

    pre_onset: float = 0.03
    fft_size: int = 48000
    num_bins: int = 12000
    last_window: float = 1.0
    normalize: bool = False
    decimate: int = 1

    @property
    def dim(self) -> int:
        return self.num_bins // self.decimate

    def validate(self) -> None:
        if self.num_bins > self.fft_size // 2 + 1:
            raise FeatureError(f"num_bins {self.num_bins} exceeds the one-sided spectrum of {self.fft_size}")
        if self.decimate < 1 or self.num_bins % self.decimate:
            raise FeatureError(f"decimate {self.decimate} must divide num_bins {self.num_bins}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TemplateSet:
    """Per-class mean feature vectors with the number of examples behind each."""

    templates: np.ndarray
    counts: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.templates.shape[0]

    @property
    def dim(self) -> int:
        return self.templates.shape[1]


DEFAULT_FEATURES = FeatureConfig()


def stroke_window(
    clip: AudioClip,
    onset: float,
    next_onset: Optional[float] = None,
    config: FeatureConfig = DEFAULT_FEATURES,
) -> Tuple[int, int]:
    """
    Sample range [start, end) of a stroke's analysis window.

    Raises:
        FeatureError: If the window is empty
    """
    if next_onset is not None and next_onset <= onset:
        raise FeatureError(f"Empty window: next onset {next_onset} is not after onset {onset}")

    sr = clip.sample_rate
    start = max(0, int(round((onset - config.pre_onset) * sr)))
    if next_onset is None:
        end = int(round((onset - config.pre_onset + config.last_window) * sr))
    else:
        end = int(round((next_onset - config.pre_onset) * sr))
    end = min(end, len(clip), start + config.fft_size)

    if end <= start:
        raise FeatureError(f"Empty window for onset {onset:.4f}s (samples {start}..{end})")
    return start, end


def full_spectrum(window: np.ndarray, fft_size: int = 48000) -> np.ndarray:
    """All fft_size DFT magnitudes of the zero-padded window."""
    return np.abs(np.fft.fft(window, n=fft_size))


def postprocess(magnitudes: np.ndarray, config: FeatureConfig) -> np.ndarray:
    """Apply decimation and optional unit-max normalization to raw bin magnitudes."""
    if config.decimate > 1:
        magnitudes = magnitudes.reshape(*magnitudes.shape[:-1], -1, config.decimate).mean(axis=-1)
    if config.normalize:
        peak = magnitudes.max(axis=-1, keepdims=True)
        magnitudes = np.divide(magnitudes, peak, out=np.zeros_like(magnitudes), where=peak > 0)
    return magnitudes


def extract_stroke_spectrum(
    clip: AudioClip,
    onset: float,
    next_onset: Optional[float] = None,
    config: FeatureConfig = DEFAULT_FEATURES,
) -> np.ndarray:
    """
    Feature vector of one stroke.

    Args:
        clip: 48 kHz audio
        onset: Stroke onset in seconds
        next_onset: Following onset, or None for the last stroke
        config: Feature settings

    Returns:
        Non-negative vector of config.dim magnitudes
    """
    start, end = stroke_window(clip, onset, next_onset, config)
    spectrum = np.abs(np.fft.rfft(clip.samples[start:end], n=config.fft_size))
    return postprocess(spectrum[: config.num_bins], config)


def extract_all(
    clip: AudioClip, onsets: Sequence[float], config: FeatureConfig = DEFAULT_FEATURES
) -> np.ndarray:
    """
    Feature matrix with one row per onset.

    Raises:
        FeatureError: If onsets are not sorted ascending
    """
    config.validate()
    onsets = list(onsets)
    if any(b < a for a, b in zip(onsets, onsets[1:])):
        raise FeatureError("Onsets must be sorted ascending")

    rows = np.zeros((len(onsets), config.dim), dtype=np.float64)
    for i, onset in enumerate(onsets):
        following = onsets[i + 1] if i + 1 < len(onsets) else None
        rows[i] = extract_stroke_spectrum(clip, onset, following, config)
    return rows


def compute_templates(
    features: np.ndarray, labels: Sequence[int], num_classes: int = NUM_CLASSES
) -> TemplateSet:
    """
    Elementwise mean feature vector of every class.

    Raises:
        FeatureError: On length mismatch or a class with no examples
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(features) != len(labels):
        raise FeatureError(f"{len(features)} features but {len(labels)} labels")

    counts = np.bincount(labels, minlength=num_classes)
    for c, n in enumerate(counts):
        if n == 0:
            name = StrokeLabel(c).label if num_classes == NUM_CLASSES else str(c)
            raise FeatureError(f"No examples of class '{name}' to build a template from")

    templates = np.stack([features[labels == c].mean(axis=0) for c in range(num_classes)])
    return TemplateSet(templates, counts)


# =============================================================================
# FEATURE CACHE FILE
# =============================================================================


def save_feature_cache(
    path: Union[str, Path], features: np.ndarray, labels: Sequence[int]
) -> None:
    """Write features as little-endian float32 rows plus one label byte per row."""
    features = np.asarray(features)
    labels = np.asarray(labels, dtype=np.uint8)
    count, dim = features.shape
    with open(path, "wb") as f:
        f.write(CACHE_MAGIC)
        f.write(struct.pack("<HII", CACHE_VERSION, count, dim))
        f.write(features.astype("<f4").tobytes(order="C"))
        f.write(labels.tobytes())
    logger.info(f"💾 Wrote {count} feature rows ({dim} bins) to {path}")


def load_feature_cache(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Read a feature cache file.

    Raises:
        FeatureError: On a bad header or truncated data
    """
    data = Path(path).read_bytes()
    header_size = 4 + struct.calcsize("<HII")
    if len(data) < header_size or data[:4] != CACHE_MAGIC:
        raise FeatureError(f"{path} is not a feature cache file")

    version, count, dim = struct.unpack("<HII", data[4:header_size])
    if version != CACHE_VERSION:
        raise FeatureError(f"{path}: unsupported feature cache version {version}")

    body = header_size + count * dim * 4
    if len(data) != body + count:
        raise FeatureError(f"{path}: truncated feature cache ({len(data)} bytes)")

    features = np.frombuffer(data, dtype="<f4", count=count * dim, offset=header_size)
    labels = np.frombuffer(data, dtype=np.uint8, count=count, offset=body)
    return features.reshape(count, dim).astype(np.float32), labels.astype(np.int64)
