"""
Mridangam Stroke Transcriber - Dataset I/O Module

This module loads audio and annotation files, applies the composite-stroke
merge rule, and assembles labeled datasets with splits, class weights and
balanced subsets.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np
import soundfile as sf
from scipy.signal import resample_poly

logger = logging.getLogger(__name__)

TARGET_SAMPLE_RATE = 48000
COMPOSITE_THRESHOLD = 0.03
SUPPORTED_SUBTYPES = ("PCM_16", "PCM_24")


class AudioFormatError(Exception):
    """Raised when an audio file cannot be read or uses an unsupported encoding."""

    pass


class AnnotationParseError(Exception):
    """Raised when an annotation file line cannot be parsed."""

    pass


class DatasetError(Exception):
    """Raised when a dataset operation gets invalid input."""

    pass


class StrokeLabel(IntEnum):
    """The six stroke classes; the integer value is the class index."""

    LO = 0
    HI = 1
    MID1 = 2
    MID2 = 3
    MID3 = 4
    COMPOSITE = 5

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "StrokeLabel":
        """Map a label string (case-insensitive) to a StrokeLabel."""
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown stroke label '{text.strip()}'") from None


NUM_CLASSES = len(StrokeLabel)
LABEL_NAMES = [label.label for label in StrokeLabel]


@dataclass(frozen=True)
class AudioClip:
    """Mono sample buffer in [-1, 1] with its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise AudioFormatError(f"AudioClip must be mono, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise AudioFormatError(f"Sample rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise AudioFormatError("AudioClip samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class Annotation:
    """Onset time in seconds with its stroke label."""

    onset: float
    label: StrokeLabel

    def __post_init__(self):
        if not self.onset >= 0:
            raise AnnotationParseError(f"Onset must be non-negative, got {self.onset}")


@dataclass(frozen=True)
class RecordingEntry:
    """One manifest line: a composition's audio and annotation paths."""

    name: str
    wav_path: Path
    annotation_path: Path


@dataclass(frozen=True)
class Recording:
    """A loaded composition: audio plus (merged) annotations."""

    name: str
    clip: AudioClip
    annotations: Tuple[Annotation, ...]


@dataclass
class LabeledDataset:
    """
    Feature rows with their class indices.

    `groups` holds the composition each row came from and `shifts` the
    semitone shift it was extracted at; both are used to select seen or
    held-out compositions.
    """

    features: np.ndarray
    labels: np.ndarray
    groups: np.ndarray = None
    shifts: np.ndarray = None
    num_classes: int = NUM_CLASSES

    def __post_init__(self):
        self.features = np.asarray(self.features)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            self.features = self.features.reshape(len(self.labels), -1)
        if len(self.features) != len(self.labels):
            raise DatasetError(
                f"features ({len(self.features)}) and labels ({len(self.labels)}) differ in length"
            )
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DatasetError(f"Label index outside 0..{self.num_classes - 1}")
        if self.groups is None:
            self.groups = np.array([""] * len(self.labels), dtype=object)
        if self.shifts is None:
            self.shifts = np.zeros(len(self.labels), dtype=np.int64)
        self.groups = np.asarray(self.groups, dtype=object)
        self.shifts = np.asarray(self.shifts, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.features.shape[1] if self.features.ndim == 2 else 0

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            features=self.features[indices],
            labels=self.labels[indices],
            groups=self.groups[indices],
            shifts=self.shifts[indices],
            num_classes=self.num_classes,
        )

    def select_groups(self, names: Sequence[str], exclude: bool = False) -> "LabeledDataset":
        mask = np.isin(self.groups, list(names))
        if exclude:
            mask = ~mask
        return self.subset(np.flatnonzero(mask))

    @classmethod
    def empty(cls, dim: int, num_classes: int = NUM_CLASSES) -> "LabeledDataset":
        return cls(np.zeros((0, dim), dtype=np.float32), np.zeros(0, dtype=np.int64), num_classes=num_classes)

    @classmethod
    def concat(cls, parts: Sequence["LabeledDataset"]) -> "LabeledDataset":
        parts = [p for p in parts if len(p)]
        if not parts:
            raise DatasetError("Cannot concatenate an empty list of datasets")
        return cls(
            features=np.concatenate([p.features for p in parts]),
            labels=np.concatenate([p.labels for p in parts]),
            groups=np.concatenate([p.groups for p in parts]),
            shifts=np.concatenate([p.shifts for p in parts]),
            num_classes=parts[0].num_classes,
        )


# =============================================================================
# AUDIO
# =============================================================================


def resample(samples: np.ndarray, source_rate: int, target_rate: int) -> np.ndarray:
    """Windowed-sinc polyphase resampling between integer rates."""
    if source_rate == target_rate:
        return samples
    g = math.gcd(int(source_rate), int(target_rate))
    return resample_poly(samples, target_rate // g, source_rate // g)


def load_wav(path: Union[str, Path]) -> AudioClip:
    """
    Load a PCM WAV file as a 48 kHz mono AudioClip.

    Args:
        path: Path to a 16- or 24-bit PCM WAV file with 1 or 2 channels

    Returns:
        AudioClip with samples scaled to [-1, 1]

    Raises:
        AudioFormatError: If the file is unreadable or the encoding unsupported
    """
    try:
        info = sf.info(str(path))
    except Exception as e:
        raise AudioFormatError(f"Cannot read audio file {path}: {e}") from e

    if info.format != "WAV":
        raise AudioFormatError(f"{path}: unsupported container format={info.format}")
    if info.subtype not in SUPPORTED_SUBTYPES:
        raise AudioFormatError(f"{path}: unsupported encoding subtype={info.subtype}")
    if info.channels not in (1, 2):
        raise AudioFormatError(f"{path}: unsupported channels={info.channels}")

    data, rate = sf.read(str(path), dtype="float64", always_2d=True)
    samples = data.mean(axis=1)

    if rate != TARGET_SAMPLE_RATE:
        logger.debug(f"Resampling {path} from {rate} Hz to {TARGET_SAMPLE_RATE} Hz")
        samples = resample(samples, rate, TARGET_SAMPLE_RATE)

    return AudioClip(samples, TARGET_SAMPLE_RATE)


def write_wav(path: Union[str, Path], clip: AudioClip, subtype: str = "PCM_16") -> None:
    """Write an AudioClip as PCM WAV."""
    if subtype not in SUPPORTED_SUBTYPES:
        raise AudioFormatError(f"unsupported encoding subtype={subtype}")
    sf.write(str(path), np.clip(clip.samples, -1.0, 1.0), clip.sample_rate, subtype=subtype)


# =============================================================================
# ANNOTATIONS
# =============================================================================


def parse_annotations(text: str) -> List[Annotation]:
    """
    Parse `<seconds>,<label>` (or tab-separated) lines into sorted annotations.

    A leading `seconds,label` header line is tolerated.

    Raises:
        AnnotationParseError: On an unparseable time or unknown label
    """
    annotations: List[Annotation] = []

    for line_num, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue

        sep = "\t" if "\t" in line else ","
        fields = [f.strip().strip('"') for f in line.split(sep)]
        if len(fields) != 2:
            raise AnnotationParseError(
                f"Line {line_num}: expected '<seconds>,<label>', got '{line}'"
            )

        time_text, label_text = fields
        if not annotations and _is_header_line(time_text, label_text):
            continue

        try:
            onset = float(time_text)
        except ValueError:
            raise AnnotationParseError(
                f"Line {line_num}: unparseable time '{time_text}'"
            ) from None
        if not math.isfinite(onset) or onset < 0:
            raise AnnotationParseError(f"Line {line_num}: invalid time '{time_text}'")

        try:
            label = StrokeLabel.parse(label_text)
        except ValueError:
            raise AnnotationParseError(
                f"Line {line_num}: unknown label '{label_text}'"
            ) from None

        annotations.append(Annotation(onset, label))

    annotations.sort(key=lambda a: a.onset)
    return annotations


def _is_header_line(time_text: str, label_text: str) -> bool:
    return time_text.lower() in ("seconds", "time") and label_text.lower() == "label"


def load_annotations(path: Union[str, Path]) -> List[Annotation]:
    """Read and parse an annotation file, prefixing errors with the path."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise AnnotationParseError(f"Cannot read annotation file {path}: {e}") from e
    try:
        return parse_annotations(text)
    except AnnotationParseError as e:
        raise AnnotationParseError(f"{path}: {e}") from e


def format_annotations(annotations: Sequence[Annotation], header: bool = False) -> str:
    lines = ["seconds,label"] if header else []
    lines.extend(f"{a.onset:.6f},{a.label.label}" for a in annotations)
    return "\n".join(lines) + "\n"


def write_annotations(
    path: Union[str, Path], annotations: Sequence[Annotation], header: bool = False
) -> None:
    Path(path).write_text(format_annotations(annotations, header), encoding="utf-8")


def _check_sorted(annotations: Sequence[Annotation]) -> None:
    for i in range(1, len(annotations)):
        if annotations[i].onset < annotations[i - 1].onset:
            raise DatasetError(
                f"Annotations not sorted: {annotations[i].onset} follows {annotations[i - 1].onset}"
            )


def merge_composites(
    annotations: Sequence[Annotation], threshold: float = COMPOSITE_THRESHOLD
) -> List[Annotation]:
    """
    Collapse runs of strokes closer than `threshold` into one composite stroke.

    A run is a maximal chain of consecutive annotations whose successive gaps
    are all below the threshold; it is replaced by a single composite at the
    run's earliest onset.

    Raises:
        DatasetError: If the input is not sorted by onset
    """
    _check_sorted(annotations)

    merged: List[Annotation] = []
    i = 0
    while i < len(annotations):
        j = i
        while j + 1 < len(annotations) and annotations[j + 1].onset - annotations[j].onset < threshold:
            j += 1

        if j > i:
            merged.append(Annotation(annotations[i].onset, StrokeLabel.COMPOSITE))
        else:
            merged.append(annotations[i])
        i = j + 1

    if len(merged) != len(annotations):
        logger.debug(f"Merged {len(annotations) - len(merged)} strokes into composites")
    return merged


# =============================================================================
# MANIFEST AND RECORDINGS
# =============================================================================


def load_manifest(path: Union[str, Path]) -> List[RecordingEntry]:
    """
    Parse a manifest of `<wav_path>,<annotation_path>` lines.

    Relative paths resolve against the manifest's directory; the wav file
    stem names the composition.

    Raises:
        DatasetError: On malformed lines or duplicate composition names
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DatasetError(f"Cannot read manifest {path}: {e}") from e

    entries: List[RecordingEntry] = []
    seen = set()
    for line_num, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 2 or not all(fields):
            raise DatasetError(f"{path}:{line_num}: expected '<wav_path>,<annotation_path>'")

        wav, ann = (Path(f) if Path(f).is_absolute() else path.parent / f for f in fields)
        name = wav.stem
        if name in seen:
            raise DatasetError(f"{path}:{line_num}: duplicate composition name '{name}'")
        seen.add(name)
        entries.append(RecordingEntry(name, wav, ann))

    if not entries:
        raise DatasetError(f"Manifest {path} lists no recordings")
    return entries


def load_recording(
    entry: RecordingEntry, merge_threshold: float = COMPOSITE_THRESHOLD
) -> Recording:
    clip = load_wav(entry.wav_path)
    annotations = merge_composites(load_annotations(entry.annotation_path), merge_threshold)
    logger.info(
        f"Loaded {entry.name}: {clip.duration:.1f}s, {len(annotations)} strokes"
    )
    return Recording(entry.name, clip, tuple(annotations))


def load_recordings(
    entries: Sequence[RecordingEntry],
    merge_threshold: float = COMPOSITE_THRESHOLD,
    max_workers: int = 1,
) -> List[Recording]:
    """Load every manifest entry; files load in parallel threads, order preserved."""
    if max_workers <= 1:
        return [load_recording(e, merge_threshold) for e in entries]

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda e: load_recording(e, merge_threshold), entries))


# =============================================================================
# SPLITS, WEIGHTS, BALANCING
# =============================================================================


def split_train_val(
    dataset: LabeledDataset, train_fraction: float = 0.8, seed: int = 0
) -> Tuple[LabeledDataset, LabeledDataset]:
    """
    Uniform random train/validation partition, deterministic given seed.

    Raises:
        DatasetError: If the dataset is empty or the fraction out of range
    """
    if len(dataset) == 0:
        raise DatasetError("Cannot split an empty dataset")
    if not 0 < train_fraction <= 1:
        raise DatasetError(f"train_fraction must be in (0, 1], got {train_fraction}")

    n = len(dataset)
    n_train = int(math.floor(n * train_fraction + 0.5))
    order = np.random.default_rng(seed).permutation(n)
    return dataset.subset(np.sort(order[:n_train])), dataset.subset(np.sort(order[n_train:]))


def compute_class_weights(
    class_counts: Union[Sequence[int], Mapping[object, int], np.ndarray]
) -> np.ndarray:
    """
    Inverse-frequency class weights w_c = N / (K * n_c).

    Args:
        class_counts: Per-class counts (sequence or mapping); K is their number

    Returns:
        Array of K weights in the order given

    Raises:
        DatasetError: If any class has a zero count
    """
    if isinstance(class_counts, Mapping):
        names = list(class_counts.keys())
        counts = np.array([class_counts[k] for k in names], dtype=np.float64)
    else:
        counts = np.asarray(class_counts, dtype=np.float64)
        names = [StrokeLabel(i).label if len(counts) == NUM_CLASSES else i for i in range(len(counts))]

    for name, count in zip(names, counts):
        if count <= 0:
            raise DatasetError(f"Class '{name}' has no training examples; cannot weight it")

    total = counts.sum()
    return total / (len(counts) * counts)


def balance_dataset(
    dataset: LabeledDataset, per_class: int = 400, seed: int = 0
) -> LabeledDataset:
    """
    Draw exactly `per_class` items of every class without replacement.

    Raises:
        DatasetError: If some class has fewer than `per_class` items
    """
    if per_class < 0:
        raise DatasetError(f"per_class must be non-negative, got {per_class}")
    if per_class == 0:
        return dataset.subset([])

    counts = dataset.class_counts
    for c, count in enumerate(counts):
        if count < per_class:
            name = StrokeLabel(c).label if dataset.num_classes == NUM_CLASSES else str(c)
            raise DatasetError(
                f"Class '{name}' has {count} examples, fewer than the {per_class} requested"
            )

    rng = np.random.default_rng(seed)
    chosen = [
        rng.choice(np.flatnonzero(dataset.labels == c), size=per_class, replace=False)
        for c in range(dataset.num_classes)
    ]
    return dataset.subset(np.sort(np.concatenate(chosen)))


def describe_counts(counts: np.ndarray) -> Dict[str, int]:
    names = LABEL_NAMES if len(counts) == NUM_CLASSES else [str(i) for i in range(len(counts))]
    return {name: int(n) for name, n in zip(names, counts)}
