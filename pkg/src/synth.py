"""
Mridangam Stroke Transcriber - Synthetic Corpus Generator

Harmonic and inharmonic decaying-partial strokes on a controllable tonic,
concatenated into a labeled recording with exact onset annotations, so the
whole pipeline can be exercised without a private dataset.
"""

import json
import logging
from dataclasses import asdict, dataclass
from typing import List, Sequence, Tuple

import numpy as np

from src.dataset_io import TARGET_SAMPLE_RATE, Annotation, AudioClip, StrokeLabel

logger = logging.getLogger(__name__)

PEAK_AMPLITUDE = 0.9
FADE_SECONDS = 0.005


class SynthError(Exception):
    """Raised on invalid recipes or corpus specifications."""

    pass


@dataclass(frozen=True)
class Partial:
    """A decaying sinusoid at ratio * tonic Hz."""

    ratio: float
    amplitude: float
    decay: float  # per second


@dataclass(frozen=True)
class StrokeRecipe:
    """
    How to synthesise one stroke class.

    `detune` and `amplitude_jitter` are relative ranges drawn per stroke
    and per partial; `noise_decay` shapes the white-noise burst.
    """

    label: StrokeLabel
    partials: Tuple[Partial, ...]
    noise_level: float = 0.0
    duration: float = 0.3
    noise_decay: float = 40.0
    detune: float = 0.0
    amplitude_jitter: float = 0.0

    def validate(self) -> None:
        if not self.partials:
            raise SynthError(f"Recipe '{self.label.label}' has no partials")
        if any(p.ratio <= 0 for p in self.partials):
            raise SynthError(f"Recipe '{self.label.label}' has a non-positive frequency ratio")
        if sum(p.amplitude for p in self.partials) > 1.0 + 1e-9:
            raise SynthError(f"Recipe '{self.label.label}' partial amplitudes sum above 1")
        if self.noise_level < 0 or self.duration <= 0:
            raise SynthError(f"Recipe '{self.label.label}' needs noise_level >= 0 and duration > 0")


@dataclass(frozen=True)
class SynthCorpusSpec:
    tonic_hz: float = 160.0
    strokes_per_class: int = 100
    inter_onset: Tuple[float, float] = (0.15, 0.35)
    seed: int = 0
    lead_in: float = 0.25
    sample_rate: int = TARGET_SAMPLE_RATE

    def validate(self) -> None:
        if not 80 <= self.tonic_hz <= 400:
            raise SynthError(f"tonic_hz must be in [80, 400], got {self.tonic_hz}")
        lo, hi = self.inter_onset
        if lo < 0.08 or hi < lo:
            raise SynthError(f"inter_onset range must satisfy 0.08 <= min <= max, got {self.inter_onset}")
        if self.strokes_per_class < 0:
            raise SynthError("strokes_per_class must be non-negative")


def default_recipes() -> List[StrokeRecipe]:
    """
    Six stroke recipes.

    lo and hi are harmonic stacks low and high on the tonic, composite is
    their superposition, mid1 and mid2 share an inharmonic partial set and
    differ only in noise and decay, mid3 has its own inharmonic set.
    """
    mid_partials = (Partial(1.5, 0.5, 22.0), Partial(2.3, 0.3, 26.0), Partial(3.6, 0.2, 30.0))
    return [
        StrokeRecipe(
            StrokeLabel.LO,
            (Partial(0.5, 0.6, 10.0), Partial(1.0, 0.3, 14.0)),
            noise_level=0.03,
            duration=0.35,
            detune=0.004,
            amplitude_jitter=0.2,
        ),
        StrokeRecipe(
            StrokeLabel.HI,
            (Partial(2.0, 0.45, 8.0), Partial(3.0, 0.3, 10.0), Partial(4.0, 0.2, 12.0)),
            noise_level=0.03,
            duration=0.35,
            detune=0.004,
            amplitude_jitter=0.2,
        ),
        StrokeRecipe(
            StrokeLabel.MID1,
            mid_partials,
            noise_level=0.02,
            duration=0.3,
            noise_decay=60.0,
            detune=0.004,
            amplitude_jitter=0.3,
        ),
        StrokeRecipe(
            StrokeLabel.MID2,
            tuple(Partial(p.ratio, p.amplitude, p.decay * 1.2) for p in mid_partials),
            noise_level=0.35,
            duration=0.3,
            noise_decay=30.0,
            detune=0.004,
            amplitude_jitter=0.3,
        ),
        StrokeRecipe(
            StrokeLabel.MID3,
            (Partial(2.7, 0.45, 30.0), Partial(4.1, 0.3, 35.0), Partial(5.9, 0.2, 40.0)),
            noise_level=0.08,
            duration=0.25,
            detune=0.004,
            amplitude_jitter=0.3,
        ),
        StrokeRecipe(
            StrokeLabel.COMPOSITE,
            (
                Partial(0.5, 0.3, 10.0),
                Partial(1.0, 0.15, 14.0),
                Partial(2.0, 0.25, 8.0),
                Partial(3.0, 0.15, 10.0),
                Partial(4.0, 0.1, 12.0),
            ),
            noise_level=0.05,
            duration=0.35,
            detune=0.004,
            amplitude_jitter=0.2,
        ),
    ]


def generate_stroke(
    recipe: StrokeRecipe,
    tonic_hz: float,
    seed: int = 0,
    sample_rate: int = TARGET_SAMPLE_RATE,
) -> AudioClip:
    """
    Sum of exponentially decaying sinusoids plus decaying white noise,
    normalized to a peak of 0.9.
    """
    recipe.validate()
    rng = np.random.default_rng(seed)
    n = int(round(recipe.duration * sample_rate))
    t = np.arange(n) / sample_rate

    signal = np.zeros(n)
    for partial in recipe.partials:
        freq = partial.ratio * tonic_hz * (1.0 + recipe.detune * rng.uniform(-1.0, 1.0))
        gain = partial.amplitude * (1.0 + recipe.amplitude_jitter * rng.uniform(-1.0, 1.0))
        phase = rng.uniform(0.0, 2 * np.pi)
        signal += gain * np.exp(-partial.decay * t) * np.sin(2 * np.pi * freq * t + phase)

    noise = rng.standard_normal(n)
    if recipe.noise_level > 0:
        signal += recipe.noise_level * np.exp(-recipe.noise_decay * t) * noise

    fade = min(n, int(FADE_SECONDS * sample_rate))
    if fade:
        signal[n - fade:] *= np.linspace(1.0, 0.0, fade)

    peak = np.max(np.abs(signal))
    if peak > 0:
        signal = signal * (PEAK_AMPLITUDE / peak)
    return AudioClip(signal, sample_rate)


def generate_corpus(
    spec: SynthCorpusSpec, recipes: Sequence[StrokeRecipe] = None
) -> Tuple[AudioClip, List[Annotation]]:
    """
    Render strokes_per_class strokes of each recipe in random order with
    random inter-onset gaps; annotations carry the exact onsets.

    Raises:
        SynthError: On an invalid spec or recipe set
    """
    spec.validate()
    recipes = list(recipes) if recipes is not None else default_recipes()
    if len(recipes) != len(StrokeLabel) or len({r.label for r in recipes}) != len(recipes):
        raise SynthError("Need exactly one recipe per stroke class")
    by_label = {r.label: r for r in recipes}

    rng = np.random.default_rng(spec.seed)
    sr = spec.sample_rate
    sequence = np.repeat(np.arange(len(StrokeLabel)), spec.strokes_per_class)
    rng.shuffle(sequence)

    min_gap, max_gap = spec.inter_onset
    starts, strokes = [], []
    position = int(np.ceil(spec.lead_in * sr))
    for label_index in sequence:
        recipe = by_label[StrokeLabel(int(label_index))]
        stroke_seed = int(rng.integers(0, 2**31 - 1))
        strokes.append(generate_stroke(recipe, spec.tonic_hz, stroke_seed, sr).samples)
        starts.append(position)
        position += int(np.ceil(rng.uniform(min_gap, max_gap) * sr))

    tail = max((len(s) for s in strokes), default=0)
    total = (starts[-1] if starts else position) + tail + int(spec.lead_in * sr)
    mix = np.zeros(total)
    for start, stroke in zip(starts, strokes):
        mix[start:start + len(stroke)] += stroke

    peak = np.max(np.abs(mix)) if total else 0.0
    if peak > 0.99:
        mix *= 0.99 / peak

    annotations = [
        Annotation(start / sr, StrokeLabel(int(label)))
        for start, label in zip(starts, sequence)
    ]
    logger.info(
        f"🎵 Generated {len(annotations)} synthetic strokes at tonic {spec.tonic_hz:.1f} Hz "
        f"({total / sr:.1f}s)"
    )
    return AudioClip(mix, sr), annotations


def recipes_to_json(recipes: Sequence[StrokeRecipe], spec: SynthCorpusSpec = None) -> str:
    payload = {
        "recipes": [
            {**asdict(r), "label": r.label.label, "partials": [asdict(p) for p in r.partials]}
            for r in recipes
        ]
    }
    if spec is not None:
        payload["corpus"] = asdict(spec)
    return json.dumps(payload, indent=2, sort_keys=True)


def recipes_from_json(text: str) -> List[StrokeRecipe]:
    try:
        payload = json.loads(text)
        return [
            StrokeRecipe(
                label=StrokeLabel.parse(r["label"]),
                partials=tuple(Partial(**p) for p in r["partials"]),
                noise_level=r.get("noise_level", 0.0),
                duration=r.get("duration", 0.3),
                noise_decay=r.get("noise_decay", 40.0),
                detune=r.get("detune", 0.0),
                amplitude_jitter=r.get("amplitude_jitter", 0.0),
            )
            for r in payload["recipes"]
        ]
    except (KeyError, TypeError, ValueError) as e:
        raise SynthError(f"Invalid recipe JSON: {e}") from e
