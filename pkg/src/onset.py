"""
Mridangam Stroke Transcriber - Onset Detection Module

Spectral-flux onset detection: Hann-windowed STFT magnitudes, the mean
half-wave rectified flux across bins as onset strength envelope, and a
local-maximum peak picker.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from src.dataset_io import AudioClip

logger = logging.getLogger(__name__)


class OnsetError(Exception):
    """Raised when onset detection receives invalid input."""

    pass


@dataclass(frozen=True)
class OnsetConfig:
    """STFT and peak-picking parameters (hop 480 = 10 ms at 48 kHz)."""

    window: int = 2048
    hop: int = 480
    pre: int = 3
    post: int = 3
    delta_ratio: float = 0.07
    wait: int = 3

    def validate(self) -> None:
        if not self.window >= self.hop > 0:
            raise OnsetError(f"Need window >= hop > 0, got window={self.window}, hop={self.hop}")
        if self.pre < 0 or self.post < 0 or self.wait < 0:
            raise OnsetError("pre, post and wait must be non-negative")
        if self.delta_ratio < 0:
            raise OnsetError(f"delta_ratio must be non-negative, got {self.delta_ratio}")


@dataclass(frozen=True)
class Spectrogram:
    """Time-major STFT magnitudes (frames x window/2+1 bins)."""

    frames: np.ndarray
    frame_hop: int
    window_size: int
    sample_rate: int

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    def frame_times(self) -> np.ndarray:
        """Centre time of every analysis frame, in seconds."""
        return (np.arange(self.num_frames) * self.frame_hop + self.window_size / 2) / self.sample_rate


@dataclass(frozen=True)
class OnsetEnvelope:
    """Onset strength per frame; frame 0 is always zero."""

    values: np.ndarray
    frame_hop: int
    sample_rate: int
    window_size: int = 0

    def frame_times(self) -> np.ndarray:
        return (np.arange(len(self.values)) * self.frame_hop + self.window_size / 2) / self.sample_rate


def stft_magnitude(clip: AudioClip, window: int = 2048, hop: int = 480) -> Spectrogram:
    """
    Hann-windowed STFT magnitude without padding.

    Frame t covers samples [t*hop, t*hop + window); there are
    floor((len - window) / hop) + 1 frames.

    Raises:
        OnsetError: If the clip is shorter than one window
    """
    if not window >= hop > 0:
        raise OnsetError(f"Need window >= hop > 0, got window={window}, hop={hop}")
    if len(clip) < window:
        raise OnsetError(f"Clip of {len(clip)} samples is shorter than one window ({window})")

    frames = sliding_window_view(clip.samples, window)[::hop]
    taper = get_window("hann", window, fftbins=True)
    magnitudes = np.abs(np.fft.rfft(frames * taper, axis=1))
    return Spectrogram(magnitudes, hop, window, clip.sample_rate)


def onset_envelope(spec: Spectrogram) -> OnsetEnvelope:
    """Mean over bins of max(0, |X[t,k]| - |X[t-1,k]|), with value[0] = 0."""
    if spec.num_frames < 1:
        raise OnsetError("Spectrogram has no frames")

    flux = np.maximum(np.diff(spec.frames, axis=0), 0.0).mean(axis=1)
    values = np.concatenate([[0.0], flux])
    return OnsetEnvelope(values, spec.frame_hop, spec.sample_rate, spec.window_size)


def pick_peaks(
    env: OnsetEnvelope,
    pre: int = 3,
    post: int = 3,
    delta: Optional[float] = None,
    wait: int = 3,
) -> List[int]:
    """
    Select onset frames from the envelope.

    Frame t is kept when it is the maximum of [t-pre, t+post], it exceeds
    that neighbourhood's mean by at least `delta`, and it lies at least
    `wait` frames after the previously kept frame. On a plateau of equal
    maxima only the earliest frame qualifies.

    Args:
        env: Onset strength envelope
        pre: Frames before t in the neighbourhood
        post: Frames after t in the neighbourhood
        delta: Threshold over the local mean; default 0.07 * max(env)
        wait: Minimum gap between kept frames

    Returns:
        Ascending frame indices
    """
    values = np.asarray(env.values, dtype=np.float64)
    if values.size == 0:
        return []
    if delta is None:
        delta = 0.07 * float(values.max())

    peaks: List[int] = []
    last = None
    n = len(values)

    for t in range(n):
        # the local mean is non-negative, so anything below delta cannot qualify
        if values[t] < delta or values[t] <= 0:
            continue
        lo, hi = max(0, t - pre), min(n, t + post + 1)
        neighbourhood = values[lo:hi]
        earlier, later = values[lo:t], values[t + 1 : hi]
        if earlier.size and not values[t] > earlier.max():
            continue
        if later.size and values[t] < later.max():
            continue
        if values[t] < neighbourhood.mean() + delta:
            continue
        if last is not None and t < last + wait:
            continue
        peaks.append(t)
        last = t

    return peaks


def detect_onsets(clip: AudioClip, config: Optional[OnsetConfig] = None) -> List[float]:
    """
    Detect stroke onsets in seconds.

    Composes stft_magnitude, onset_envelope and pick_peaks; each detection
    is reported at the centre of its analysis frame.
    """
    config = config or OnsetConfig()
    config.validate()

    spec = stft_magnitude(clip, config.window, config.hop)
    env = onset_envelope(spec)
    delta = config.delta_ratio * float(env.values.max())
    peaks = pick_peaks(env, config.pre, config.post, delta, config.wait)

    times = env.frame_times()[peaks] if peaks else np.array([])
    logger.debug(f"Detected {len(peaks)} onsets in {clip.duration:.2f}s of audio")
    return [float(t) for t in times]
