"""
Onset detection tests for Mridangam Stroke Transcriber.

These tests verify the STFT front end, the spectral-flux envelope, the
peak picker and end-to-end detection on synthetic click trains.
"""

import os
import sys
import unittest

import numpy as np

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.dataset_io import AudioClip
from src.evaluation import match_onsets
from src.onset import (
    OnsetConfig,
    OnsetEnvelope,
    OnsetError,
    Spectrogram,
    detect_onsets,
    onset_envelope,
    pick_peaks,
    stft_magnitude,
)

SR = 48000


def click_train(count: int, seed: int = 0, min_gap: float = 0.1, max_gap: float = 0.3):
    """Single-sample clicks with random gaps; returns (clip, click times)."""
    rng = np.random.default_rng(seed)
    positions = []
    position = int(0.1 * SR)
    for _ in range(count):
        positions.append(position)
        position += int(rng.uniform(min_gap, max_gap) * SR)
    samples = np.zeros(position + 4096)
    samples[positions] = 0.9
    return AudioClip(samples, SR), [p / SR for p in positions]


def envelope(values, hop=480):
    return OnsetEnvelope(np.asarray(values, dtype=np.float64), hop, SR)


class TestStft(unittest.TestCase):
    """Test the magnitude spectrogram."""

    def test_silence(self):
        """Test that silence gives an all-zero spectrogram."""
        spec = stft_magnitude(AudioClip(np.zeros(10000), SR))
        self.assertTrue(np.all(spec.frames == 0))

    def test_frame_count(self):
        """Test the number of analysis frames."""
        spec = stft_magnitude(AudioClip(np.zeros(10000), SR))
        self.assertEqual(spec.num_frames, (10000 - 2048) // 480 + 1)
        self.assertEqual(spec.frames.shape[1], 1025)

    def test_exact_window_gives_one_frame(self):
        """Test that a clip of exactly one window gives one frame."""
        spec = stft_magnitude(AudioClip(np.zeros(2048), SR))
        self.assertEqual(spec.num_frames, 1)

    def test_short_clip_rejected(self):
        """Test that a clip shorter than the window is rejected."""
        with self.assertRaises(OnsetError):
            stft_magnitude(AudioClip(np.zeros(100), SR))

    def test_sine_peak_bin(self):
        """Test that a sine peaks at its frequency bin."""
        t = np.arange(SR) / SR
        spec = stft_magnitude(AudioClip(0.5 * np.sin(2 * np.pi * 1000 * t), SR))
        self.assertTrue(np.all(np.argmax(spec.frames, axis=1) == 43))

    def test_frame_times_are_centres(self):
        """Test that frame times are window centres."""
        spec = stft_magnitude(AudioClip(np.zeros(3000), SR))
        np.testing.assert_allclose(spec.frame_times(), [1024 / SR, (480 + 1024) / SR])


class TestEnvelope(unittest.TestCase):
    """Test the spectral-flux onset strength envelope."""

    def test_constant_spectrogram(self):
        """Test that a constant spectrogram has zero flux."""
        env = onset_envelope(Spectrogram(np.ones((5, 4)), 480, 2048, SR))
        np.testing.assert_array_equal(env.values, np.zeros(5))

    def test_step_up(self):
        """Test that a step up gives one flux spike."""
        frames = np.zeros((6, 8))
        frames[3:] = 1.0
        env = onset_envelope(Spectrogram(frames, 480, 2048, SR))
        np.testing.assert_allclose(env.values, [0, 0, 0, 1, 0, 0])

    def test_decreasing_is_rectified(self):
        """Test that falling magnitude is rectified to zero."""
        frames = np.linspace(5, 1, 5)[:, None] * np.ones((5, 3))
        env = onset_envelope(Spectrogram(frames, 480, 2048, SR))
        np.testing.assert_array_equal(env.values, np.zeros(5))

    def test_scaling_homogeneity(self):
        """Test that scaling the clip scales the envelope."""
        clip, _ = click_train(10, seed=4)
        rng = np.random.default_rng(1)
        noisy = AudioClip(clip.samples * 0.5 + 0.01 * rng.standard_normal(len(clip)), SR)
        base = onset_envelope(stft_magnitude(noisy)).values
        scaled = onset_envelope(stft_magnitude(AudioClip(noisy.samples * 0.3, SR))).values
        np.testing.assert_allclose(scaled, 0.3 * base, rtol=1e-5, atol=1e-12)


class TestPickPeaks(unittest.TestCase):
    """Test the local-maximum peak picker."""

    def test_all_zero(self):
        """Test that an all-zero envelope has no peaks."""
        self.assertEqual(pick_peaks(envelope(np.zeros(30))), [])

    def test_triangular_bump(self):
        """Test that a triangular bump peaks at its apex."""
        values = np.maximum(0.0, 5 - np.abs(np.arange(21) - 10))
        self.assertEqual(pick_peaks(envelope(values)), [10])

    def test_wait_rule(self):
        """Test that a peak within the wait is suppressed."""
        values = np.zeros(20)
        values[10], values[12] = 1.0, 0.9
        self.assertEqual(pick_peaks(envelope(values), pre=1, post=1, wait=3), [10])
        self.assertEqual(pick_peaks(envelope(values), pre=1, post=1, wait=2), [10, 12])

    def test_plateau_keeps_earliest_frame(self):
        """Test that a plateau of equal maxima reports its first frame."""
        values = np.zeros(20)
        values[8] = values[9] = 1.0
        self.assertEqual(pick_peaks(envelope(values), pre=3, post=3, wait=3), [8])
        self.assertEqual(pick_peaks(envelope(values), pre=1, post=1, wait=0), [8])

    def test_output_spacing(self):
        """Test that reported peaks are spaced by more than the wait."""
        rng = np.random.default_rng(7)
        peaks = pick_peaks(envelope(rng.random(500)), wait=4)
        self.assertTrue(all(b - a >= 4 for a, b in zip(peaks, peaks[1:])))


class TestDetectOnsets(unittest.TestCase):
    """Test end-to-end onset detection."""

    def test_silence(self):
        """Test that silence yields no onsets."""
        self.assertEqual(detect_onsets(AudioClip(np.zeros(SR), SR)), [])

    def test_click_every_half_second(self):
        """Test detection of evenly spaced clicks."""
        samples = np.zeros(5 * SR)
        truth = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0]
        for t in truth:
            samples[int(t * SR) + 7] = 0.9
        detected = detect_onsets(AudioClip(samples, SR))
        self.assertEqual(len(detected), len(truth))
        report = match_onsets(detected, [t + 7 / SR for t in truth], 0.015)
        self.assertEqual(report.matched, len(truth))

    def test_single_click_at_every_hop_offset(self):
        """Test that one click is found at every offset within a hop."""
        missed = []
        for offset in range(480):
            samples = np.zeros(20 * 480)
            position = 8 * 480 + offset
            samples[position] = 0.9
            detected = detect_onsets(AudioClip(samples, SR))
            report = match_onsets(detected, [position / SR], 0.015)
            if report.matched != 1 or report.false_positives:
                missed.append(offset)
        self.assertEqual(missed, [])

    def test_click_train_f_measure(self):
        """Test the F-measure on a random click train."""
        clip, truth = click_train(200, seed=11)
        detected = detect_onsets(clip, OnsetConfig())
        report = match_onsets(detected, truth, 0.015)
        self.assertEqual(report.f_measure, 1.0)
        self.assertTrue(all(0 <= t <= clip.duration for t in detected))


if __name__ == "__main__":
    unittest.main()
