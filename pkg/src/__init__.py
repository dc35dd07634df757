"""
Mridangam Stroke Transcriber - Core Package

This package contains the transcription pipeline: audio and annotation
I/O, onset detection, spectral features, pitch-shift augmentation, the
from-scratch neural classifier, baselines, evaluation and experiments.
"""

__version__ = "1.0.0"
__author__ = "Mridangam Stroke Transcriber Team"
