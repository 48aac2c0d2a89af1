"""Learnable sinc band-pass front-end for raw-waveform classifiers."""

__version__ = "0.1.0"
