"""Interjection classification toolkit: augmentation, features, FNN training."""

from interjection.audio_io import AudioClip, read_wav, write_wav

CLASSES = ("nah", "mmm", "ahah", "oy", "negative")
SAMPLE_RATE = 16000

__all__ = ["AudioClip", "read_wav", "write_wav", "CLASSES", "SAMPLE_RATE"]
__version__ = "0.1.0"
