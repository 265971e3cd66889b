"""Mono WAV reading/writing and the in-memory clip type."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from interjection.errors import CorruptHeader, IoFailure, UnsupportedFormat

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioClip:
    """A mono buffer of normalized amplitudes plus bookkeeping.

    ``provenance`` lists the effect descriptors applied so far, oldest first;
    an empty tuple means the clip is clean.
    """

    samples: np.ndarray
    sample_rate: int = 16000
    label: Optional[str] = None
    speaker: Optional[str] = None
    provenance: tuple[str, ...] = field(default_factory=tuple)
    name: Optional[str] = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise UnsupportedFormat(f"expected mono samples, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "provenance", tuple(self.provenance))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / self.sample_rate

    def derive(self, samples, effect: Optional[str] = None, **changes) -> "AudioClip":
        """Copy with new samples, appending ``effect`` to the provenance."""
        prov = self.provenance + ((effect,) if effect else ())
        return replace(self, samples=samples, provenance=prov, **changes)


def _parse_fmt(body: bytes):
    if len(body) < 16:
        raise CorruptHeader("fmt chunk shorter than 16 bytes")
    tag, channels, rate, _, _, bits = struct.unpack("<HHIIHH", body[:16])
    if tag == WAVE_FORMAT_EXTENSIBLE:
        if len(body) < 40:
            raise CorruptHeader("truncated WAVE_FORMAT_EXTENSIBLE fmt chunk")
        tag = struct.unpack("<H", body[24:26])[0]
    return tag, channels, rate, bits


def read_wav(path) -> AudioClip:
    """Read a mono PCM16 or float32 WAV file into normalized amplitudes."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise CorruptHeader(f"{path}: not a RIFF/WAVE file")

    fmt = None
    pcm = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        size = struct.unpack("<I", data[pos + 4:pos + 8])[0]
        body = data[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            fmt = _parse_fmt(body)
        elif cid == b"data":
            if len(body) < size:
                raise CorruptHeader(f"{path}: data chunk truncated")
            pcm = body
        pos += 8 + size + (size & 1)

    if fmt is None or pcm is None:
        raise CorruptHeader(f"{path}: missing fmt or data chunk")
    tag, channels, rate, bits = fmt
    if channels != 1:
        raise UnsupportedFormat(f"{path}: {channels} channels, only mono is supported")
    if rate <= 0:
        raise CorruptHeader(f"{path}: sample rate {rate}")

    if tag == WAVE_FORMAT_PCM and bits == 16:
        raw = np.frombuffer(pcm[: len(pcm) // 2 * 2], dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        raw = np.frombuffer(pcm[: len(pcm) // 4 * 4], dtype="<f4")
        samples = raw.astype(np.float64)
    else:
        raise UnsupportedFormat(f"{path}: format tag {tag:#x} with {bits} bits")
    return AudioClip(samples, sample_rate=rate, name=path.stem)


def quantize_pcm16(samples) -> np.ndarray:
    # clamp before scaling so out-of-range input saturates instead of wrapping
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    return np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")


def write_wav(clip: AudioClip, path) -> None:
    """Write ``clip`` as a mono 16-bit PCM WAV."""
    pcm = quantize_pcm16(clip.samples).tobytes()
    rate = int(clip.sample_rate)
    header = b"RIFF" + struct.pack("<I", 36 + len(pcm)) + b"WAVE"
    fmt = b"fmt " + struct.pack("<IHHIIHH", 16, WAVE_FORMAT_PCM, 1, rate, rate * 2, 2, 16)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(header + fmt + b"data" + struct.pack("<I", len(pcm)) + pcm)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
