"""193-dimensional per-clip mean features.

Layout, in order: 40 MFCCs, 128 mel-band powers, 12 chroma bins, 7
spectral-contrast values and 6 tonal-centroid coordinates, each averaged
over the frames of the clip.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from interjection.audio_io import AudioClip
from interjection.dsp import framing_params, frame_signal, hann, next_pow2, rfft
from interjection.errors import EmptySignal, LengthMismatch, SignalTooShort

N_MFCC = 40
N_MELS = 128
N_CHROMA = 12
N_CONTRAST = 7
N_TONNETZ = 6
BLOCKS = (("mfcc", N_MFCC), ("mel", N_MELS), ("chroma", N_CHROMA),
          ("contrast", N_CONTRAST), ("tonnetz", N_TONNETZ))
N_FEATURES = sum(size for _, size in BLOCKS)
assert N_FEATURES == 193

LOG_FLOOR = 1e-10
CHROMA_FMIN = 27.5
CONTRAST_EDGES = (0.0, 200.0, 400.0, 800.0, 1600.0, 3200.0)
CONTRAST_QUANTILE = 0.02
CANONICAL_SAMPLES = 24800


def block_slices() -> dict[str, slice]:
    out, start = {}, 0
    for name, size in BLOCKS:
        out[name] = slice(start, start + size)
        start += size
    return out


@dataclass(frozen=True)
class FeatureConfig:
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    fmin: float = 0.0
    fmax: float | None = None
    contrast_edges: tuple[float, ...] = CONTRAST_EDGES
    contrast_quantile: float = CONTRAST_QUANTILE
    canonical_samples: int | None = CANONICAL_SAMPLES

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        d = dict(d)
        if "contrast_edges" in d:
            d["contrast_edges"] = tuple(d["contrast_edges"])
        return cls(**d)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    names: tuple[str, ...] = field(default=tuple(n for n, _ in BLOCKS))

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (N_FEATURES,):
            raise LengthMismatch(f"feature vector must have {N_FEATURES} values, got {v.shape}")
        object.__setattr__(self, "values", v)

    def block(self, name: str) -> np.ndarray:
        return self.values[block_slices()[name]]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_centers(sample_rate: int, n_mels: int = N_MELS, fmin: float = 0.0, fmax: float | None = None):
    fmax = sample_rate / 2 if fmax is None else fmax
    pts = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    return pts[1:-1]


@lru_cache(maxsize=None)
def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int = N_MELS,
                   fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Triangular filters on the mel scale, shape (n_mels, n_fft // 2 + 1).

    Each triangle's half-widths are at least one FFT bin so that narrow
    low-frequency filters still catch the nearest bin.
    """
    fmax = sample_rate / 2 if fmax is None else fmax
    pts = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    df = sample_rate / n_fft
    lo, center, hi = pts[:-2, None], pts[1:-1, None], pts[2:, None]
    left = np.maximum(center - lo, df)
    right = np.maximum(hi - center, df)
    rising = (freqs[None, :] - (center - left)) / left
    falling = ((center + right) - freqs[None, :]) / right
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb.flags.writeable = False
    return fb


@lru_cache(maxsize=None)
def dct_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Orthonormal DCT-II rows, shape (n_out, n_in)."""
    k = np.arange(n_out)[:, None]
    n = np.arange(n_in)[None, :]
    m = np.cos(np.pi * k * (2 * n + 1) / (2 * n_in)) * np.sqrt(2.0 / n_in)
    m[0] /= np.sqrt(2.0)
    m.flags.writeable = False
    return m


@lru_cache(maxsize=None)
def chroma_map(sample_rate: int, n_fft: int) -> np.ndarray:
    """0/1 matrix (12, bins) assigning each bin above 27.5 Hz to a pitch class (A = 9)."""
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    m = np.zeros((N_CHROMA, len(freqs)))
    ok = freqs > CHROMA_FMIN
    classes = (np.round(12.0 * np.log2(freqs[ok] / 440.0)).astype(int) + 9) % 12
    m[classes, np.nonzero(ok)[0]] = 1.0
    m.flags.writeable = False
    return m


@lru_cache(maxsize=None)
def tonnetz_basis() -> np.ndarray:
    c = np.arange(N_CHROMA)
    basis = np.stack([
        np.sin(7 * np.pi / 6 * c), np.cos(7 * np.pi / 6 * c),
        np.sin(3 * np.pi / 2 * c), np.cos(3 * np.pi / 2 * c),
        0.5 * np.sin(2 * np.pi / 3 * c), 0.5 * np.cos(2 * np.pi / 3 * c),
    ])
    basis.flags.writeable = False
    return basis


def _spectra(clips: Sequence[AudioClip], cfg: FeatureConfig):
    """Magnitude spectra of equal-length, equal-rate clips, shape (clips, frames, bins)."""
    rate = clips[0].sample_rate
    frame, hop = framing_params(rate, cfg.frame_ms, cfg.hop_ms)
    n = len(clips[0])
    if n == 0:
        raise EmptySignal("cannot featurize an empty clip")
    if n < frame:
        raise SignalTooShort(f"clip of {n} samples is shorter than one {frame}-sample frame")
    frames = np.stack([frame_signal(c.samples, frame, hop) for c in clips]) * hann(frame)
    n_fft = next_pow2(frame)
    return np.abs(rfft(frames, n_fft)), rate, n_fft


def contrast_frames(mag: np.ndarray, freqs: np.ndarray, edges=CONTRAST_EDGES,
                    quantile: float = CONTRAST_QUANTILE) -> np.ndarray:
    """Per-frame spectral contrast from magnitudes, shape (..., len(edges) + 1).

    One value per sub-band bounded by ``edges`` (the last band runs to the
    top bin), followed by one for the whole spectrum.
    """
    bounds = list(edges) + [np.inf]
    bands = []
    for i in range(len(edges)):
        lo, hi = bounds[i], bounds[i + 1]
        sel = (freqs >= lo) & (freqs < hi)
        bands.append(np.nonzero(sel)[0])
    bands.append(np.arange(len(freqs)))
    out = np.empty(mag.shape[:-1] + (len(bands),))
    for j, idx in enumerate(bands):
        s = np.sort(mag[..., idx], axis=-1)
        k = max(1, int(round(quantile * len(idx))))
        valley = np.maximum(s[..., :k].mean(axis=-1), LOG_FLOOR)
        peak = np.maximum(s[..., -k:].mean(axis=-1), LOG_FLOOR)
        out[..., j] = np.log(peak) - np.log(valley)
    return out


def _chroma_frames(mag, rate, n_fft):
    chroma = mag @ chroma_map(rate, n_fft).T
    peak = chroma.max(axis=-1, keepdims=True)
    return np.divide(chroma, peak, out=np.zeros_like(chroma), where=peak > 0)


def _tonnetz_frames(chroma):
    total = chroma.sum(axis=-1, keepdims=True)
    norm = np.divide(chroma, total, out=np.zeros_like(chroma), where=total > 0)
    return norm @ tonnetz_basis().T


def _blocks(mag, rate, n_fft, cfg: FeatureConfig) -> dict[str, np.ndarray]:
    power = mag * mag
    mel = power @ mel_filterbank(rate, n_fft, N_MELS, cfg.fmin, cfg.fmax).T
    mfcc = np.log(mel + LOG_FLOOR) @ dct_matrix(N_MELS, N_MFCC).T
    chroma = _chroma_frames(mag, rate, n_fft)
    freqs = np.arange(mag.shape[-1]) * rate / n_fft
    contrast = contrast_frames(mag, freqs, cfg.contrast_edges, cfg.contrast_quantile)
    tonnetz = _tonnetz_frames(chroma)
    return {
        "mfcc": mfcc.mean(axis=-2),
        "mel": mel.mean(axis=-2),
        "chroma": chroma.mean(axis=-2),
        "contrast": contrast.mean(axis=-2),
        "tonnetz": tonnetz.mean(axis=-2),
    }


def _single(clip: AudioClip, cfg: FeatureConfig | None) -> dict[str, np.ndarray]:
    cfg = cfg or FeatureConfig()
    mag, rate, n_fft = _spectra([clip], cfg)
    return _blocks(mag[0], rate, n_fft, cfg)


def mfcc_means(clip: AudioClip, cfg: FeatureConfig | None = None) -> np.ndarray:
    return _single(clip, cfg)["mfcc"]


def mel_means(clip: AudioClip, cfg: FeatureConfig | None = None) -> np.ndarray:
    return _single(clip, cfg)["mel"]


def chroma_means(clip: AudioClip, cfg: FeatureConfig | None = None) -> np.ndarray:
    return _single(clip, cfg)["chroma"]


def spectral_contrast_means(clip: AudioClip, cfg: FeatureConfig | None = None) -> np.ndarray:
    return _single(clip, cfg)["contrast"]


def tonnetz_means(clip: AudioClip, cfg: FeatureConfig | None = None) -> np.ndarray:
    return _single(clip, cfg)["tonnetz"]


def _check_length(clip: AudioClip, cfg: FeatureConfig):
    if cfg.canonical_samples is not None and len(clip) != cfg.canonical_samples:
        raise LengthMismatch(
            f"clip {clip.name!r} has {len(clip)} samples, expected {cfg.canonical_samples}")


def featurize(clip: AudioClip, cfg: FeatureConfig | None = None) -> FeatureVector:
    cfg = cfg or FeatureConfig()
    _check_length(clip, cfg)
    blocks = _single(clip, cfg)
    return FeatureVector(np.concatenate([blocks[name] for name, _ in BLOCKS]))


def featurize_batch(clips: Sequence[AudioClip], cfg: FeatureConfig | None = None) -> np.ndarray:
    """Feature matrix of shape (len(clips), 193), one ``featurize`` row per clip."""
    cfg = cfg or FeatureConfig()
    out = np.empty((len(clips), N_FEATURES))
    for i, clip in enumerate(clips):
        out[i] = featurize(clip, cfg).values
    return out
