"""Signal primitives: radix-2 FFT, STFT framing, resampling, peak frequency."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from interjection.audio_io import AudioClip
from interjection.errors import EmptySignal, InvalidFraming, SignalTooShort

DEFAULT_FRAME_MS = 25.0
DEFAULT_HOP_MS = 10.0
RESAMPLE_HALF_TAPS = 16
KAISER_BETA = 8.6


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n) - 1).bit_length()


@lru_cache(maxsize=None)
def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    rev.flags.writeable = False
    return rev


@lru_cache(maxsize=None)
def _twiddles(half: int) -> np.ndarray:
    w = np.exp(-2j * np.pi * np.arange(half) / (2 * half))
    w.flags.writeable = False
    return w


def fft(x) -> np.ndarray:
    """Iterative decimation-in-time radix-2 FFT along the last axis.

    The last-axis length must be a power of two. Leading axes are batched.
    """
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if n == 0 or n & (n - 1):
        raise ValueError(f"FFT length must be a power of two, got {n}")
    lead = x.shape[:-1]
    y = x[..., _bit_reversal(n)]
    m = 1
    while m < n:
        y = y.reshape(lead + (n // (2 * m), 2, m))
        even = y[..., 0, :]
        odd = y[..., 1, :] * _twiddles(m)
        y = np.concatenate((even + odd, even - odd), axis=-1)
        m *= 2
    return y.reshape(lead + (n,))


def rfft(x, n: int | None = None) -> np.ndarray:
    """One-sided spectrum of real input, zero padded to ``n`` (power of two).

    Two real rows are packed into one complex transform, halving the work.
    """
    x = np.asarray(x, dtype=np.float64)
    if n is None:
        n = next_pow2(x.shape[-1])
    if x.shape[-1] < n:
        pad = [(0, 0)] * (x.ndim - 1) + [(0, n - x.shape[-1])]
        x = np.pad(x, pad)
    elif x.shape[-1] > n:
        x = x[..., :n]
    lead = x.shape[:-1]
    rows = x.reshape(-1, n)
    count = rows.shape[0]
    if count % 2:
        rows = np.vstack([rows, np.zeros((1, n))])
    z = fft(rows[0::2] + 1j * rows[1::2])
    zr = np.conj(z[:, (-np.arange(n)) % n])
    a = 0.5 * (z + zr)
    b = -0.5j * (z - zr)
    out = np.empty((rows.shape[0], n // 2 + 1), dtype=np.complex128)
    out[0::2] = a[:, : n // 2 + 1]
    out[1::2] = b[:, : n // 2 + 1]
    return out[:count].reshape(lead + (n // 2 + 1,))


def dft(x) -> np.ndarray:
    """Direct O(n^2) DFT, used as a reference for the fast path."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    k = np.arange(n)
    return x @ np.exp(-2j * np.pi * np.outer(k, k) / n)


@lru_cache(maxsize=None)
def hann(length: int) -> np.ndarray:
    """Periodic Hann window."""
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(length) / length)
    w.flags.writeable = False
    return w


@dataclass(frozen=True)
class FrameMatrix:
    frames: np.ndarray
    frame_length_samples: int
    hop_samples: int
    sample_rate: int
    centered: bool = True

    @property
    def n_fft(self) -> int:
        return 2 * (self.frames.shape[-1] - 1)

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.frames.shape[-1]) * self.sample_rate / self.n_fft


def frame_count(n_samples: int, frame_length: int, hop: int, centered: bool = True) -> int:
    if centered:
        return 1 + n_samples // hop
    if n_samples < frame_length:
        return 0
    return 1 + (n_samples - frame_length) // hop


def frame_signal(samples, frame_length: int, hop: int, centered: bool = True) -> np.ndarray:
    """Slice a signal into (n_frames, frame_length) overlapping frames.

    Centered framing reflect-pads ``frame_length // 2`` on the left and the
    remainder on the right, so the count depends only on length and hop.
    """
    x = np.asarray(samples, dtype=np.float64)
    if hop <= 0 or frame_length < hop:
        raise InvalidFraming(f"hop {hop} must be positive and not exceed frame {frame_length}")
    n = frame_count(len(x), frame_length, hop, centered)
    if centered:
        left = frame_length // 2
        mode = "reflect" if len(x) > 1 else "constant"
        x = np.pad(x, (left, frame_length - left), mode=mode)
    if n <= 0:
        return np.zeros((0, frame_length))
    idx = np.arange(frame_length)[None, :] + hop * np.arange(n)[:, None]
    return x[idx]


def framing_params(sample_rate: int, frame_ms: float, hop_ms: float) -> tuple[int, int]:
    frame = int(round(frame_ms * sample_rate / 1000.0))
    hop = int(round(hop_ms * sample_rate / 1000.0))
    if hop <= 0 or frame < hop:
        raise InvalidFraming(f"hop {hop_ms} ms must be positive and not exceed frame {frame_ms} ms")
    return frame, hop


def stft(clip: AudioClip, frame_ms: float = DEFAULT_FRAME_MS, hop_ms: float = DEFAULT_HOP_MS,
         window: str = "hann", centered: bool = True) -> FrameMatrix:
    """Complex one-sided spectra of Hann-windowed frames."""
    if len(clip) == 0:
        raise EmptySignal("cannot take the STFT of an empty clip")
    if window != "hann":
        raise ValueError(f"unsupported window {window!r}")
    frame, hop = framing_params(clip.sample_rate, frame_ms, hop_ms)
    frames = frame_signal(clip.samples, frame, hop, centered) * hann(frame)
    spec = rfft(frames, next_pow2(frame))
    return FrameMatrix(spec, frame, hop, clip.sample_rate, centered)


@lru_cache(maxsize=32)
def _polyphase_kernels(half_taps: int, cutoff: float, phases: int) -> tuple[np.ndarray, int]:
    """Kernel rows for ``phases`` fractional offsets, shape (phases + 1, 2 * width)."""
    width = int(np.ceil(half_taps / cutoff))
    frac = np.arange(phases + 1)[:, None] / phases
    d = frac - np.arange(-width + 1, width + 1)[None, :]
    u = np.abs(d) * cutoff
    arg = np.clip(u / half_taps, 0.0, 1.0)
    k = cutoff * np.sinc(u) * np.i0(KAISER_BETA * np.sqrt(1.0 - arg * arg)) / np.i0(KAISER_BETA)
    k[u > half_taps] = 0.0
    k.flags.writeable = False
    return k, width


def resample_samples(x, ratio: float, half_taps: int = RESAMPLE_HALF_TAPS,
                     out_len: int | None = None, phases: int = 1024) -> np.ndarray:
    """Band-limited interpolation of ``x`` onto a grid ``ratio`` times denser.

    Kaiser-windowed sinc with ``half_taps`` zero crossings per side. When
    decimating, the cutoff drops to ``ratio`` of the input Nyquist and the
    kernel stretches accordingly. Fractional positions are rounded to one of
    ``phases`` precomputed kernels.
    """
    x = np.asarray(x, dtype=np.float64)
    if out_len is None:
        out_len = int(round(len(x) * ratio))
    if out_len == 0 or len(x) == 0:
        return np.zeros(out_len)
    cutoff = min(1.0, ratio)
    kernels, width = _polyphase_kernels(half_taps, round(cutoff, 12), phases)
    t = np.arange(out_len) / ratio
    base = np.floor(t).astype(np.int64)
    phase = np.rint((t - base) * phases).astype(np.int64)
    padded = np.concatenate([np.zeros(width), x, np.zeros(width + 1)])
    offsets = np.arange(-width + 1, width + 1) + width
    out = np.empty(out_len)
    block = max(1, 2 ** 17 // (2 * width))
    for start in range(0, out_len, block):
        sl = slice(start, min(out_len, start + block))
        frames = padded[base[sl, None] + offsets[None, :]]
        out[sl] = np.einsum("ij,ij->i", frames, kernels[phase[sl]])
    return out


def resample(clip: AudioClip, new_rate: int) -> AudioClip:
    if new_rate <= 0:
        raise ValueError("new_rate must be positive")
    if new_rate == clip.sample_rate:
        return clip.derive(clip.samples.copy(), f"resample({new_rate})")
    out_len = int(round(len(clip) * new_rate / clip.sample_rate))
    y = resample_samples(clip.samples, new_rate / clip.sample_rate, out_len=out_len)
    return clip.derive(y, f"resample({new_rate})", sample_rate=int(new_rate))


def dominant_frequency(clip: AudioClip) -> float:
    """Peak frequency of a full-length Hann-windowed spectrum, in Hz.

    The peak bin is refined by a parabola through the log magnitudes of the
    bin and its two neighbours.
    """
    n = len(clip)
    if n < 4096:
        raise SignalTooShort(f"need at least 4096 samples, got {n}")
    nfft = next_pow2(n)
    mag = np.abs(rfft(clip.samples * hann(n), nfft))
    k = int(np.argmax(mag))
    if k == 0 or k == len(mag) - 1:
        return k * clip.sample_rate / nfft
    a, b, c = np.log(mag[k - 1:k + 2] + 1e-300)
    denom = a - 2 * b + c
    delta = 0.0 if denom == 0 else 0.5 * (a - c) / denom
    return (k + delta) * clip.sample_rate / nfft
