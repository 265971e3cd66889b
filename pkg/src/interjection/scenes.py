"""Background scenes for mixing.

The bundled scenes are procedural stand-ins (shaped noise plus a few tonal
sources), one per acoustic scene name. Real recordings can be loaded from a
directory of WAV files instead; the file stem becomes the scene name.
"""

from __future__ import annotations

from collections.abc import Mapping
from functools import lru_cache
from pathlib import Path

import numpy as np

from interjection.audio_io import AudioClip, read_wav
from interjection.dsp import resample
from interjection.errors import EmptyScene, IoFailure
from interjection.seeding import rng_for

SCENE_NAMES = (
    "baby_gibberish",
    "ambulance",
    "crowd_laughing",
    "football_crowd",
    "mall",
    "passing_bus",
    "rain",
    "street_traffic",
    "tv",
)
SCENE_SECONDS = 3.0
SCENE_RMS = 0.25
MIN_SCENE_SECONDS = 1.55


def _shaped_noise(rng, n, rate, gain_fn):
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1.0 / rate)
    y = np.fft.irfft(spec * gain_fn(f), n)
    return y / (np.std(y) + 1e-12)


def _band(lo, hi, slope=0.0):
    def gain(f):
        g = np.where((f >= lo) & (f <= hi), 1.0, 0.0)
        edge = np.exp(-0.5 * ((f - np.clip(f, lo, hi)) / (0.25 * lo + 50.0)) ** 2)
        g = np.maximum(g, edge)
        return g * (1.0 + f / 1000.0) ** slope
    return gain


def _harmonic(f0_track, rate, n_harm=8, decay=1.0):
    phase = 2 * np.pi * np.cumsum(f0_track) / rate
    y = np.zeros_like(f0_track)
    for k in range(1, n_harm + 1):
        ok = k * f0_track < rate / 2
        y += ok * np.sin(k * phase) / k ** decay
    return y


def _syllables(rng, n, rate, rate_hz, duty=0.6):
    t = np.arange(n) / rate
    jitter = np.cumsum(rng.normal(0, 0.3, n)) / rate
    env = np.clip(np.sin(2 * np.pi * rate_hz * (t + jitter)), 0, None) ** 2
    gate = (rng.random(int(n / rate * rate_hz) + 2) < duty).astype(float)
    return env * np.repeat(gate, int(np.ceil(rate / rate_hz)))[:n]


def _generate(name: str, rate: int, seconds: float) -> np.ndarray:
    rng = rng_for(0, "scene", name)
    n = int(round(seconds * rate))
    t = np.arange(n) / rate
    if name == "baby_gibberish":
        f0 = 420 + 60 * np.sin(2 * np.pi * 3.1 * t) + 30 * rng.standard_normal(n).cumsum() / np.sqrt(n)
        y = _harmonic(f0, rate, 6, 1.3) * _syllables(rng, n, rate, 3.5)
        y = y + 0.1 * _shaped_noise(rng, n, rate, _band(100, 3000))
    elif name == "ambulance":
        f0 = 1000 + 350 * np.sign(np.sin(2 * np.pi * 0.7 * t))
        y = _harmonic(f0, rate, 5, 1.5) + 0.3 * _shaped_noise(rng, n, rate, _band(50, 500))
    elif name == "crowd_laughing":
        y = np.zeros(n)
        for _ in range(5):
            f0 = rng.uniform(150, 320) * (1 + 0.05 * np.sin(2 * np.pi * rng.uniform(3, 6) * t))
            y += _harmonic(f0, rate, 6) * _syllables(rng, n, rate, rng.uniform(4, 6), 0.5)
        y = y + 0.5 * _shaped_noise(rng, n, rate, _band(200, 4000))
    elif name == "football_crowd":
        swell = 1 + 0.4 * np.sin(2 * np.pi * 0.3 * t + rng.uniform(0, 6))
        y = _shaped_noise(rng, n, rate, _band(250, 2500, -0.5)) * swell
    elif name == "mall":
        y = _shaped_noise(rng, n, rate, _band(200, 3000, -0.3))
        y = y * (0.7 + 0.3 * _syllables(rng, n, rate, 2.0, 0.8))
        for f in (262.0, 330.0, 392.0):
            y += 0.3 * np.sin(2 * np.pi * f * t)
    elif name == "passing_bus":
        swell = np.exp(-0.5 * ((t - 0.55 * seconds) / (0.3 * seconds)) ** 2) + 0.2
        y = _shaped_noise(rng, n, rate, _band(30, 400, -1.5)) * swell
        y = y + 0.4 * _harmonic(np.full(n, 60.0), rate, 6)
    elif name == "rain":
        y = _shaped_noise(rng, n, rate, _band(1000, 7500))
        drops = (rng.random(n) < 0.002) * rng.uniform(2, 5, n)
        y = y + np.convolve(drops, np.exp(-np.arange(64) / 8.0), mode="same")
    elif name == "street_traffic":
        swell = 1 + 0.5 * np.sin(2 * np.pi * 0.2 * t + rng.uniform(0, 6))
        y = _shaped_noise(rng, n, rate, _band(40, 900, -1.0)) * swell
        y = y + 0.2 * _shaped_noise(rng, n, rate, _band(2000, 4000))
    elif name == "tv":
        f0 = 130 + 25 * np.sin(2 * np.pi * 0.9 * t)
        voice = _harmonic(f0, rate, 12, 0.8) * _syllables(rng, n, rate, 4.5, 0.7)
        y = voice + 0.4 * _shaped_noise(rng, n, rate, _band(300, 3400))
    else:
        raise KeyError(name)
    y = y / (np.sqrt(np.mean(y * y)) + 1e-12) * SCENE_RMS
    return np.clip(y, -1.0, 1.0)


@lru_cache(maxsize=None)
def _bundled_scene(name: str, rate: int) -> AudioClip:
    return AudioClip(_generate(name, rate, SCENE_SECONDS), sample_rate=rate, name=name)


class SceneLibrary(Mapping):
    """Named background clips, all at one sample rate."""

    def __init__(self, scenes: dict[str, AudioClip]):
        for name, clip in scenes.items():
            if len(clip) == 0:
                raise EmptyScene(f"scene {name!r} has no samples")
        self._scenes = dict(scenes)

    def __getitem__(self, name):
        return self._scenes[name]

    def __iter__(self):
        return iter(self._scenes)

    def __len__(self):
        return len(self._scenes)

    def subset(self, names) -> "SceneLibrary":
        return SceneLibrary({n: self._scenes[n] for n in names})

    @classmethod
    def bundled(cls, sample_rate: int = 16000) -> "SceneLibrary":
        return cls({n: _bundled_scene(n, sample_rate) for n in SCENE_NAMES})

    @classmethod
    def from_dir(cls, path, sample_rate: int = 16000) -> "SceneLibrary":
        path = Path(path)
        if not path.is_dir():
            raise IoFailure(f"scene directory not found: {path}")
        scenes = {}
        for wav in sorted(path.glob("*.wav")):
            clip = read_wav(wav)
            if clip.sample_rate != sample_rate:
                clip = resample(clip, sample_rate)
            scenes[wav.stem] = AudioClip(clip.samples, sample_rate, name=wav.stem)
        if not scenes:
            raise EmptyScene(f"no .wav scenes in {path}")
        return cls(scenes)
