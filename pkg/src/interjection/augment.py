"""Data augmentation: tempo, pitch, background mixing, white noise, and plans.

Every effect is a pure function of its inputs (and seed). Outputs keep the
input's label and speaker and append one descriptor to the provenance.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from interjection.audio_io import AudioClip
from interjection.dsp import hann, resample_samples
from interjection.errors import EmptyScene, PlanInvalid, SignalTooShort
from interjection.seeding import derive_seed

TEMPO_RANGE = (0.86, 1.14)
SEMITONE_RANGE = (-2.4, 2.4)
W_ORIG_RANGE = (0.83, 0.93)

WSOLA_SEGMENT_MS = 30.0
WSOLA_TOLERANCE_MS = 7.5


def _fmt(value: float) -> str:
    return f"{value:g}"


def wsola(x, factor: float, sample_rate: int, out_len: Optional[int] = None,
          segment_ms: float = WSOLA_SEGMENT_MS, tolerance_ms: float = WSOLA_TOLERANCE_MS) -> np.ndarray:
    """Time-scale ``x`` by 1/``factor`` with waveform-similarity overlap-add.

    Hann-windowed segments are laid down at half-segment synthesis hops. Each
    analysis segment is shifted within +-tolerance to best match (normalized
    cross-correlation) the natural continuation of the previously copied one.
    """
    x = np.asarray(x, dtype=np.float64)
    seg = int(round(segment_ms * sample_rate / 1000.0))
    seg += seg % 2
    tol = int(round(tolerance_ms * sample_rate / 1000.0))
    if len(x) < seg:
        raise SignalTooShort(f"signal of {len(x)} samples is shorter than one {seg}-sample segment")
    if out_len is None:
        out_len = int(round(len(x) / factor))
    syn_hop = seg // 2
    ana_hop = syn_hop * factor
    n_frames = -(-out_len // syn_hop) + 1
    half = seg // 2

    front = half + tol
    back = int(np.ceil(n_frames * ana_hop)) + seg + syn_hop + 2 * tol
    xp = np.concatenate([np.zeros(front), x, np.zeros(max(0, back - len(x)))])
    energy = np.concatenate([[0.0], np.cumsum(xp * xp)])

    window = hann(seg)
    y = np.zeros((n_frames - 1) * syn_hop + seg)
    prev = None
    for m in range(n_frames):
        nominal = int(round(m * ana_hop)) - half + front
        if prev is None:
            start = nominal
        else:
            template = xp[prev + syn_hop: prev + syn_hop + seg]
            region = xp[nominal - tol: nominal + tol + seg]
            corr = np.correlate(region, template, mode="valid")
            lo = nominal - tol
            seg_energy = energy[lo + seg: lo + seg + 2 * tol + 1] - energy[lo: lo + 2 * tol + 1]
            score = corr / np.sqrt(np.maximum(seg_energy, 1e-20))
            start = lo + int(np.argmax(score))
        y[m * syn_hop: m * syn_hop + seg] += window * xp[start: start + seg]
        prev = start
    return y[half: half + out_len]


def change_tempo(clip: AudioClip, factor: float) -> AudioClip:
    """Speed up (factor > 1) or slow down (factor < 1) without changing pitch."""
    if factor <= 0:
        raise ValueError("tempo factor must be positive")
    if factor == 1.0:
        if len(clip) < int(round(WSOLA_SEGMENT_MS * clip.sample_rate / 1000.0)):
            raise SignalTooShort("clip shorter than one WSOLA segment")
        return clip.derive(clip.samples.copy(), f"tempo({_fmt(factor)})")
    y = wsola(clip.samples, factor, clip.sample_rate)
    return clip.derive(y, f"tempo({_fmt(factor)})")


def shift_pitch(clip: AudioClip, semitones: float) -> AudioClip:
    """Shift pitch by ``semitones`` (100 cents each) keeping the duration.

    Resampling by 2**(-semitones/12) moves the pitch and changes the length;
    a tempo change by the same ratio then restores the original length.
    """
    ratio = 2.0 ** (-semitones / 12.0)
    n = len(clip)
    if semitones == 0:
        if n < int(round(WSOLA_SEGMENT_MS * clip.sample_rate / 1000.0)):
            raise SignalTooShort("clip shorter than one WSOLA segment")
        return clip.derive(clip.samples.copy(), f"pitch({_fmt(semitones)})")
    squeezed = resample_samples(clip.samples, ratio)
    y = wsola(squeezed, ratio, clip.sample_rate, out_len=n)
    return clip.derive(y, f"pitch({_fmt(semitones)})")


def scene_offset(scene_len: int, clip_len: int, seed: int) -> int:
    rng = np.random.default_rng(seed)
    if scene_len >= clip_len:
        return int(rng.integers(0, scene_len - clip_len + 1))
    return int(rng.integers(0, scene_len))


def scene_segment(scene, n: int, offset: int) -> np.ndarray:
    """``n`` samples of ``scene`` starting at ``offset``, looping if short."""
    scene = np.asarray(scene, dtype=np.float64)
    if len(scene) >= n:
        return scene[offset: offset + n].copy()
    return np.resize(np.roll(scene, -offset), n)


def mix_samples(orig, bgn, w_orig: float) -> np.ndarray:
    """Weighted sum of original and background, before clamping."""
    w_bgn = 1.0 - w_orig
    return w_orig * np.asarray(orig, dtype=np.float64) + w_bgn * np.asarray(bgn, dtype=np.float64)


def mix_background(clip: AudioClip, scene: AudioClip, w_orig: float, seed: int = 0) -> AudioClip:
    if not 0.0 <= w_orig <= 1.0:
        raise ValueError(f"w_orig must lie in [0, 1], got {w_orig}")
    if len(scene) == 0:
        raise EmptyScene(f"scene {scene.name!r} has no samples")
    offset = scene_offset(len(scene), len(clip), seed)
    bgn = scene_segment(scene.samples, len(clip), offset)
    out = np.clip(mix_samples(clip.samples, bgn, w_orig), -1.0, 1.0)
    return clip.derive(out, f"bgn({scene.name},{_fmt(w_orig)},{offset})")


def add_white_noise(clip: AudioClip, amplitude: float, seed: int = 0) -> AudioClip:
    if not 0.0 <= amplitude < 1.0:
        raise ValueError(f"white-noise amplitude must lie in [0, 1), got {amplitude}")
    u = np.random.default_rng(seed).uniform(-1.0, 1.0, len(clip))
    out = np.clip(clip.samples + amplitude * u, -1.0, 1.0)
    return clip.derive(out, f"noise({_fmt(amplitude)})")


@dataclass(frozen=True)
class SceneMix:
    scene: str
    weights: tuple[float, ...]


@dataclass(frozen=True)
class AugmentPlan:
    """Declarative effect grid.

    With ``compose`` set, tempo and pitch values are crossed with each other
    and every background (scene, weight) pair is also applied on top of each
    tempo/pitch variant. Without it each value is applied to the original only.
    """

    tempo_factors: tuple[float, ...] = ()
    pitch_semitones: tuple[float, ...] = ()
    scenes: tuple[SceneMix, ...] = ()
    white_noise: Optional[float] = None
    compose: bool = True
    allow_out_of_range: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentPlan":
        known = {"tempo_factors", "pitch_semitones", "scenes", "white_noise", "compose", "allow_out_of_range"}
        unknown = set(d) - known
        if unknown:
            raise PlanInvalid(f"unknown plan keys: {sorted(unknown)}")
        scenes = []
        for s in d.get("scenes", ()):
            if isinstance(s, dict):
                scenes.append(SceneMix(str(s["scene"]), tuple(float(w) for w in s["weights"])))
            else:
                name, weights = s
                scenes.append(SceneMix(str(name), tuple(float(w) for w in weights)))
        wn = d.get("white_noise")
        return cls(
            tempo_factors=tuple(float(f) for f in d.get("tempo_factors", ())),
            pitch_semitones=tuple(float(s) for s in d.get("pitch_semitones", ())),
            scenes=tuple(scenes),
            white_noise=None if wn is None else float(wn),
            compose=bool(d.get("compose", True)),
            allow_out_of_range=bool(d.get("allow_out_of_range", False)),
        )

    def to_dict(self) -> dict:
        return {
            "tempo_factors": list(self.tempo_factors),
            "pitch_semitones": list(self.pitch_semitones),
            "scenes": [{"scene": s.scene, "weights": list(s.weights)} for s in self.scenes],
            "white_noise": self.white_noise,
            "compose": self.compose,
            "allow_out_of_range": self.allow_out_of_range,
        }

    @property
    def background_pairs(self) -> list[tuple[str, float]]:
        return [(s.scene, w) for s in self.scenes for w in s.weights]

    @property
    def is_empty(self) -> bool:
        return expected_count(self) == 0

    def validate(self) -> None:
        for f in self.tempo_factors:
            if f <= 0:
                raise PlanInvalid(f"tempo factor {f} must be positive")
        for _, w in self.background_pairs:
            if not 0.0 <= w <= 1.0:
                raise PlanInvalid(f"background weight {w} outside [0, 1]")
        if self.white_noise is not None and not 0.0 <= self.white_noise < 1.0:
            raise PlanInvalid(f"white-noise amplitude {self.white_noise} outside [0, 1)")
        if self.allow_out_of_range:
            return
        lo, hi = TEMPO_RANGE
        for f in self.tempo_factors:
            if not lo <= f <= hi:
                raise PlanInvalid(f"tempo factor {f} outside [{lo}, {hi}]")
        lo, hi = SEMITONE_RANGE
        for s in self.pitch_semitones:
            if not lo <= s <= hi:
                raise PlanInvalid(f"pitch shift {s} semitones outside [{lo}, {hi}]")
        lo, hi = W_ORIG_RANGE
        for name, w in self.background_pairs:
            if not lo <= w <= hi:
                raise PlanInvalid(f"w_orig {w} for scene {name!r} outside [{lo}, {hi}]")


def expected_count(plan: AugmentPlan) -> int:
    """Number of clips ``expand_plan`` generates from one original."""
    t, p, b = len(plan.tempo_factors), len(plan.pitch_semitones), len(plan.background_pairs)
    noise = 0 if plan.white_noise is None else 1
    if plan.compose:
        variants = (t + 1) * (p + 1) - 1
        return variants + b + variants * b + noise
    return t + p + b + noise


def _tempo_pitch_grid(plan: AugmentPlan) -> list[tuple[Optional[float], Optional[float]]]:
    if plan.compose:
        grid = [(f, None) for f in plan.tempo_factors]
        grid += [(None, s) for s in plan.pitch_semitones]
        grid += list(itertools.product(plan.tempo_factors, plan.pitch_semitones))
        return grid
    return [(f, None) for f in plan.tempo_factors] + [(None, s) for s in plan.pitch_semitones]


def expand_plan(plan: AugmentPlan, clip: AudioClip, seed: int, scenes=None) -> list[AudioClip]:
    """Generate every augmented variant of ``clip`` under ``plan``.

    The original itself is never emitted. Variants come in a fixed order:
    tempo/pitch variants, background mixes of the original, background mixes
    of each tempo/pitch variant (compose only), then white noise.
    """
    plan.validate()
    pairs = plan.background_pairs
    if pairs:
        if scenes is None:
            from interjection.scenes import SceneLibrary

            scenes = SceneLibrary.bundled()
        missing = sorted({name for name, _ in pairs} - set(scenes))
        if missing:
            raise PlanInvalid(f"plan references unknown scenes: {missing}")

    variants = []
    for f, s in _tempo_pitch_grid(plan):
        v = clip
        if f is not None:
            v = change_tempo(v, f)
        if s is not None:
            v = shift_pitch(v, s)
        variants.append(v)

    out = list(variants)
    bases = [clip] + (variants if plan.compose else [])
    for bi, base in enumerate(bases):
        for pi, (name, w) in enumerate(pairs):
            out.append(mix_background(base, scenes[name], w, seed=derive_seed(seed, "bgn", bi, pi)))
    if plan.white_noise is not None:
        out.append(add_white_noise(clip, plan.white_noise, seed=derive_seed(seed, "noise")))
    return out


def provenance_slug(provenance: Sequence[str]) -> str:
    """Filesystem-safe name fragment for a provenance list."""
    if not provenance:
        return "clean"
    parts = []
    for p in provenance:
        parts.append("".join(c if c.isalnum() or c in ".-" else "_" for c in p).strip("_"))
    return "+".join(parts)
