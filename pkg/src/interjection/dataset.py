"""Corpus handling: length gate, silence padding, manifests, speaker splits,
and a deterministic synthetic interjection corpus."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from interjection import CLASSES, SAMPLE_RATE
from interjection.audio_io import AudioClip, read_wav, write_wav
from interjection.dsp import resample
from interjection.errors import (ClipTooLong, ConfigError, IoFailure, OverlappingSplit,
                                 UnknownLabel, UnknownSpeaker)
from interjection.seeding import derive_seed, rng_for

MIN_SECONDS = 0.45
MAX_SECONDS = 1.55
CANONICAL_SECONDS = 1.55
CLIP_PITCH_JITTER = 0.5


def seconds_to_samples(seconds: float, rate: int = SAMPLE_RATE) -> int:
    return int(round(seconds * rate))


class Rejection(str, Enum):
    TOO_SHORT = "TooShort"
    TOO_LONG = "TooLong"


@dataclass(frozen=True)
class GateResult:
    accepted: bool
    reason: Optional[Rejection] = None

    def __bool__(self):
        return self.accepted


def length_gate(clip: AudioClip, min_s: float = MIN_SECONDS, max_s: float = MAX_SECONDS) -> GateResult:
    """Accept clips whose duration lies in [min_s, max_s], bounds inclusive."""
    n = len(clip)
    if n < seconds_to_samples(min_s, clip.sample_rate):
        return GateResult(False, Rejection.TOO_SHORT)
    if n > seconds_to_samples(max_s, clip.sample_rate):
        return GateResult(False, Rejection.TOO_LONG)
    return GateResult(True)


def draw_leading_silence(total: int, seed: int) -> int:
    """Leading-silence length in samples, uniform over 0..total."""
    return int(np.random.default_rng(seed).integers(0, total + 1))


def pad_with_leading(clip: AudioClip, leading: int, canonical_s: float = CANONICAL_SECONDS) -> AudioClip:
    target = seconds_to_samples(canonical_s, clip.sample_rate)
    n = len(clip)
    if n > target:
        raise ClipTooLong(f"clip of {n} samples exceeds canonical {target}")
    if not 0 <= leading <= target - n:
        raise ValueError(f"leading silence {leading} outside [0, {target - n}]")
    out = np.zeros(target)
    out[leading:leading + n] = clip.samples
    return clip.derive(out)


def pad_to_canonical(clip: AudioClip, seed: int, canonical_s: float = CANONICAL_SECONDS) -> AudioClip:
    """Embed ``clip`` in silence at a random offset to reach the canonical length.

    The leading-silence length is drawn uniformly from the total silence
    needed; the rest goes at the end.
    """
    target = seconds_to_samples(canonical_s, clip.sample_rate)
    if len(clip) > target:
        raise ClipTooLong(f"clip of {len(clip)} samples exceeds canonical {target}")
    leading = draw_leading_silence(target - len(clip), seed)
    return pad_with_leading(clip, leading, canonical_s)


def active_region(samples, threshold: float = 1e-4) -> tuple[int, int]:
    """[start, stop) of the span between the first and last sample above ``threshold``."""
    loud = np.nonzero(np.abs(samples) > threshold)[0]
    if len(loud) == 0:
        return 0, 0
    return int(loud[0]), int(loud[-1]) + 1


def fit_to_canonical(clip: AudioClip, seed: int, canonical_s: float = CANONICAL_SECONDS) -> AudioClip:
    """Bring an effect output back to the canonical length.

    Short clips are padded as in ``pad_to_canonical``. Long clips are cropped
    at a random offset that keeps the whole active region when it fits;
    otherwise the crop is centred on the active region.
    """
    target = seconds_to_samples(canonical_s, clip.sample_rate)
    n = len(clip)
    if n == target:
        return clip
    if n < target:
        return pad_to_canonical(clip, seed, canonical_s)
    start, stop = active_region(clip.samples)
    if stop - start <= target:
        lo = max(0, stop - target)
        hi = min(start, n - target)
        offset = int(np.random.default_rng(seed).integers(lo, hi + 1))
    else:
        offset = (start + stop - target) // 2
    return clip.derive(clip.samples[offset:offset + target].copy())


# --- manifests -------------------------------------------------------------

@dataclass(frozen=True)
class ManifestRow:
    path: str
    label: str
    speaker: str
    duration_s: float
    provenance: tuple[str, ...] = ()

    def to_json(self) -> str:
        return json.dumps({
            "path": self.path, "label": self.label, "speaker": self.speaker,
            "duration_s": self.duration_s, "provenance": list(self.provenance),
        }, sort_keys=False)


@dataclass
class DatasetManifest:
    rows: list[ManifestRow] = field(default_factory=list)
    root: Path = Path(".")

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def resolve(self, row: ManifestRow) -> Path:
        p = Path(row.path)
        return p if p.is_absolute() else self.root / p

    def speakers(self) -> list[str]:
        return sorted({r.speaker for r in self.rows})

    def load_clip(self, row: ManifestRow) -> AudioClip:
        clip = read_wav(self.resolve(row))
        if clip.sample_rate != SAMPLE_RATE:
            clip = resample(clip, SAMPLE_RATE)
        return AudioClip(clip.samples, clip.sample_rate, row.label, row.speaker,
                         row.provenance, Path(row.path).stem)

    def clips(self) -> list[AudioClip]:
        return [self.load_clip(r) for r in self.rows]

    def write(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        text = "".join(r.to_json() + "\n" for r in self.rows)
        path.write_text(text, encoding="utf-8")

    @classmethod
    def read(cls, path, check_paths: bool = True) -> "DatasetManifest":
        path = Path(path)
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise IoFailure(f"cannot read manifest {path}: {exc}") from exc
        m = cls(root=path.parent)
        for i, line in enumerate(lines, 1):
            if not line.strip():
                continue
            d = json.loads(line)
            if d["label"] not in CLASSES:
                raise UnknownLabel(f"{path}:{i}: label {d['label']!r} not in {CLASSES}")
            row = ManifestRow(d["path"], d["label"], str(d["speaker"]), float(d["duration_s"]),
                              tuple(d.get("provenance", ())))
            if check_paths and not m.resolve(row).exists():
                raise IoFailure(f"{path}:{i}: missing audio file {row.path}")
            m.rows.append(row)
        return m


def write_clips(clips: Sequence[AudioClip], root, subdir: str = "") -> DatasetManifest:
    """Write clips as ``<root>/<subdir>/<label>/<name>.wav`` and return their manifest."""
    root = Path(root)
    manifest = DatasetManifest(root=root)
    for clip in clips:
        rel = Path(subdir) / clip.label / f"{clip.name}.wav"
        write_wav(clip, root / rel)
        manifest.rows.append(ManifestRow(rel.as_posix(), clip.label, clip.speaker or "unknown",
                                         round(clip.duration_seconds, 6), clip.provenance))
    return manifest


def speaker_from_stem(stem: str) -> str:
    return stem.split("_", 1)[0] if "_" in stem else "unknown"


def scan_corpus(root) -> list[AudioClip]:
    """Load ``<root>/<label>/<clip>.wav`` files, resampled to the pipeline rate.

    The speaker id is the file-stem prefix before the first underscore.
    """
    root = Path(root)
    if not root.is_dir():
        raise ConfigError(f"corpus root not found: {root}")
    clips = []
    for label_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        if label_dir.name not in CLASSES:
            raise UnknownLabel(f"folder {label_dir.name!r} is not one of {CLASSES}")
        for wav in sorted(label_dir.glob("*.wav")):
            clip = read_wav(wav)
            if clip.sample_rate != SAMPLE_RATE:
                clip = resample(clip, SAMPLE_RATE)
            clips.append(AudioClip(clip.samples, SAMPLE_RATE, label_dir.name,
                                   speaker_from_stem(wav.stem), (), wav.stem))
    return clips


# --- speaker splits --------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    train_speakers: tuple[str, ...]
    validation_speakers: tuple[str, ...] = ()
    test_speakers: tuple[str, ...] = ()

    def __post_init__(self):
        sets = [set(self.train_speakers), set(self.validation_speakers), set(self.test_speakers)]
        seen = {}
        for name, s in zip(("train", "validation", "test"), sets):
            for spk in s:
                if spk in seen:
                    raise OverlappingSplit(f"speaker {spk!r} in both {seen[spk]} and {name}")
                seen[spk] = name

    @classmethod
    def from_dict(cls, d: dict) -> "SplitSpec":
        return cls(tuple(map(str, d.get("train", ()))), tuple(map(str, d.get("validation", ()))),
                   tuple(map(str, d.get("test", ()))))


def split_by_speaker(items: Iterable, spec: SplitSpec):
    """Partition items (anything with a ``speaker``) into train/validation/test lists."""
    items = list(items)
    present = {it.speaker for it in items}
    wanted = set(spec.train_speakers) | set(spec.validation_speakers) | set(spec.test_speakers)
    missing = sorted(wanted - present)
    if missing:
        raise UnknownSpeaker(f"speakers not in corpus: {missing}")
    train = [it for it in items if it.speaker in spec.train_speakers]
    val = [it for it in items if it.speaker in spec.validation_speakers]
    test = [it for it in items if it.speaker in spec.test_speakers]
    return train, val, test


# --- synthetic corpus ------------------------------------------------------

def speaker_profile(seed: int, speaker: int) -> tuple[float, float]:
    """(pitch offset in semitones, tempo factor) for a synthetic speaker.

    Drawn uniformly from +-1.5 semitones and +-8% by a generator keyed on
    (seed, speaker index).
    """
    rng = rng_for(seed, "speaker", speaker)
    return float(rng.uniform(-1.5, 1.5)), float(1.0 + rng.uniform(-0.08, 0.08))


def _formant_gain(f, formants, bandwidths):
    g = np.full_like(f, 0.02)
    for fc, bw in zip(formants, bandwidths):
        g = g + 1.0 / (1.0 + ((f - fc) / bw) ** 2)
    return g


def _voice(f0, formants, rate, breath=0.02, rng=None, bandwidths=(90.0, 120.0, 160.0)):
    """Harmonic source shaped by time-varying formants, sample by sample."""
    phase = 2 * np.pi * np.cumsum(f0) / rate
    y = np.zeros_like(f0)
    n_harm = int(min(40, (rate / 2 - 200) / max(60.0, f0.min())))
    for k in range(1, n_harm + 1):
        fk = k * f0
        amp = _formant_gain(fk, formants, bandwidths) / k ** 0.7
        amp = np.where(fk < rate / 2 - 200, amp, 0.0)
        y += amp * np.sin(k * phase)
    if rng is not None and breath > 0:
        y += breath * rng.standard_normal(len(f0)) * np.std(y)
    return y


def _envelope(t, dur, attack=0.04, release=0.08):
    a = np.clip(t / attack, 0, 1)
    r = np.clip((dur - t) / release, 0, 1)
    return np.sin(0.5 * np.pi * a) * np.sin(0.5 * np.pi * r)


def _synth_clip(label: str, dur: float, pitch: float, rng, rate: int) -> np.ndarray:
    n = int(round(dur * rate))
    t = np.arange(n) / rate
    u = t / dur
    shift = 2.0 ** (pitch / 12.0)
    fj = rng.uniform(0.95, 1.05)
    if label == "nah":
        f0 = (230 - 90 * u) * shift
        f1 = np.where(u < 0.15, 300, 750) * fj
        f2 = np.where(u < 0.15, 1500, 1250) * fj
        y = _voice(f0, (f1, f2, 2600 * fj), rate, rng=rng) * _envelope(t, dur)
    elif label == "mmm":
        f0 = (125 + 4 * np.sin(2 * np.pi * 3 * t)) * shift
        y = _voice(f0, (250 * fj, 1100 * fj, 2300 * fj), rate, rng=rng, bandwidths=(60.0, 400.0, 400.0))
        y = y * _envelope(t, dur, 0.1, 0.15)
    elif label == "ahah":
        gap = (u > 0.42) & (u < 0.55)
        f0 = np.where(u < 0.5, 180, 260) * shift * (1 + 0.1 * u)
        y = _voice(f0, (800 * fj, 1300 * fj, 2700 * fj), rate, rng=rng)
        burst = _envelope(np.where(u < 0.5, t, t - 0.55 * dur), 0.42 * dur, 0.03, 0.05)
        y = y * np.where(gap, 0.0, burst)
        y = y + 0.15 * np.std(y) * rng.standard_normal(n) * gap
    elif label == "oy":
        f0 = (150 + 110 * np.sin(np.pi * u)) * shift
        f1 = (500 - 200 * u) * fj
        f2 = (850 + 1500 * u ** 1.5) * fj
        y = _voice(f0, (f1, f2, 2800 * fj), rate, rng=rng) * _envelope(t, dur)
    elif label == "negative":
        n_syl = int(rng.integers(1, 4))
        cuts = np.sort(rng.uniform(0, 1, n_syl - 1))
        bounds = np.concatenate([[0.0], cuts, [1.0]])
        seg = np.searchsorted(bounds, u, side="right") - 1
        seg = np.clip(seg, 0, n_syl - 1)
        base = rng.uniform(110, 240, n_syl)
        slope = rng.uniform(-60, 60, n_syl)
        local = (u - bounds[seg]) / np.maximum(bounds[seg + 1] - bounds[seg], 1e-3)
        f0 = (base[seg] + slope[seg] * local) * shift
        f1 = rng.uniform(300, 900, n_syl)[seg]
        f2 = rng.uniform(900, 2500, n_syl)[seg]
        y = _voice(f0, (f1, f2, 2900.0), rate, rng=rng)
        env = np.sin(np.pi * np.clip(local, 0, 1)) ** 0.5
        y = y * env * _envelope(t, dur, 0.02, 0.04)
    else:
        raise UnknownLabel(label)
    peak = np.max(np.abs(y)) + 1e-12
    return y / peak * rng.uniform(0.3, 0.8)


def synth_corpus(per_class, speakers: int, seed: int = 0, rate: int = SAMPLE_RATE) -> list[AudioClip]:
    """Deterministic stand-in corpus of gated, padded synthetic interjections.

    ``per_class`` is either one count for every class or a mapping from label
    to count. Each class has its own pitch contour, formant pattern and
    envelope; each speaker gets a fixed pitch and tempo offset.
    """
    if isinstance(per_class, int):
        per_class = {c: per_class for c in CLASSES}
    unknown = set(per_class) - set(CLASSES)
    if unknown:
        raise UnknownLabel(f"unknown classes {sorted(unknown)}")
    if speakers <= 0 or any(v <= 0 for v in per_class.values()):
        raise ValueError("speaker and per-class counts must be positive")
    clips = []
    for s in range(speakers):
        spk = f"S{s + 1}"
        pitch, tempo = speaker_profile(seed, s)
        for label in CLASSES:
            for i in range(per_class.get(label, 0)):
                rng = rng_for(seed, "synth", spk, label, i)
                dur = float(np.clip(rng.uniform(0.5, 1.4) / tempo, 0.5, 1.4))
                jitter = rng.uniform(-CLIP_PITCH_JITTER, CLIP_PITCH_JITTER)
                raw = _synth_clip(label, dur, pitch + jitter, rng, rate)
                name = f"{spk}_{label}_{i:04d}"
                clip = AudioClip(raw, rate, label, spk, (), name)
                if not length_gate(clip):
                    continue
                clips.append(pad_to_canonical(clip, derive_seed(seed, "pad", name)))
    return clips
