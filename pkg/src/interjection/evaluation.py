"""Metrics, scenario runners and report tables."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from interjection import CLASSES
from interjection.audio_io import AudioClip
from interjection.augment import AugmentPlan, mix_background
from interjection.dataset import SplitSpec, split_by_speaker
from interjection.errors import ConfigError, LengthMismatch, UnknownLabel
from interjection.features import FeatureConfig
from interjection.model import TrainConfig, encode_labels, predict, train
from interjection.pipeline import augmented_features, featurize_corpus
from interjection.seeding import derive_seed, rng_for

BASELINE = "clean"


@dataclass(frozen=True)
class Metrics:
    classes: tuple[str, ...]
    confusion: np.ndarray
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    macro_f1: float

    def per_class(self) -> dict[str, dict[str, float]]:
        return {c: {"precision": float(p), "recall": float(r), "f1": float(f)}
                for c, p, r, f in zip(self.classes, self.precision, self.recall, self.f1)}

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class": self.per_class(),
            "confusion": self.confusion.tolist(),
            "classes": list(self.classes),
        }


def compute_metrics(truth: Sequence[str], predicted: Sequence[str],
                    classes: Sequence[str] = CLASSES) -> Metrics:
    """Accuracy, per-class precision/recall/F1 and the confusion matrix.

    Macro-F1 averages over the classes that occur in either the truth or the
    predictions; a class with precision + recall = 0 scores F1 = 0.
    """
    if len(truth) != len(predicted):
        raise LengthMismatch(f"{len(truth)} truth labels vs {len(predicted)} predictions")
    classes = tuple(classes)
    t = encode_labels(truth, classes)
    p = encode_labels(predicted, classes)
    k = len(classes)
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    tp = np.diag(cm).astype(float)
    pred_count = cm.sum(axis=0)
    true_count = cm.sum(axis=1)
    precision = np.divide(tp, pred_count, out=np.zeros(k), where=pred_count > 0)
    recall = np.divide(tp, true_count, out=np.zeros(k), where=true_count > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros(k), where=denom > 0)
    present = (pred_count + true_count) > 0
    macro = float(f1[present].mean()) if present.any() else 0.0
    accuracy = float(tp.sum() / len(t)) if len(t) else 0.0
    return Metrics(classes, cm, accuracy, precision, recall, f1, macro)


def improvement_pct(accuracy: float, baseline: float) -> float:
    if baseline == 0:
        return float("nan")
    return (accuracy - baseline) / baseline * 100.0


@dataclass(frozen=True)
class ReportRow:
    training_set: str
    accuracy: float
    macro_f1: float
    improvement_pct: float


@dataclass
class ScenarioReport:
    title: str
    rows: list[ReportRow] = field(default_factory=list)

    @classmethod
    def build(cls, title: str, results: Mapping[str, Metrics]) -> "ScenarioReport":
        """Rows in ``results`` order; the baseline entry must be present."""
        if BASELINE not in results:
            raise ConfigError(f"report needs a {BASELINE!r} baseline row")
        base = results[BASELINE].accuracy
        rows = [ReportRow(name, m.accuracy, m.macro_f1, improvement_pct(m.accuracy, base))
                for name, m in results.items()]
        return cls(title, rows)

    @property
    def baseline(self) -> ReportRow:
        return next(r for r in self.rows if r.training_set == BASELINE)

    def row(self, name: str) -> ReportRow:
        return next(r for r in self.rows if r.training_set == name)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["training_set", "accuracy", "macro_f1", "improvement_pct"])
        for r in self.rows:
            w.writerow([r.training_set, f"{r.accuracy:.17g}", f"{r.macro_f1:.17g}", f"{r.improvement_pct:.17g}"])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv(), encoding="utf-8")

    def to_text(self) -> str:
        """Aligned table; the baseline shows bare accuracy, other rows add the change in percent."""
        cells = []
        for r in self.rows:
            acc = f"{r.accuracy:.3f}"
            if r.training_set != BASELINE:
                acc += f" ({r.improvement_pct:.1f}%)"
            cells.append((r.training_set, acc, f"{r.macro_f1:.3f}"))
        head = ("TRAINING DATASET", "ACCURACY", "MACRO-F1")
        widths = [max(len(head[i]), *(len(c[i]) for c in cells)) for i in range(3)]
        lines = [self.title, "  ".join(h.ljust(w) for h, w in zip(head, widths))]
        lines += ["  ".join(v.ljust(w) for v, w in zip(c, widths)) for c in cells]
        return "\n".join(line.rstrip() for line in lines) + "\n"


def average_reports(title: str, reports: Sequence[ScenarioReport]) -> ScenarioReport:
    """Row-wise mean accuracy and macro-F1; improvement recomputed from the means."""
    names = [r.training_set for r in reports[0].rows]
    acc = {n: float(np.mean([rep.row(n).accuracy for rep in reports])) for n in names}
    f1 = {n: float(np.mean([rep.row(n).macro_f1 for rep in reports])) for n in names}
    base = acc[BASELINE]
    return ScenarioReport(title, [ReportRow(n, acc[n], f1[n], improvement_pct(acc[n], base)) for n in names])


# --- scenario plumbing -----------------------------------------------------

@dataclass
class _Features:
    x: np.ndarray
    labels: list[str]

    @property
    def y(self):
        return encode_labels(self.labels)


def _features(clips, feature_cfg, jobs) -> _Features:
    return _Features(featurize_corpus(clips, feature_cfg, jobs), [c.label for c in clips])


def _training_set(clean: _Features, clips, plan: AugmentPlan, seed, scenes, feature_cfg, jobs,
                  include_originals) -> _Features:
    x, labels = augmented_features(clips, plan, seed, scenes, feature_cfg, jobs)
    if include_originals:
        x = np.concatenate([clean.x, x])
        labels = clean.labels + labels
    return _Features(x, labels)


def _fit_and_score(train_set: _Features, val: Optional[_Features], tests: Mapping[str, _Features],
                   cfg: TrainConfig) -> dict[str, Metrics]:
    params, _ = train(train_set.x, train_set.y,
                      None if val is None else val.x, None if val is None else val.y, cfg)
    out = {}
    for name, test in tests.items():
        pred = [CLASSES[i] for i in predict(params, test.x)]
        out[name] = compute_metrics(test.labels, pred)
    return out


def run_scenario1(clips: Sequence[AudioClip], plans: Mapping[str, AugmentPlan], split: SplitSpec,
                  cfg: TrainConfig, seed: int = 0, scenes=None, feature_cfg: Optional[FeatureConfig] = None,
                  jobs: int = 1, include_originals: bool = True,
                  test_clips: Optional[Mapping[str, Sequence[AudioClip]]] = None) -> dict[str, ScenarioReport]:
    """Unseen-speaker evaluation.

    One model is trained on the clean clips of the training speakers and one
    per augmentation plan; each is scored on every test speaker's clips. By
    default those are the test speakers' clean clips; ``test_clips`` can
    substitute other per-speaker test sets.
    """
    if len(split.train_speakers) < 1 or not split.test_speakers:
        raise ConfigError("scenario 1 needs training and test speakers")
    train_clips, val_clips, held = split_by_speaker(clips, split)
    if test_clips is None:
        test_clips = {s: [c for c in held if c.speaker == s] for s in split.test_speakers}
    clean = _features(train_clips, feature_cfg, jobs)
    val = _features(val_clips, feature_cfg, jobs) if val_clips else None
    tests = {s: _features(cs, feature_cfg, jobs) for s, cs in test_clips.items()}

    results = {s: {} for s in tests}
    sets = {BASELINE: None, **plans}
    for name, plan in sets.items():
        if plan is None:
            tr = clean
        else:
            tr = _training_set(clean, train_clips, plan, derive_seed(seed, "scenario1", name), scenes,
                               feature_cfg, jobs, include_originals)
        for s, m in _fit_and_score(tr, val, tests, cfg).items():
            results[s][name] = m
    return {s: ScenarioReport.build(f"Scenario 1: test speaker {s}", r) for s, r in results.items()}


def holdout_split(clips: Sequence[AudioClip], test_fraction: float, val_fraction: float, seed: int):
    """Per-class random split of one speaker's clips into train/validation/test."""
    train_c, val_c, test_c = [], [], []
    for label in CLASSES:
        group = [c for c in clips if c.label == label]
        order = rng_for(seed, "holdout", label).permutation(len(group))
        n_test = int(round(test_fraction * len(group)))
        n_val = int(round(val_fraction * len(group)))
        for rank, i in enumerate(order):
            dest = test_c if rank < n_test else val_c if rank < n_test + n_val else train_c
            dest.append(group[i])
    key = {id(c): i for i, c in enumerate(clips)}
    return tuple(sorted(part, key=lambda c: key[id(c)]) for part in (train_c, val_c, test_c))


def make_noisy_set(clips: Sequence[AudioClip], scenes, w_orig_range=(0.78, 0.9), seed: int = 0) -> list[AudioClip]:
    """Mix each clip with a randomly chosen scene at a random original-signal weight."""
    names = sorted(scenes)
    out = []
    for c in clips:
        rng = rng_for(seed, "noisy", c.name)
        name = names[int(rng.integers(len(names)))]
        w = float(rng.uniform(*w_orig_range))
        out.append(mix_background(c, scenes[name], w, seed=derive_seed(seed, "noisy-offset", c.name)))
    return out


def run_scenario2(train_clips: Sequence[AudioClip], noisy_test: Sequence[AudioClip],
                  plans: Mapping[str, AugmentPlan], cfg: TrainConfig, seed: int = 0, scenes=None,
                  val_clips: Optional[Sequence[AudioClip]] = None, feature_cfg: Optional[FeatureConfig] = None,
                  jobs: int = 1, include_originals: bool = True, title: str = "Scenario 2") -> ScenarioReport:
    """Noisy-environment evaluation: models trained on clean and augmented
    data from one speaker, all scored on the same noisy test set."""
    test_labels = {c.label for c in noisy_test}
    if not test_labels <= set(CLASSES):
        raise UnknownLabel(f"noisy test labels {sorted(test_labels - set(CLASSES))}")
    clean = _features(train_clips, feature_cfg, jobs)
    val = _features(val_clips, feature_cfg, jobs) if val_clips else None
    tests = {"noisy": _features(noisy_test, feature_cfg, jobs)}
    results = {}
    for name, plan in {BASELINE: None, **plans}.items():
        if plan is None:
            tr = clean
        else:
            tr = _training_set(clean, train_clips, plan, derive_seed(seed, "scenario2", name), scenes,
                               feature_cfg, jobs, include_originals)
        results[name] = _fit_and_score(tr, val, tests, cfg)["noisy"]
    return ScenarioReport.build(title, results)


def run_scenario2_synthetic(clips: Sequence[AudioClip], speakers: Sequence[str], plans: Mapping[str, AugmentPlan],
                            cfg: TrainConfig, train_scenes, test_scenes, seed: int = 0,
                            test_fraction: float = 0.3, val_fraction: float = 0.15,
                            noise_w_orig=(0.78, 0.9), feature_cfg: Optional[FeatureConfig] = None,
                            jobs: int = 1, include_originals: bool = True) -> dict[str, ScenarioReport]:
    """Desk-scale scenario 2: per speaker, hold out clean clips, mix them with
    scenes never used for training augmentation, and run ``run_scenario2``.

    Returns one report per speaker plus an ``"average"`` report when more
    than one speaker is given.
    """
    reports = {}
    for spk in speakers:
        own = [c for c in clips if c.speaker == spk]
        tr, va, te = holdout_split(own, test_fraction, val_fraction, derive_seed(seed, "split", spk))
        noisy = make_noisy_set(te, test_scenes, noise_w_orig, derive_seed(seed, "noisy", spk))
        reports[spk] = run_scenario2(tr, noisy, plans, cfg, derive_seed(seed, "speaker", spk), train_scenes,
                                     va, feature_cfg, jobs, include_originals, title=f"Scenario 2: speaker {spk}")
    if len(reports) > 1:
        reports["average"] = average_reports("Scenario 2: average over speakers", list(reports.values()))
    return reports
