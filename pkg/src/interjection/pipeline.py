"""Per-clip stages (augment, featurize) run as an ordered, optionally parallel map."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Optional, Sequence

import numpy as np

from interjection.audio_io import AudioClip
from interjection.augment import AugmentPlan, expand_plan
from interjection.dataset import fit_to_canonical
from interjection.features import N_FEATURES, FeatureConfig, featurize
from interjection.seeding import derive_seed


def ordered_map(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    """``[fn(x) for x in items]``, using up to ``jobs`` processes.

    Results come back in input order, so the output never depends on ``jobs``.
    """
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def augment_seed(seed: int, clip: AudioClip) -> int:
    return derive_seed(seed, "augment", clip.name)


class _Expand:
    def __init__(self, plan: AugmentPlan, seed: int, scenes, canonical: bool = True):
        self.plan, self.seed, self.scenes = plan, seed, scenes
        self.canonical = canonical

    def __call__(self, clip: AudioClip) -> list[AudioClip]:
        seed = augment_seed(self.seed, clip)
        out = expand_plan(self.plan, clip, seed, self.scenes)
        if self.canonical:
            out = [fit_to_canonical(c, derive_seed(seed, "fit", i)) for i, c in enumerate(out)]
        return out


class _ExpandFeaturize(_Expand):
    def __init__(self, plan, seed, scenes, feature_cfg):
        super().__init__(plan, seed, scenes)
        self.feature_cfg = feature_cfg

    def __call__(self, clip: AudioClip) -> np.ndarray:
        out = super().__call__(clip)
        rows = np.empty((len(out), N_FEATURES))
        for i, c in enumerate(out):
            rows[i] = featurize(c, self.feature_cfg).values
        return rows


class _Featurize:
    def __init__(self, feature_cfg):
        self.feature_cfg = feature_cfg

    def __call__(self, clip: AudioClip) -> np.ndarray:
        return featurize(clip, self.feature_cfg).values


def expand_corpus(clips: Sequence[AudioClip], plan: AugmentPlan, seed: int, scenes=None,
                  jobs: int = 1, canonical: bool = True) -> list[AudioClip]:
    """All generated variants of every clip, grouped by source clip in input order.

    With ``canonical`` set, variants whose length changed are cropped or
    padded back to the canonical clip length.
    """
    plan.validate()
    nested = ordered_map(_Expand(plan, seed, scenes, canonical), clips, jobs)
    return [c for group in nested for c in group]


def featurize_corpus(clips: Sequence[AudioClip], feature_cfg: Optional[FeatureConfig] = None,
                     jobs: int = 1) -> np.ndarray:
    feature_cfg = feature_cfg or FeatureConfig()
    rows = ordered_map(_Featurize(feature_cfg), clips, jobs)
    return np.array(rows).reshape(len(rows), N_FEATURES)


def augmented_features(clips: Sequence[AudioClip], plan: AugmentPlan, seed: int, scenes=None,
                       feature_cfg: Optional[FeatureConfig] = None, jobs: int = 1):
    """Feature rows and labels of every generated variant, without keeping audio around."""
    plan.validate()
    feature_cfg = feature_cfg or FeatureConfig()
    nested = ordered_map(_ExpandFeaturize(plan, seed, scenes, feature_cfg), clips, jobs)
    labels = [c.label for c, rows in zip(clips, nested) for _ in range(len(rows))]
    x = np.concatenate(nested) if nested else np.empty((0, N_FEATURES))
    return x.reshape(-1, N_FEATURES), labels
