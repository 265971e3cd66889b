"""Command-line driver: ``interjection <subcommand> [--config cfg.json] ...``.

All subcommands read one JSON pipeline config. ``--seed``, ``--jobs`` and
``--out`` override the file. Exit codes: 0 ok, 1 usage/config error,
2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import re
import sys
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from interjection import CLASSES
from interjection.augment import AugmentPlan, expected_count, provenance_slug
from interjection.dataset import (DatasetManifest, SplitSpec, length_gate, pad_to_canonical, scan_corpus,
                                  seconds_to_samples, synth_corpus, write_clips)
from interjection.errors import ConfigError, InterjectionError, ShapeMismatch
from interjection.evaluation import compute_metrics, run_scenario1, run_scenario2_synthetic
from interjection.features import N_FEATURES, FeatureConfig
from interjection.model import TrainConfig, encode_labels, load_checkpoint, predict, save_checkpoint, train
from interjection.pipeline import expand_corpus, featurize_corpus
from interjection.scenes import SCENE_NAMES, SceneLibrary
from interjection.seeding import derive_seed

log = logging.getLogger("interjection")

TRAIN_SCENES = SCENE_NAMES[:6]
TEST_SCENES = SCENE_NAMES[6:]

# Desk-scale versions of the seven augmented training sets.
_TEMPO = (0.9, 1.1)
_PITCH = (-2.0, 2.0)
_BGN = [{"scene": s, "weights": [0.83, 0.88]} for s in TRAIN_SCENES]
DEFAULT_PLANS = {
    "Pitch": {"pitch_semitones": list(_PITCH)},
    "Tempo": {"tempo_factors": list(_TEMPO)},
    "BGN": {"scenes": _BGN},
    "Tempo + Pitch": {"tempo_factors": list(_TEMPO), "pitch_semitones": list(_PITCH)},
    "Pitch + BGN": {"pitch_semitones": list(_PITCH), "scenes": _BGN[:2]},
    "Tempo + BGN": {"tempo_factors": list(_TEMPO), "scenes": _BGN[:2]},
    "Tempo + Pitch + BGN": {"tempo_factors": list(_TEMPO), "pitch_semitones": list(_PITCH), "scenes": _BGN[:1]},
}

DEFAULT_CONFIG = {
    "seed": 0,
    "paths": {"corpus": None, "scenes": None, "out": "out"},
    "preprocess": {"min_seconds": 0.45, "max_seconds": 1.55, "canonical_seconds": 1.55},
    "synth": {"per_class": 120, "speakers": 5},
    "plans": DEFAULT_PLANS,
    "features": {},
    "model": {"epochs": 200, "batch_size": 32, "learning_rate": 0.009, "patience": 30},
    "scenarios": {
        "1": {"source": "synth", "split": {"train": ["S1", "S2"], "validation": ["S3"], "test": ["S4", "S5"]},
              "plans": list(DEFAULT_PLANS), "include_originals": True},
        "2": {"source": "synth", "speakers": ["S1"], "plans": list(DEFAULT_PLANS),
              "train_scenes": list(TRAIN_SCENES), "test_scenes": list(TEST_SCENES),
              "test_fraction": 0.3, "val_fraction": 0.15, "noise_w_orig": [0.78, 0.9],
              "include_originals": True},
    },
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class PipelineConfig:
    seed: int = 0
    corpus: Optional[Path] = None
    scene_dir: Optional[Path] = None
    out: Path = Path("out")
    min_seconds: float = 0.45
    max_seconds: float = 1.55
    canonical_seconds: float = 1.55
    synth_per_class: int = 120
    synth_speakers: int = 5
    plans: dict = field(default_factory=dict)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    model: TrainConfig = field(default_factory=TrainConfig)
    scenarios: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path = Path(".")) -> "PipelineConfig":
        d = _merge({k: v for k, v in DEFAULT_CONFIG.items() if k != "plans"}, raw)
        # plans merge by name; a plan given in the file replaces the default of that name
        d["plans"] = {**DEFAULT_PLANS, **raw.get("plans", {})}
        unknown = set(d) - set(DEFAULT_CONFIG)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")

        def path(p):
            if p is None:
                return None
            p = Path(p)
            return p if p.is_absolute() else base_dir / p

        try:
            seed = int(d["seed"])
            pre = d["preprocess"]
            plans = {name: AugmentPlan.from_dict(p) for name, p in d["plans"].items()}
            canonical = float(pre["canonical_seconds"])
            feat = FeatureConfig.from_dict({"canonical_samples": seconds_to_samples(canonical), **d["features"]})
            model = TrainConfig.from_dict({"seed": seed, **d["model"]})
            cfg = cls(seed, path(d["paths"]["corpus"]), path(d["paths"]["scenes"]), path(d["paths"]["out"]),
                      float(pre["min_seconds"]), float(pre["max_seconds"]), canonical,
                      int(d["synth"]["per_class"]), int(d["synth"]["speakers"]),
                      plans, feat, model, d["scenarios"])
        except InterjectionError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from None
        if seed < 0:
            raise ConfigError("seed must be non-negative")
        return cfg

    @classmethod
    def load(cls, path: Optional[str]) -> "PipelineConfig":
        if path is None:
            return cls.from_dict({})
        p = Path(path)
        try:
            raw = json.loads(p.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {p} is not valid JSON: {exc}") from None
        return cls.from_dict(raw, p.parent)

    def plan(self, name: str) -> AugmentPlan:
        if name not in self.plans:
            raise ConfigError(f"no plan named {name!r}; known plans: {sorted(self.plans)}")
        return self.plans[name]

    def scenes(self, names=None) -> SceneLibrary:
        if self.scene_dir is None:
            lib = SceneLibrary.bundled()
        else:
            if not self.scene_dir.is_dir():
                raise ConfigError(f"scene directory not found: {self.scene_dir}")
            lib = SceneLibrary.from_dir(self.scene_dir)
        if names is None:
            return lib
        missing = sorted(set(names) - set(lib))
        if missing:
            raise ConfigError(f"scenes {missing} not in scene library")
        return lib.subset(names)


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9.-]+", "_", name).strip("_") or "plan"


# --- feature CSV -----------------------------------------------------------

FEATURE_HEADER = ["label", "speaker", "provenance"] + [f"f{i:03d}" for i in range(N_FEATURES)]


def write_feature_csv(path: Path, clips, x: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FEATURE_HEADER)
        for clip, row in zip(clips, x):
            w.writerow([clip.label, clip.speaker or "", ";".join(clip.provenance)]
                       + [f"{v:.17g}" for v in row])


def read_feature_csv(path: Path):
    """(matrix, labels, speakers) from a feature CSV."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read feature file {path}: {exc.strerror}") from None
    if not rows or rows[0][:3] != FEATURE_HEADER[:3]:
        raise ShapeMismatch(f"{path}: missing label,speaker,provenance header")
    n_feat = len(rows[0]) - 3
    x = np.array([[float(v) for v in r[3:]] for r in rows[1:]]).reshape(len(rows) - 1, n_feat)
    return x, [r[0] for r in rows[1:]], [r[1] for r in rows[1:]]


# --- subcommands -----------------------------------------------------------

def cmd_synth(cfg: PipelineConfig, args) -> int:
    clips = synth_corpus(cfg.synth_per_class, cfg.synth_speakers, cfg.seed)
    manifest = write_clips(clips, cfg.out, "synth")
    manifest.write(cfg.out / "synth_manifest.jsonl")
    print(f"wrote {len(clips)} synthetic clips to {cfg.out / 'synth'}")
    return 0


def cmd_preprocess(cfg: PipelineConfig, args) -> int:
    if cfg.corpus is None:
        raise ConfigError("paths.corpus is not set")
    accepted, reasons = [], Counter()
    for clip in scan_corpus(cfg.corpus):
        gate = length_gate(clip, cfg.min_seconds, cfg.max_seconds)
        if not gate:
            reasons[gate.reason.value] += 1
            continue
        accepted.append(pad_to_canonical(clip, derive_seed(cfg.seed, "pad", clip.label, clip.name),
                                         cfg.canonical_seconds))
    manifest = write_clips(accepted, cfg.out, "clean")
    manifest.write(cfg.out / "manifest.jsonl")
    rejected = sum(reasons.values())
    detail = ", ".join(f"{k} {v}" for k, v in sorted(reasons.items()))
    print(f"accepted {len(accepted)}, rejected {rejected}" + (f" ({detail})" if detail else ""))
    return 0


def _manifest_path(cfg: PipelineConfig, given: Optional[str]) -> Path:
    return Path(given) if given else cfg.out / "manifest.jsonl"


def cmd_augment(cfg: PipelineConfig, args) -> int:
    plan = cfg.plan(args.plan)
    plan.validate()
    manifest = DatasetManifest.read(_manifest_path(cfg, args.manifest))
    clips = manifest.clips()
    dest = cfg.out / "augmented" / _safe_name(args.plan)
    if plan.is_empty:
        log.warning("plan %r is empty; no clips generated", args.plan)
        variants = []
    else:
        scenes = cfg.scenes() if plan.background_pairs else None
        variants = expand_corpus(clips, plan, cfg.seed, scenes, jobs=args.jobs)
    named = [v.derive(v.samples, name=f"{v.name}__{provenance_slug(v.provenance)}") for v in variants]
    out_manifest = write_clips(named, dest)
    out_manifest.write(dest / "manifest.jsonl")

    originals = Counter(c.label for c in clips)
    generated = Counter(v.label for v in named)
    print(f"plan {args.plan!r}: {expected_count(plan)} generated per original")
    print(f"{'CLASS':<10}{'ORIGINAL SAMPLES':>18}{'GENERATED SAMPLES':>19}")
    for label in CLASSES:
        print(f"{label:<10}{originals[label]:>18}{generated[label]:>19}")
    return 0


def cmd_featurize(cfg: PipelineConfig, args) -> int:
    manifest = DatasetManifest.read(_manifest_path(cfg, args.manifest))
    clips = manifest.clips()
    x = featurize_corpus(clips, cfg.features, jobs=args.jobs)
    out = Path(args.output) if args.output else cfg.out / "features.csv"
    write_feature_csv(out, clips, x)
    print(f"wrote {len(clips)} x {N_FEATURES} features to {out}")
    return 0


def cmd_train(cfg: PipelineConfig, args) -> int:
    x, labels, speakers = read_feature_csv(Path(args.features or cfg.out / "features.csv"))
    if x.shape[1] != N_FEATURES:
        raise ShapeMismatch(f"feature file has {x.shape[1]} columns, expected {N_FEATURES}")
    y = encode_labels(labels)
    val_spk = set(args.validation_speakers or ())
    is_val = np.array([s in val_spk for s in speakers], dtype=bool)
    params, hist = train(x[~is_val], y[~is_val], x[is_val] if is_val.any() else None,
                         y[is_val] if is_val.any() else None, cfg.model)
    out = Path(args.output) if args.output else cfg.out / "model.json"
    save_checkpoint(params, out, cfg.model.digest())
    print(f"trained {len(hist)} epochs (best {hist.best_epoch}), checkpoint {out}")
    return 0


def cmd_evaluate(cfg: PipelineConfig, args) -> int:
    params = load_checkpoint(Path(args.checkpoint or cfg.out / "model.json"))
    if params.layer_sizes[0] != N_FEATURES:
        raise ShapeMismatch(f"checkpoint takes {params.layer_sizes[0]} features, expected {N_FEATURES}")
    x, labels, _ = read_feature_csv(Path(args.features or cfg.out / "features.csv"))
    if x.shape[1] != N_FEATURES:
        raise ShapeMismatch(f"feature file has {x.shape[1]} columns, expected {N_FEATURES}")
    pred = [CLASSES[i] for i in predict(params, x)]
    m = compute_metrics(labels, pred)
    out = cfg.out / "metrics.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(m.to_dict(), indent=1) + "\n", encoding="utf-8")
    print(f"accuracy {m.accuracy:.4f}  macro-F1 {m.macro_f1:.4f}")
    print("confusion (rows = truth): " + " ".join(CLASSES))
    for label, row in zip(CLASSES, m.confusion):
        print(f"  {label:<9}" + " ".join(f"{v:5d}" for v in row))
    return 0


def _scenario_clips(cfg: PipelineConfig, sc: dict):
    source = sc.get("source", "synth")
    if source == "synth":
        return synth_corpus(cfg.synth_per_class, cfg.synth_speakers, cfg.seed)
    if source == "manifest":
        return DatasetManifest.read(cfg.out / "manifest.jsonl").clips()
    raise ConfigError(f"unknown scenario source {source!r}")


def _write_reports(reports: dict, dest: Path, prefix: str) -> None:
    dest.mkdir(parents=True, exist_ok=True)
    for key, rep in reports.items():
        stem = f"{prefix}_{_safe_name(key)}"
        rep.write_csv(dest / f"{stem}.csv")
        (dest / f"{stem}.txt").write_text(rep.to_text(), encoding="utf-8")
        print(rep.to_text())


def cmd_scenario(cfg: PipelineConfig, args) -> int:
    sc = cfg.scenarios.get(args.which)
    if sc is None:
        raise ConfigError(f"scenario {args.which} is not configured")
    plans = {name: cfg.plan(name) for name in sc.get("plans", [])}
    clips = _scenario_clips(cfg, sc)
    include = bool(sc.get("include_originals", True))
    if args.which == "1":
        split = SplitSpec.from_dict(sc["split"])
        reports = run_scenario1(clips, plans, split, cfg.model, cfg.seed, cfg.scenes(), cfg.features,
                                args.jobs, include)
    else:
        reports = run_scenario2_synthetic(
            clips, [str(s) for s in sc["speakers"]], plans, cfg.model,
            cfg.scenes(sc.get("train_scenes", TRAIN_SCENES)), cfg.scenes(sc.get("test_scenes", TEST_SCENES)),
            cfg.seed, float(sc.get("test_fraction", 0.3)), float(sc.get("val_fraction", 0.15)),
            tuple(sc.get("noise_w_orig", (0.78, 0.9))), cfg.features, args.jobs, include)
    _write_reports(reports, cfg.out / "reports", f"scenario{args.which}")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS keeps a subcommand's defaults from hiding flags given before it
    common.add_argument("--config", default=argparse.SUPPRESS, help="pipeline config JSON")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="root seed (overrides config)")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS,
                        help="worker processes for per-clip stages (default 1)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (overrides config)")

    p = _Parser(prog="interjection", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("synth", parents=[common], help="write the synthetic corpus")
    sub.add_parser("preprocess", parents=[common], help="length-gate and pad a corpus")
    a = sub.add_parser("augment", parents=[common], help="expand a manifest under a named plan")
    a.add_argument("--plan", required=True)
    a.add_argument("--manifest")
    f = sub.add_parser("featurize", parents=[common], help="write the 193-column feature CSV")
    f.add_argument("--manifest")
    f.add_argument("--output")
    t = sub.add_parser("train", parents=[common], help="train a classifier on a feature CSV")
    t.add_argument("--features")
    t.add_argument("--validation-speakers", nargs="*")
    t.add_argument("--output")
    e = sub.add_parser("evaluate", parents=[common], help="score a checkpoint on a feature CSV")
    e.add_argument("--checkpoint")
    e.add_argument("--features")
    s = sub.add_parser("scenario", parents=[common], help="run evaluation scenario 1 or 2")
    s.add_argument("which", choices=["1", "2"])
    return p


COMMANDS = {
    "synth": cmd_synth, "preprocess": cmd_preprocess, "augment": cmd_augment, "featurize": cmd_featurize,
    "train": cmd_train, "evaluate": cmd_evaluate, "scenario": cmd_scenario,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name, default in (("config", None), ("seed", None), ("jobs", 1), ("out", None)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        cfg = PipelineConfig.load(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            cfg.seed = args.seed
            cfg.model = replace(cfg.model, seed=args.seed)
        if args.out is not None:
            cfg.out = Path(args.out)
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        return COMMANDS[args.command](cfg, args)
    except InterjectionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
