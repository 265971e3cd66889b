import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from interjection import CLASSES
from interjection.augment import AugmentPlan, SceneMix
from interjection.dataset import SplitSpec, synth_corpus
from interjection.errors import ConfigError, LengthMismatch, UnknownLabel
from interjection.evaluation import (
    BASELINE, ReportRow, ScenarioReport, average_reports, compute_metrics, holdout_split,
    improvement_pct, make_noisy_set, run_scenario1, run_scenario2,
)
from interjection.model import TrainConfig
from interjection.scenes import SCENE_NAMES, SceneLibrary

labels = st.sampled_from(CLASSES)


@pytest.fixture(scope="module")
def tiny():
    return synth_corpus(3, 3, seed=5)


@pytest.fixture(scope="module")
def lib():
    return SceneLibrary.bundled()


FAST = TrainConfig(epochs=15, hidden=(16, 16, 16))


def test_all_correct():
    m = compute_metrics(list(CLASSES), list(CLASSES))
    assert m.accuracy == 1.0 and m.macro_f1 == 1.0
    np.testing.assert_array_equal(m.confusion, np.eye(5, dtype=int))


def test_hand_counted_example():
    m = compute_metrics(["nah", "nah", "mmm", "mmm"], ["nah", "mmm", "mmm", "mmm"])
    assert m.accuracy == 0.75
    assert m.per_class()["nah"]["f1"] == pytest.approx(2 / 3)
    assert m.per_class()["mmm"]["f1"] == pytest.approx(0.8)
    assert m.macro_f1 == pytest.approx(0.7333333333333333)


def test_constant_predictor():
    truth = list(CLASSES) * 4
    m = compute_metrics(truth, ["oy"] * len(truth))
    assert m.accuracy == 0.2


def test_metric_errors():
    with pytest.raises(LengthMismatch):
        compute_metrics(["oy"], [])
    with pytest.raises(UnknownLabel):
        compute_metrics(["oy"], ["uh"])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(labels, labels), min_size=1, max_size=40), st.randoms(use_true_random=False))
def test_metric_identities(pairs, rnd):
    truth, pred = map(list, zip(*pairs))
    m = compute_metrics(truth, pred)
    assert m.accuracy == pytest.approx(np.trace(m.confusion) / len(truth))
    for i, c in enumerate(CLASSES):
        assert m.confusion[i].sum() == truth.count(c)
    assert 0.0 <= m.macro_f1 <= 1.0
    shuffled = pairs[:]
    rnd.shuffle(shuffled)
    t2, p2 = map(list, zip(*shuffled))
    m2 = compute_metrics(t2, p2)
    assert m2.accuracy == m.accuracy and m2.macro_f1 == m.macro_f1


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 1.0), st.lists(st.floats(0.0, 1.0), max_size=6))
def test_improvement_recomputes(base, others):
    from interjection.evaluation import Metrics

    def fake(acc):
        return Metrics(CLASSES, np.zeros((5, 5), int), acc, np.zeros(5), np.zeros(5), np.zeros(5), acc)

    results = {BASELINE: fake(base), **{f"p{i}": fake(a) for i, a in enumerate(others)}}
    rep = ScenarioReport.build("t", results)
    for r in rep.rows:
        assert r.improvement_pct == (r.accuracy - base) / base * 100.0


def test_report_formats():
    rep = ScenarioReport("Scenario X", [ReportRow(BASELINE, 0.4, 0.35, 0.0), ReportRow("BGN", 0.63, 0.6, 57.5)])
    assert rep.to_csv().splitlines()[0] == "training_set,accuracy,macro_f1,improvement_pct"
    assert rep.to_csv().splitlines()[2] == "BGN,0.63,0.59999999999999998,57.5"
    text = rep.to_text()
    assert "0.630 (57.5%)" in text and text.startswith("Scenario X\n")
    assert improvement_pct(0.468, 0.286) == pytest.approx(63.636, abs=1e-3)


def test_report_needs_baseline():
    with pytest.raises(ConfigError):
        ScenarioReport.build("t", {})


def test_average_reports():
    a = ScenarioReport("a", [ReportRow(BASELINE, 0.4, 0.4, 0.0), ReportRow("X", 0.6, 0.5, 50.0)])
    b = ScenarioReport("b", [ReportRow(BASELINE, 0.6, 0.6, 0.0), ReportRow("X", 0.6, 0.7, 0.0)])
    avg = average_reports("avg", [a, b])
    assert avg.row("X").accuracy == pytest.approx(0.6)
    assert avg.row("X").improvement_pct == pytest.approx(20.0)


def test_holdout_split_partitions(tiny):
    own = [c for c in tiny if c.speaker == "S1"]
    tr, va, te = holdout_split(own, 0.34, 0.34, seed=1)
    assert len(tr) + len(va) + len(te) == len(own)
    assert {c.name for c in tr}.isdisjoint({c.name for c in te})
    assert len(te) == 5


def test_noisy_set_uses_given_scenes(tiny, lib):
    noisy = make_noisy_set(tiny[:5], lib.subset(SCENE_NAMES[6:]), seed=2)
    assert all(c.provenance[-1].split("(")[1].split(",")[0] in SCENE_NAMES[6:] for c in noisy)
    assert [c.label for c in noisy] == [c.label for c in tiny[:5]]


def test_scenario1_empty_plans(tiny):
    reps = run_scenario1(tiny, {}, SplitSpec(("S1",), ("S2",), ("S3",)), FAST)
    assert list(reps) == ["S3"]
    assert [r.training_set for r in reps["S3"].rows] == [BASELINE]


def test_scenario1_row_per_plan(tiny, lib):
    plans = {"Tempo": AugmentPlan(tempo_factors=(0.9,)), "BGN": AugmentPlan(scenes=(SceneMix("mall", (0.9,)),))}
    reps = run_scenario1(tiny, plans, SplitSpec(("S1",), ("S2",), ("S3",)), FAST, scenes=lib)
    assert [r.training_set for r in reps["S3"].rows] == [BASELINE, "Tempo", "BGN"]


def test_scenario2_degenerate_noisy_equals_clean(tiny):
    own = [c for c in tiny if c.speaker == "S2"]
    rep = run_scenario2(own, own, {"Pitch": AugmentPlan(pitch_semitones=(1.0,))}, FAST)
    assert [r.training_set for r in rep.rows] == [BASELINE, "Pitch"]
    assert rep.row(BASELINE).improvement_pct == 0.0


def test_scenario_reports_reproducible(tiny, lib):
    plans = {"BGN": AugmentPlan(scenes=(SceneMix("tv", (0.85,)),))}
    a = run_scenario1(tiny, plans, SplitSpec(("S1",), (), ("S3",)), FAST, scenes=lib)
    b = run_scenario1(tiny, plans, SplitSpec(("S1",), (), ("S3",)), FAST, scenes=lib, jobs=2)
    assert a["S3"].to_csv() == b["S3"].to_csv()
