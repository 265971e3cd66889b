import numpy as np
import pytest

from interjection.errors import (CorruptCheckpoint, EmptyTrainingSet, NonFiniteLoss, ShapeMismatch,
                                 UnknownLabel, VersionMismatch)
from interjection.model import (
    AdamState, ModelParams, TrainConfig, adam_step, encode_labels, fit_norm_stats, forward,
    load_checkpoint, logits, loss_and_grad, predict, save_checkpoint, softmax, standardize, train,
)

from gradcheck import gradient_errors


def _separable(n_per=2, d=6, seed=0):
    rng = np.random.default_rng(seed)
    centers = rng.normal(0, 5, (5, d))
    x = np.concatenate([c + rng.normal(0, 0.1, (n_per, d)) for c in centers])
    y = np.repeat(np.arange(5), n_per)
    return x, y


def test_zero_model_is_uniform():
    p = ModelParams.zeros([193, 16, 16, 16, 5])
    np.testing.assert_allclose(forward(p, np.ones((3, 193))), 0.2, atol=1e-15)


def test_softmax_shift_invariance(rng):
    z = rng.normal(size=(4, 5))
    np.testing.assert_allclose(softmax(z + 123.0), softmax(z), atol=1e-15)
    s = softmax(rng.normal(0, 50, size=(100, 5)))
    assert np.all(s > 0) or np.all(s >= 0)
    np.testing.assert_allclose(s.sum(axis=1), 1.0, atol=1e-12)


def test_hand_computed_toy_network():
    # 2 inputs -> 1 relu unit -> 2 outputs
    p = ModelParams((2, 1, 2), [np.array([[1.0], [-2.0]]), np.array([[3.0, -1.0]])],
                    [np.array([0.5]), np.array([0.0, 1.0])])
    x = np.array([[2.0, 0.25]])
    h = max(0.0, 2.0 - 0.5 + 0.5)  # 2.0
    z = np.array([3.0 * h, -1.0 * h + 1.0])
    expected = np.exp(z) / np.exp(z).sum()
    np.testing.assert_allclose(forward(p, x)[0], expected, atol=1e-12)


def test_uniform_loss_is_ln5():
    p = ModelParams.zeros([7, 4, 5])
    loss, _ = loss_and_grad(p, np.ones((10, 7)), np.arange(10) % 5)
    assert loss == pytest.approx(np.log(5), abs=1e-12)


def test_confident_prediction_loss_near_zero():
    p = ModelParams.zeros([3, 5])
    p.biases[0][:] = [50.0, 0, 0, 0, 0]
    loss, _ = loss_and_grad(p, np.zeros((2, 3)), [0, 0])
    assert loss < 1e-15


@pytest.mark.parametrize("activation", ["relu", "tanh", "sigmoid"])
def test_gradient_matches_finite_differences(rng, activation):
    p = ModelParams.init([9, 7, 6, 5], seed=3, activation=activation)
    x = rng.normal(size=(8, 9))
    y = rng.integers(0, 5, 8)
    _, grads = loss_and_grad(p, x, y)
    assert gradient_errors(p, x, y, grads).max() < 1e-4


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss():
    p = ModelParams.zeros([3, 5])
    p.biases[0][:] = [np.inf, 0, 0, 0, 0]
    with pytest.raises(NonFiniteLoss):
        loss_and_grad(p, np.zeros((1, 3)), [1])


def test_shape_mismatch_names_expected_count():
    p = ModelParams.zeros([193, 4, 5])
    with pytest.raises(ShapeMismatch, match="193"):
        forward(p, np.zeros((2, 192)))


def test_adam_first_step():
    state = AdamState.for_params([np.zeros(1)])
    (p,) = adam_step(state, [np.zeros(1)], [np.ones(1)])
    assert abs(p[0] - (-0.009 / (1 + 1e-8))) <= 1e-12
    assert state.step == 1


def test_adam_zero_gradient_is_noop(rng):
    w = rng.normal(size=(3, 4))
    state = AdamState.for_params([w])
    cur = [w]
    for _ in range(5):
        cur = adam_step(state, cur, [np.zeros_like(w)])
    np.testing.assert_array_equal(cur[0], w)


def test_adam_shape_check():
    with pytest.raises(ShapeMismatch):
        adam_step(AdamState.for_params([np.zeros(2)]), [np.zeros(2)], [np.zeros(3)])


def test_standardization_stats(rng):
    x = rng.normal(3, 7, (50, 6))
    x[:, 2] = 4.0
    mean, std = fit_norm_stats(x)
    p = ModelParams.zeros([6, 5])
    p.norm_mean, p.norm_std = mean, std
    z = standardize(p, x)
    np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-9)
    live = [0, 1, 3, 4, 5]
    np.testing.assert_allclose(z[:, live].std(axis=0), 1.0, atol=1e-6)
    assert not z[:, 2].any()


def test_separable_fixture_trains():
    x, y = _separable()
    params, hist = train(x, y, cfg=TrainConfig(epochs=200, batch_size=4, hidden=(16, 16, 16)))
    assert max(hist.train_accuracy) == 1.0
    assert hist.train_loss[49] < hist.train_loss[0]
    assert np.all(predict(params, x) == y)


def test_single_epoch_history():
    x, y = _separable()
    _, hist = train(x, y, x, y, cfg=TrainConfig(epochs=1, hidden=(8, 8, 8)))
    assert len(hist) == 1 and len(hist.val_loss) == 1


def test_training_is_deterministic():
    x, y = _separable(4)
    cfg = TrainConfig(epochs=20, batch_size=5, hidden=(8, 8, 8), seed=11)
    a, ha = train(x, y, cfg=cfg)
    b, hb = train(x, y, cfg=cfg)
    for u, v in zip(a.arrays(), b.arrays()):
        np.testing.assert_array_equal(u, v)
    assert ha.train_loss == hb.train_loss


def test_duplicated_set_matches_with_scaled_batches():
    # one full batch per epoch: duplicating every row leaves the mean gradient unchanged
    x, y = _separable(3)
    a, _ = train(x, y, cfg=TrainConfig(epochs=15, batch_size=len(x), hidden=(8, 8, 8)))
    b, _ = train(np.concatenate([x, x]), np.concatenate([y, y]),
                 cfg=TrainConfig(epochs=15, batch_size=2 * len(x), hidden=(8, 8, 8)))
    for u, v in zip(a.arrays(), b.arrays()):
        np.testing.assert_allclose(u, v, atol=1e-10)


def test_early_stopping():
    x, y = _separable(4)
    _, hist = train(x, y, x[::-1], y, cfg=TrainConfig(epochs=300, patience=5, hidden=(8, 8, 8)))
    assert len(hist) < 300


def test_empty_training_set():
    with pytest.raises(EmptyTrainingSet):
        train(np.zeros((0, 5)), np.zeros(0))


def test_encode_labels():
    assert encode_labels(["oy", "nah"]).tolist() == [3, 0]
    with pytest.raises(UnknownLabel):
        encode_labels(["huh"])


def test_checkpoint_round_trip(tmp_path, rng):
    x, y = _separable()
    p, _ = train(x, y, cfg=TrainConfig(epochs=3, hidden=(8, 8, 8), activation="tanh"))
    save_checkpoint(p, tmp_path / "m.json", "abc")
    q = load_checkpoint(tmp_path / "m.json")
    assert q.layer_sizes == p.layer_sizes and q.activation == "tanh"
    probe = rng.normal(size=(100, 6))
    np.testing.assert_array_equal(forward(q, probe), forward(p, probe))
    np.testing.assert_array_equal(q.norm_std, p.norm_std)


def test_zero_checkpoint_uniform(tmp_path):
    save_checkpoint(ModelParams.zeros([193, 4, 5]), tmp_path / "z.json")
    np.testing.assert_allclose(forward(load_checkpoint(tmp_path / "z.json"), np.ones(193)), 0.2)


def test_truncated_checkpoint(tmp_path):
    save_checkpoint(ModelParams.zeros([10, 4, 5]), tmp_path / "m.json")
    text = (tmp_path / "m.json").read_text()
    (tmp_path / "t.json").write_text(text[: len(text) // 2])
    with pytest.raises(CorruptCheckpoint):
        load_checkpoint(tmp_path / "t.json")


def test_version_mismatch(tmp_path):
    save_checkpoint(ModelParams.zeros([10, 4, 5]), tmp_path / "m.json")
    p = tmp_path / "m.json"
    p.write_text(p.read_text().replace('"version": 1', '"version": 99'))
    with pytest.raises(VersionMismatch):
        load_checkpoint(p)
