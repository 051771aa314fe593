import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from graspkit.dataset import LabeledView, LabelScheme, project_labels
from graspkit.learning import (PRESETS, ReferenceModel, TrainConfig, evaluate, gradient_check, grad_from_features,
                               load_model, loss, pool_features, preset_config, save_model, train)


def view(patches, labels):
    patches = np.asarray(patches, dtype=np.uint8)
    n = len(patches)
    return LabeledView(patches, np.asarray(labels, dtype=np.int64), ["o"] * n, [f"r{i}" for i in range(n)])


def separable(n=60, seed=0):
    """Dark-centre patches are positive, light-centre ones negative."""
    rng = np.random.default_rng(seed)
    patches = rng.integers(90, 160, size=(n, 100, 100)).astype(np.uint8)
    labels = np.arange(n) % 2
    for i in range(n):
        patches[i, 30:70, 30:70] = 20 if labels[i] else 235
    return view(patches, labels)


# -- features ---------------------------------------------------------------------

def test_pool_features_examples():
    assert not pool_features(np.zeros((100, 100), np.uint8)).any()
    assert np.all(pool_features(np.full((100, 100), 255, np.uint8)) == 1.0)
    p = np.zeros((100, 100), np.uint8)
    p[30:40, 70:80] = 255
    f = pool_features(p)
    assert f[37] == 1.0 and np.count_nonzero(f) == 1


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_pool_features_match_loop_oracle(seed):
    p = np.random.default_rng(seed).integers(0, 256, (100, 100), dtype=np.uint8)
    np.testing.assert_allclose(pool_features(p), oracles.block_features(p), atol=1e-12)


def test_pool_features_rejects_wrong_shape():
    with pytest.raises(ValueError):
        pool_features(np.zeros((50, 100)))


# -- loss and gradient --------------------------------------------------------------

def test_loss_examples():
    m = ReferenceModel()
    p = np.zeros((1, 100, 100), np.uint8)
    assert loss(m, p, [1]) == pytest.approx(math.log(2))
    assert loss(m, np.concatenate([p, p]), [1, 1]) == pytest.approx(2 * math.log(2))
    sure = ReferenceModel(np.r_[np.zeros(100), 50.0])
    assert loss(sure, p, [1]) == pytest.approx(-math.log(1 - 1e-7), rel=1e-9)
    assert loss(sure, p, [1]) == pytest.approx(1e-7, rel=1e-6)


def test_loss_matches_pure_python_oracle():
    rng = np.random.default_rng(3)
    w = rng.normal(0, 0.3, 101)
    patches = rng.integers(0, 256, (6, 100, 100), dtype=np.uint8)
    labels = [0, 1, 1, 0, 1, 0]
    feats = [oracles.block_features(p) for p in patches]
    assert loss(ReferenceModel(w), patches, labels) == pytest.approx(oracles.bce_loss(list(w), feats, labels),
                                                                     rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31))
def test_gradient_check_random(seed):
    rng = np.random.default_rng(seed)
    w = rng.normal(0, 0.1, 101)
    patches = rng.integers(0, 256, (5, 100, 100), dtype=np.uint8)
    labels = rng.integers(0, 2, 5)
    assert gradient_check(ReferenceModel(w), patches, labels) <= 1e-5


def test_analytic_gradient_matches_independent_differences():
    rng = np.random.default_rng(8)
    w = rng.normal(0, 0.2, 101)
    patches = rng.integers(0, 256, (4, 100, 100), dtype=np.uint8)
    labels = [1, 0, 0, 1]
    feats = [oracles.block_features(p) for p in patches]
    numeric = oracles.fd_gradient(list(w), feats, labels)
    analytic = grad_from_features(w, pool_features(patches), np.array(labels))
    np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-7)


def test_gradient_check_at_clamp_uses_absolute_fallback():
    sure = ReferenceModel(np.r_[np.zeros(100), 50.0])
    patches = np.zeros((3, 100, 100), np.uint8)
    assert gradient_check(sure, patches, [1, 1, 1]) <= 1e-8
    a = gradient_check(sure, patches, [1, 1, 1])
    assert gradient_check(sure, patches, [1, 1, 1]) == a


# -- training ------------------------------------------------------------------------

def test_separable_training_converges():
    v = separable()
    model, rep = train(v, TrainConfig(batch_size=10, epochs=165, lr=0.01))
    assert rep.train_accuracy >= 0.99
    assert rep.epoch_losses[-1] < rep.epoch_losses[0]
    assert all(np.isfinite(rep.epoch_losses))
    pos = v.patches[v.labels == 1][0]
    assert model.predict(pos) > 0.5
    assert model.training["dataset_sha256"] == v.digest()


def test_zero_learning_rate_keeps_zero_weights():
    model, _ = train(separable(20), TrainConfig(batch_size=5, epochs=3, lr=0))
    assert not model.weights.any()
    assert np.all(model.predict_many(separable(20).patches) == 0.5)


def test_training_is_deterministic():
    v = separable(30)
    cfg = TrainConfig(batch_size=7, epochs=20)
    a, _ = train(v, cfg)
    b, _ = train(v, cfg)
    assert a.weights.tobytes() == b.weights.tobytes()
    c, _ = train(v, TrainConfig(batch_size=7, epochs=20, seed=1))
    assert c.weights.tobytes() != a.weights.tobytes()


def test_reference_step_matches_definition():
    # one epoch, one full batch: w1 = -lr * grad(0) / n
    v = separable(8)
    model, _ = train(v, TrainConfig(batch_size=8, epochs=1, lr=0.5))
    feats = [oracles.block_features(p) for p in v.patches]
    g = oracles.fd_gradient([0.0] * 101, feats, v.labels.tolist())
    np.testing.assert_allclose(model.weights, -0.5 * np.array(g) / 8, atol=1e-7)


def test_train_rejects_empty_and_warns_on_single_label():
    with pytest.raises(ValueError):
        train(view(np.zeros((0, 100, 100)), []), TrainConfig(batch_size=1))
    with pytest.warns(UserWarning):
        train(view(np.zeros((3, 100, 100)), [1, 1, 1]), TrainConfig(batch_size=1, epochs=1))


def test_train_config_validation():
    for kw in (dict(batch_size=0), dict(batch_size=1, epochs=0), dict(batch_size=1, lr=-1)):
        with pytest.raises(ValueError):
            TrainConfig(**kw)


def test_presets():
    assert PRESETS[LabelScheme.GRE].batch_size == 20
    assert PRESETS[LabelScheme.SCG].batch_size == 25
    assert PRESETS[LabelScheme.VISION].batch_size == 25
    assert all(c.epochs == 165 and c.lr == 0.01 for c in PRESETS.values())
    cfg = preset_config("scg", epochs=3, lr=None)
    assert (cfg.epochs, cfg.lr, cfg.batch_size, cfg.preset) == (3, 0.01, 25, "scg")


def test_label_nesting_survives_projection(small_vpt):
    labels = {s: project_labels(small_vpt, s).labels for s in LabelScheme}
    assert np.all(labels[LabelScheme.SCG] <= labels[LabelScheme.VISION])
    assert np.all(labels[LabelScheme.VISION] <= labels[LabelScheme.GRE])


# -- prediction and evaluation --------------------------------------------------------

def test_zero_model_is_positive_and_half_accurate_on_balanced_view():
    m = ReferenceModel()
    assert m.predict(np.zeros((100, 100), np.uint8)) == 0.5
    r = evaluate(m, separable(40))
    assert r["accuracy"] == 0.5
    assert (r["tp"], r["fp"], r["tn"], r["fn"]) == (20, 20, 0, 0)
    assert r["tp"] + r["tn"] + r["fp"] + r["fn"] == r["n"] == 40


def test_perfect_model_scores_one():
    v = separable(20)
    model, _ = train(v, TrainConfig(batch_size=5, epochs=200, lr=0.05))
    assert evaluate(model, v)["accuracy"] == 1.0


def test_single_record_accuracy():
    v = separable(2).subset([1])
    model, _ = train(v, TrainConfig(batch_size=1, epochs=5))
    assert evaluate(model, v)["accuracy"] == 1.0


def test_evaluate_rejects_empty_view():
    with pytest.raises(ValueError):
        evaluate(ReferenceModel(), view(np.zeros((0, 100, 100)), []))


@given(st.integers(0, 99), st.integers(0, 200))
def test_prediction_monotone_in_positively_weighted_block(block, bump):
    w = np.zeros(101)
    w[block] = 2.0
    m = ReferenceModel(w)
    p = np.full((100, 100), 30, np.uint8)
    q = p.copy()
    r, c = divmod(block, 10)
    q[r * 10:(r + 1) * 10, c * 10:(c + 1) * 10] += np.uint8(min(bump, 225))
    assert m.predict(q) >= m.predict(p)


def test_model_round_trip_and_validation(tmp_path):
    m = ReferenceModel(np.random.default_rng(0).normal(size=101), "gre", {"x": 1})
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert back.weights.tobytes() == m.weights.tobytes()
    assert (back.preset, back.training, back.kind) == ("gre", {"x": 1}, m.kind)
    with pytest.raises(ValueError):
        ReferenceModel(np.zeros(5))
    with pytest.raises(ValueError):
        ReferenceModel(np.r_[np.zeros(100), np.inf])
    with pytest.raises(ValueError):
        ReferenceModel.from_dict({"kind": "cnn", "weights": [0.0] * 101})
