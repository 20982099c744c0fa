import math

import numpy as np
import pytest

from oracles import kl_list, mlp_forward_list
from pgnkd.student import (
    LAYER_SIZES,
    MlpModel,
    MlpStudent,
    NonFiniteGradientError,
    OptimizerState,
    forward,
    kd_loss,
    loss_and_grads,
    train_step,
)

SMALL = (50, 32, 16, 13)


def _dist(rng, n=13):
    v = rng.random(n)
    return v / v.sum()


def test_parameter_count():
    m = MlpModel.zeros()
    assert m.sizes == LAYER_SIZES == (50, 2048, 1024, 13)
    assert m.n_parameters == 50 * 2048 + 2048 + 2048 * 1024 + 1024 + 1024 * 13 + 13


def test_zero_model_is_uniform(rng):
    p = forward(MlpModel.zeros(SMALL), rng.random(50))
    assert p == pytest.approx(np.full(13, 1 / 13), abs=1e-15)


def test_forward_matches_pure_python(rng):
    m = MlpModel.init(SMALL, rng)
    x = rng.random(50)
    expected = mlp_forward_list([W.tolist() for W in m.weights], [b.tolist() for b in m.biases], x.tolist())
    assert forward(m, x) == pytest.approx(expected, abs=1e-12)


def test_output_bias_shift_invariance(rng):
    m = MlpModel.init(SMALL, rng)
    x = rng.random(50)
    shifted = m.copy()
    shifted.biases[-1] += 123.0
    assert forward(shifted, x) == pytest.approx(forward(m, x), abs=1e-12)


def test_huge_logit_dominates(rng):
    m = MlpModel.zeros(SMALL)
    m.biases[-1][4] = 50.0
    p = forward(m, rng.random(50))
    assert p[4] >= 1 - 1e-9
    assert p.sum() == pytest.approx(1.0, abs=1e-9)


def test_forward_rejects_non_finite():
    with pytest.raises(ValueError):
        forward(MlpModel.zeros(SMALL), np.full(50, np.nan))


def test_forward_extreme_inputs_stay_normalized(rng):
    m = MlpModel.init(SMALL, rng)
    p = forward(m, np.full(50, 1e6))
    assert np.all(p >= 0) and p.sum() == pytest.approx(1.0, abs=1e-9)


def test_kd_loss_examples(rng):
    t = _dist(rng)
    assert kd_loss(t, t) == 0.0
    one_hot = np.eye(13)[3]
    assert kd_loss(one_hot, np.full(13, 1 / 13)) == pytest.approx(math.log(13), abs=1e-12)
    assert math.log(13) == pytest.approx(2.5649, abs=1e-4)
    assert kd_loss(np.full(13, 1 / 13), np.full(13, 1 / 13)) == pytest.approx(0.0, abs=1e-15)


def test_kd_loss_matches_oracle_and_nonnegative(rng):
    for _ in range(100):
        t, p = _dist(rng), _dist(rng)
        t[rng.integers(13)] = 0.0
        t /= t.sum()
        assert kd_loss(t, p) == pytest.approx(kl_list(t.tolist(), p.tolist()), abs=1e-12)
        assert kd_loss(t, p) >= 0


def test_overfit_one_sample_monotone():
    rng = np.random.default_rng(0)
    m = MlpModel.init(LAYER_SIZES, rng)
    opt = OptimizerState.for_model(m)
    x, t = _dist(rng, 50), np.eye(13)[3]
    losses = []
    for _ in range(500):
        m, opt, loss = train_step(m, opt, [(x, t)])
        losses.append(loss)
    assert all(b <= a for a, b in zip(losses[5:], losses[6:]))
    assert min(losses) < 1e-3
    assert opt.step == 500


def test_overfit_one_soft_sample_converges():
    # interior optimum: Adam momentum overshoots briefly, so only the envelope must fall
    rng = np.random.default_rng(0)
    m = MlpModel.init(LAYER_SIZES, rng)
    opt = OptimizerState.for_model(m)
    x, t = _dist(rng, 50), _dist(rng)
    losses = []
    for _ in range(200):
        m, opt, loss = train_step(m, opt, [(x, t)])
        losses.append(loss)
    windows = [max(losses[i:i + 20]) for i in range(0, 200, 20)]
    assert all(b < a for a, b in zip(windows, windows[1:]))
    assert losses[-1] < 1e-3


def test_zero_learning_rate_keeps_parameters(rng):
    m = MlpModel.init(SMALL, rng)
    before = [p.copy() for p in m.params()]
    opt = OptimizerState.for_model(m, learning_rate=0.0)
    X, T = rng.random((4, 50)), np.array([_dist(rng) for _ in range(4)])
    train_step(m, opt, (X, T))
    assert all(np.array_equal(a, b) for a, b in zip(before, m.params()))


def test_train_step_is_deterministic():
    def run():
        rng = np.random.default_rng(42)
        m = MlpModel.init(SMALL, rng)
        opt = OptimizerState.for_model(m)
        for _ in range(20):
            X, T = rng.random((32, 50)), np.array([_dist(rng) for _ in range(32)])
            m, opt, _ = train_step(m, opt, (X, T))
        return m
    a, b = run(), run()
    assert all(np.array_equal(p, q) for p, q in zip(a.params(), b.params()))


def test_train_step_rejects_empty_and_non_finite(rng):
    m = MlpModel.init(SMALL, rng)
    opt = OptimizerState.for_model(m)
    with pytest.raises(ValueError):
        train_step(m, opt, [])
    m.weights[0][0, 0] = np.inf
    with np.errstate(invalid="ignore"), pytest.raises(NonFiniteGradientError):
        train_step(m, opt, [(np.ones(50), _dist(rng))])


def test_weighted_loss_equals_repeated_rows(rng):
    m = MlpModel.init(SMALL, rng)
    X, T = rng.random((3, 50)), np.array([_dist(rng) for _ in range(3)])
    lw, gw = loss_and_grads(m, X, T, np.array([2.0, 1.0, 1.0]))
    lr, gr = loss_and_grads(m, X[[0, 0, 1, 2]], T[[0, 0, 1, 2]])
    assert lw == pytest.approx(lr, abs=1e-12)
    assert all(np.allclose(a, b, atol=1e-12) for a, b in zip(gw, gr))


def test_estimator_fits_and_validates(rng):
    X = np.array([_dist(rng, 50) for _ in range(40)])
    T = np.array([_dist(rng) for _ in range(40)])
    est = MlpStudent(hidden_sizes=(16, 8), max_epochs=5).fit(X, T)
    P = est.predict_proba(X)
    assert P.shape == (40, 13) and np.allclose(P.sum(axis=1), 1.0, atol=1e-9)
    assert est.predict(X).shape == (40,)
    assert est.n_epochs_ <= 5
    with pytest.raises(ValueError):
        MlpStudent().fit(np.zeros((0, 50)), np.zeros((0, 13)))
    with pytest.raises(ValueError):
        MlpStudent().fit(np.zeros((3, 50)), np.zeros((2, 13)))
    with pytest.raises(Exception):
        MlpStudent().predict(X)


def test_from_model_wraps_trained_weights(rng):
    m = MlpModel.init(SMALL, rng)
    est = MlpStudent.from_model(m)
    x = rng.random((2, 50))
    assert est.hidden_sizes == (32, 16)
    assert np.array_equal(est.predict_proba(x), forward(m, x))
