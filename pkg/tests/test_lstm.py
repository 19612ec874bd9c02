import math

import numpy as np
import pytest

from beamcast import lstm
from beamcast.lstm import LstmParams, LstmState, TrainConfig
from beamcast.timeseries import SupervisedWindows


def random_params(C, H, seed, scale=0.7):
    rng = np.random.default_rng(seed)
    n = LstmParams.zeros(C, H).flat().size
    return LstmParams.from_flat(rng.normal(scale=scale, size=n), C, H)


def scalar_cell(p, x, h, c):
    """Gate equations evaluated one scalar at a time."""
    H, C = p.hidden_size, p.input_size
    sig = lambda z: 1.0 / (1.0 + math.exp(-z))
    out = {}
    for g in "fioc":
        wx, wh, b = getattr(p, "w_x" + g), getattr(p, "w_h" + g), getattr(p, "b_" + g)
        vals = []
        for j in range(H):
            z = b[j] + sum(wx[j, k] * x[k] for k in range(C)) + sum(wh[j, k] * h[k] for k in range(H))
            vals.append(math.tanh(z) if g == "c" else sig(z))
        out[g] = vals
    c_new = [out["f"][j] * c[j] + out["i"][j] * out["c"][j] for j in range(H)]
    h_new = [out["o"][j] * math.tanh(c_new[j]) for j in range(H)]
    return out, np.array(h_new), np.array(c_new)


def fd_gradient(p, x, y, eps=1e-5):
    C, H = p.input_size, p.hidden_size
    th = p.flat()
    g = np.empty_like(th)
    for k in range(th.size):
        d = np.zeros_like(th)
        d[k] = eps
        up = lstm.mse_loss(LstmParams.from_flat(th + d, C, H), x, y)
        dn = lstm.mse_loss(LstmParams.from_flat(th - d, C, H), x, y)
        g[k] = (up - dn) / (2 * eps)
    return g


def sine_windows(T=300, period=25.0):
    s = np.sin(2 * np.pi * np.arange(T) / period)[:, None]
    return SupervisedWindows(s[:-1], s[1:])


def test_zero_params_cell_step():
    p = LstmParams.zeros(2, 3)
    prev = LstmState.zeros(3)
    out = lstm.cell_step(p, [0.3, -1.2], prev)
    np.testing.assert_array_equal(out.c, 0)
    np.testing.assert_array_equal(out.h, 0)
    gates, _, _ = scalar_cell(p, [0.3, -1.2], np.zeros(3), np.zeros(3))
    assert gates["f"] == [0.5] * 3 and gates["i"] == [0.5] * 3 and gates["o"] == [0.5] * 3


def test_forget_gate_saturation_keeps_cell():
    p = LstmParams.zeros(2, 3)
    p.b_f[:] = 20.0
    v = np.array([0.4, -0.9, 2.0])
    out = lstm.cell_step(p, [1.0, 1.0], LstmState(np.zeros(3), v))
    np.testing.assert_allclose(out.c, v, atol=1e-8)


def test_cell_step_matches_scalar_loop():
    rng = np.random.default_rng(0)
    for seed in range(5):
        p = random_params(2, 4, seed)
        x, h, c = rng.normal(size=2), np.tanh(rng.normal(size=4)), rng.normal(size=4)
        out = lstm.cell_step(p, x, LstmState(h, c))
        _, h_ref, c_ref = scalar_cell(p, x, h, c)
        np.testing.assert_allclose(out.h, h_ref, atol=1e-12)
        np.testing.assert_allclose(out.c, c_ref, atol=1e-12)


def test_gate_and_output_ranges():
    p = random_params(2, 5, 3, scale=1.0)
    rng = np.random.default_rng(1)
    _, _, cache = lstm.forward(p, rng.normal(scale=2, size=(40, 2)))
    H = p.hidden_size
    assert np.all((cache.gates[:, :3 * H] > 0) & (cache.gates[:, :3 * H] < 1))
    assert np.all(np.abs(cache.gates[:, 3 * H:]) < 1)
    assert np.all(np.abs(cache.h[1:]) < 1)


def test_forward_zero_params_predicts_bias():
    p = LstmParams.zeros(2, 3)
    p.b_out[:] = [0.25, -4.0]
    preds, _, _ = lstm.forward(p, np.ones((6, 2)))
    np.testing.assert_array_equal(preds, np.tile([0.25, -4.0], (6, 1)))


def test_forward_single_step_is_cell_plus_head():
    p = random_params(2, 3, 4)
    x = np.array([0.5, -0.1])
    preds, state, _ = lstm.forward(p, x[None, :])
    st = lstm.cell_step(p, x, LstmState.zeros(3))
    np.testing.assert_allclose(state.h, st.h)
    np.testing.assert_allclose(preds[0], p.w_out @ st.h + p.b_out)


def test_state_threading():
    p = random_params(2, 4, 5)
    x = np.random.default_rng(2).normal(size=(20, 2))
    full, fstate, _ = lstm.forward(p, x)
    a, mid, _ = lstm.forward(p, x[:8])
    b, end, _ = lstm.forward(p, x[8:], mid)
    np.testing.assert_allclose(np.vstack([a, b]), full, atol=1e-14)
    np.testing.assert_allclose(end.c, fstate.c, atol=1e-14)


def test_shape_errors():
    p = random_params(2, 3, 0)
    with pytest.raises(lstm.ShapeMismatch):
        lstm.forward(p, np.ones((4, 3)))
    with pytest.raises(lstm.ShapeMismatch):
        lstm.cell_step(p, [1.0], LstmState.zeros(3))
    with pytest.raises(lstm.ShapeMismatch):
        LstmParams.from_flat(np.zeros(5), 2, 3)


@pytest.mark.parametrize("seed", range(6))
def test_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    p = random_params(2, 3, seed + 100)
    x, y = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
    _, _, cache = lstm.forward(p, x)
    grad = lstm.backward(p, cache, y).flat()
    fd = fd_gradient(p, x, y)
    assert np.max(np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-6)) <= 1e-4


def test_gradient_shapes_mirror_params():
    p = random_params(2, 4, 1)
    _, _, cache = lstm.forward(p, np.ones((3, 2)))
    g = lstm.backward(p, cache, np.zeros((3, 2)))
    for a, b in zip(g.tensors(), p.tensors()):
        assert a.shape == b.shape


def test_gradient_vanishes_at_exact_fit():
    p = random_params(2, 3, 2)
    x = np.random.default_rng(3).normal(size=(4, 2))
    preds, _, cache = lstm.forward(p, x)
    g = lstm.backward(p, cache, preds).flat()
    assert np.max(np.abs(g)) <= 1e-12


def test_duplicated_sequence_gradient_scaling():
    # two identical segments: summed loss doubles the gradient, mean loss keeps it
    p = random_params(2, 3, 6)
    rng = np.random.default_rng(6)
    x, y = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
    _, _, cache = lstm.forward(p, x)
    one_sum = lstm.backward(p, cache, y, scale=1.0).flat()
    two_sum = sum(lstm.backward(p, cache, y, scale=1.0).flat() for _ in range(2))
    np.testing.assert_allclose(two_sum, 2 * one_sum, rtol=1e-15)
    two_mean = sum(lstm.backward(p, cache, y, scale=1 / (2 * y.size)).flat() for _ in range(2))
    np.testing.assert_allclose(two_mean, lstm.backward(p, cache, y).flat(), rtol=1e-12, atol=1e-15)


def test_stale_cache():
    p = random_params(2, 3, 0)
    _, _, cache = lstm.forward(p, np.ones((3, 2)))
    q = p.copy()
    q.w_out[0, 0] += 1.0
    with pytest.raises(lstm.StaleCache):
        lstm.backward(q, cache, np.zeros((3, 2)))


def test_train_on_sine_converges():
    params, curve = lstm.train(sine_windows(), TrainConfig(hidden_size=16, epochs=200, seed=0))
    assert curve.shape == (200,)
    preds = lstm.predict_updating(params, sine_windows().inputs)
    assert np.sqrt(np.mean((preds - sine_windows().targets) ** 2)) < 0.05
    smooth = np.convolve(curve, np.ones(10) / 10, mode="valid")
    assert smooth[-1] < smooth[20]


def test_train_is_deterministic():
    cfg = TrainConfig(hidden_size=4, epochs=15, seed=3)
    p1, c1 = lstm.train(sine_windows(60), cfg)
    p2, c2 = lstm.train(sine_windows(60), cfg)
    assert np.array_equal(c1, c2)
    assert np.array_equal(p1.flat(), p2.flat())


def test_zero_learning_rate_leaves_params():
    init = lstm.init_params(1, 4, seed=9)
    p, _ = lstm.train(sine_windows(50), TrainConfig(learning_rate=0.0, hidden_size=4, epochs=7), init=init)
    assert np.array_equal(p.flat(), init.flat())


def test_divergence_on_non_finite_loss():
    w = sine_windows(20)
    w.targets[3, 0] = np.inf
    with pytest.raises(lstm.Divergence):
        lstm.train(w, TrainConfig(hidden_size=3, epochs=3))


def test_dropout_training_runs_and_is_seeded():
    cfg = TrainConfig(hidden_size=4, epochs=5, dropout=0.3, seed=1)
    _, a = lstm.train(sine_windows(40), cfg)
    _, b = lstm.train(sine_windows(40), cfg)
    assert np.array_equal(a, b)


def test_predict_updating_contract():
    w = sine_windows(80)
    p = lstm.init_params(1, 5, seed=2)
    preds = lstm.predict_updating(p, w.inputs)
    fwd, _, _ = lstm.forward(p, w.inputs)
    assert preds.shape == w.inputs.shape
    np.testing.assert_array_equal(preds, fwd)


def test_constant_series_fixed_point():
    x = np.full((60, 1), 0.8)
    w = SupervisedWindows(x[:-1], x[1:])
    p, _ = lstm.train(w, TrainConfig(hidden_size=4, epochs=300, seed=0))
    preds = lstm.predict_updating(p, x)
    assert np.ptp(preds[10:]) < 1e-3
    assert abs(preds[-1, 0] - 0.8) < 1e-2


def test_free_running_matches_updating_for_first_step():
    p = random_params(1, 3, 8, scale=0.3)
    x = np.random.default_rng(0).normal(size=(10, 1))
    upd = lstm.predict_updating(p, x)
    fr = lstm.predict_free_running(p, x, 4)
    np.testing.assert_allclose(fr[0], upd[-1])
    assert fr.shape == (4, 1)


def test_training_on_segments():
    w = sine_windows(60)
    a = SupervisedWindows(w.inputs[:30], w.targets[:30])
    b = SupervisedWindows(w.inputs[35:], w.targets[35:])
    p, curve = lstm.train([a, b], TrainConfig(hidden_size=4, epochs=3))
    assert np.all(np.isfinite(curve))
