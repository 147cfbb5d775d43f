import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from soc import nncore
from soc.errors import ConfigError, NonFiniteError


class TestSelu:
    def test_zero(self):
        assert nncore.selu(0.0) == 0.0

    def test_closed_form_values(self):
        assert nncore.selu(1.0) == pytest.approx(1.05070099, abs=1e-8)
        assert nncore.selu(-1.0) == pytest.approx(-1.11133073, abs=1e-8)
        assert nncore.selu(-1.0) == pytest.approx(oracles.selu(-1.0), abs=1e-15)

    def test_continuous_at_zero(self):
        assert abs(nncore.selu(1e-9) - nncore.selu(-1e-9)) < 1e-8

    def test_grad_matches_central_difference(self):
        x = np.array([-3.0, -0.7, -1e-2, 1e-2, 0.4, 2.5])
        h = 1e-6
        numeric = (nncore.selu(x + h) - nncore.selu(x - h)) / (2 * h)
        np.testing.assert_allclose(nncore.selu_grad(x), numeric, rtol=1e-6)

    def test_large_negative_saturates(self):
        assert nncore.selu(-1000.0) == pytest.approx(-oracles.LAMBDA * oracles.ALPHA)


class TestSoftmax:
    @pytest.mark.parametrize(
        "logits, expected",
        [
            ([0.0, 0.0], [0.5, 0.5]),
            ([1.0, 1.0, 1.0], [1 / 3, 1 / 3, 1 / 3]),
            ([2.0, 0.0], [math.e**2 / (math.e**2 + 1), 1 / (math.e**2 + 1)]),
        ],
    )
    def test_examples(self, logits, expected):
        np.testing.assert_allclose(nncore.softmax(np.array(logits)), expected, atol=1e-12)

    def test_two_zero_is_088080(self):
        np.testing.assert_allclose(nncore.softmax(np.array([2.0, 0.0])), [0.88080, 0.11920], atol=1e-5)

    def test_huge_logits_stay_finite(self):
        p = nncore.softmax(np.array([1000.0, -1000.0]))
        assert np.all(np.isfinite(p)) and p[0] == 1.0

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-50, 50)))
    def test_is_distribution(self, logits):
        p = nncore.softmax(logits)
        assert abs(p.sum() - 1.0) < 1e-6
        assert np.all(p > 0) and np.all(p <= 1)

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, 2, elements=st.floats(-20, 20)), st.floats(-100, 100))
    def test_shift_invariant(self, logits, c):
        np.testing.assert_allclose(nncore.softmax(logits + c), nncore.softmax(logits), atol=1e-9)


class TestLstmStep:
    def _weights(self, rng, d, h, scale=0.5):
        return (
            rng.uniform(-scale, scale, (d, 4 * h)),
            rng.uniform(-scale, scale, (h, 4 * h)),
            rng.uniform(-scale, scale, 4 * h),
        )

    def test_all_zero(self):
        d, h = 3, 4
        h_t, c_t = nncore.lstm_step(np.zeros(d), np.zeros(h), np.zeros(h), np.zeros((d, 4 * h)), np.zeros((h, 4 * h)), np.zeros(4 * h))
        assert np.all(h_t == 0) and np.all(c_t == 0)

    def test_saturated_forget_gate_keeps_cell(self):
        d, h = 2, 3
        b = np.zeros(4 * h)
        b[h : 2 * h] = 50.0  # forget gate -> 1
        b[: h] = -50.0  # input gate -> 0
        c_prev = np.array([0.3, -0.8, 1.5])
        _, c_t = nncore.lstm_step(np.ones(d), np.zeros(h), c_prev, np.zeros((d, 4 * h)), np.zeros((h, 4 * h)), b)
        np.testing.assert_allclose(c_t, c_prev, atol=1e-12)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(0)
        d, h = 5, 4
        w_x, w_h, b = self._weights(rng, d, h)
        x, hp, cp = rng.normal(size=d), rng.uniform(-1, 1, h), rng.normal(size=h)
        h_t, c_t = nncore.lstm_step(x, hp, cp, w_x, w_h, b)
        oh, oc = oracles.lstm_step(x.tolist(), hp.tolist(), cp.tolist(), w_x.tolist(), w_h.tolist(), b.tolist())
        np.testing.assert_allclose(h_t, oh, atol=1e-12)
        np.testing.assert_allclose(c_t, oc, atol=1e-12)
        assert np.all(np.abs(h_t) < 1)

    def test_shape_mismatch(self):
        with pytest.raises(ConfigError):
            nncore.lstm_step(np.zeros(3), np.zeros(4), np.zeros(4), np.zeros((2, 16)), np.zeros((4, 16)), np.zeros(16))

    def test_sequence_forward_chains_steps(self):
        rng = np.random.default_rng(1)
        d, h, T = 3, 5, 7
        w_x, w_h, b = self._weights(rng, d, h)
        x = rng.normal(size=(2, T, d))
        hs, _ = nncore.lstm_forward(x, w_x, w_h, b)
        hp, cp = np.zeros((2, h)), np.zeros((2, h))
        for t in range(T):
            hp, cp = nncore.lstm_step(x[:, t], hp, cp, w_x, w_h, b)
            np.testing.assert_allclose(hs[:, t], hp, atol=1e-14)


def _layer_check(loss_fn, params):
    return nncore.grad_check_report(loss_fn, params)


class TestLayerGradients:
    def test_lstm(self):
        rng = np.random.default_rng(2)
        d, h, T = 3, 4, 6
        params = {
            "x": rng.normal(size=(2, T, d)),
            "w_x": rng.uniform(-0.5, 0.5, (d, 4 * h)),
            "w_h": rng.uniform(-0.5, 0.5, (h, 4 * h)),
            "b": rng.uniform(-0.5, 0.5, 4 * h),
        }
        r = rng.normal(size=(2, T, h))

        def loss():
            hs, cache = nncore.lstm_forward(params["x"], params["w_x"], params["w_h"], params["b"])
            dx, dwx, dwh, db = nncore.lstm_backward(r, cache)
            return float(np.sum(hs * r)), {"x": dx, "w_x": dwx, "w_h": dwh, "b": db}

        report = _layer_check(loss, params)
        assert max(report.values()) < 1e-6, report

    def test_conv_maxpool(self):
        rng = np.random.default_rng(3)
        params = {"seq": rng.normal(size=(2, 9, 4)), "w": rng.normal(size=(3, 4, 5)), "b": rng.normal(size=5)}
        r = rng.normal(size=(2, 5))

        def loss():
            pooled, cache = nncore.conv1d_maxpool_forward(params["seq"], params["w"], params["b"])
            ds, dw, db = nncore.conv1d_maxpool_backward(r, cache)
            return float(np.sum(pooled * r)), {"seq": ds, "w": dw, "b": db}

        report = _layer_check(loss, params)
        assert max(report.values()) < 1e-6, report

    @pytest.mark.parametrize("activation", ["selu", "tanh", "identity"])
    def test_dense(self, activation):
        rng = np.random.default_rng(4)
        params = {"x": rng.normal(size=(3, 4)), "w": rng.normal(size=(4, 5)), "b": rng.normal(size=5)}
        r = rng.normal(size=(3, 5))

        def loss():
            y, cache = nncore.dense_forward(params["x"], params["w"], params["b"], activation)
            dx, dw, db = nncore.dense_backward(r, cache)
            return float(np.sum(y * r)), {"x": dx, "w": dw, "b": db}

        assert max(_layer_check(loss, params).values()) < 1e-5


class TestConv:
    def test_hand_example(self):
        pooled, arg = nncore.conv1d_maxpool(np.array([[1.0, 2.0], [3.0, 4.0]]), np.ones((2, 2, 1)))
        assert pooled.tolist() == [10.0]
        assert arg.tolist() == [0]

    def test_zero_filters(self):
        rng = np.random.default_rng(0)
        pooled, _ = nncore.conv1d_maxpool(rng.normal(size=(6, 3)), np.zeros((2, 3, 4)))
        assert np.all(pooled == 0)

    def test_matches_oracle_and_dominates_windows(self):
        rng = np.random.default_rng(5)
        seq, filt, bias = rng.normal(size=(8, 3)), rng.normal(size=(3, 3, 4)), rng.normal(size=4)
        pooled, _ = nncore.conv1d_maxpool(seq, filt, bias)
        np.testing.assert_allclose(pooled, oracles.conv_maxpool(seq.tolist(), filt.tolist(), bias.tolist()), atol=1e-12)
        for t in range(8 - 3 + 1):
            window = np.einsum("kh,khf->f", seq[t : t + 3], filt) + bias
            assert np.all(pooled >= window - 1e-12)

    def test_too_short(self):
        with pytest.raises(ConfigError):
            nncore.conv1d_maxpool(np.zeros((2, 3)), np.zeros((3, 3, 1)))


class TestDense:
    def test_identity(self):
        x = np.array([0.5, -2.0, 3.0])
        np.testing.assert_array_equal(nncore.dense(x, np.eye(3), np.zeros(3)), x)

    @pytest.mark.parametrize("activation", ["selu", "tanh"])
    def test_zero_input(self, activation):
        assert np.all(nncore.dense(np.zeros(3), np.ones((3, 2)), np.zeros(2), activation) == 0)

    def test_matches_loop(self):
        rng = np.random.default_rng(6)
        x, w, b = rng.normal(size=4), rng.normal(size=(4, 3)), rng.normal(size=3)
        expected = [oracles.selu(z + bb) for z, bb in zip(oracles.matvec(x.tolist(), w.tolist()), b.tolist())]
        np.testing.assert_allclose(nncore.dense(x, w, b, "selu"), expected, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ConfigError):
            nncore.dense(np.zeros(3), np.zeros((4, 2)), np.zeros(2))

    def test_unknown_activation(self):
        with pytest.raises(ConfigError):
            nncore.dense(np.zeros(2), np.zeros((2, 2)), np.zeros(2), "relu")


class TestLosses:
    def test_cross_entropy(self):
        assert nncore.cross_entropy(np.array([1.0, 0.0]), 0) == 0.0
        assert nncore.cross_entropy(np.array([0.5, 0.5]), 1) == pytest.approx(math.log(2), abs=1e-12)
        assert nncore.cross_entropy(np.array([0.25, 0.75]), 0) == pytest.approx(math.log(4), abs=1e-12)
        assert nncore.cross_entropy(np.array([1.0, 0.0]), 1) == pytest.approx(-math.log(1e-12))

    def test_cross_entropy_batch(self):
        out = nncore.cross_entropy(np.array([[0.5, 0.5], [0.25, 0.75]]), np.array([1, 0]))
        np.testing.assert_allclose(out, [math.log(2), math.log(4)])

    @pytest.mark.parametrize("pred, target, expected", [(0.3, 0.3, 0.0), (0.0, 1.0, 1.0), (-0.5, 1.0, 2.25)])
    def test_l2(self, pred, target, expected):
        assert nncore.l2_loss(pred, target) == pytest.approx(expected, abs=1e-15)


def _scalar_adam(grads, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8, value=0.0):
    m = v = 0.0
    for t, g in enumerate(grads, 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        value -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
    return value


class TestAdam:
    def _step(self, value, grads):
        p = nncore.Parameter(np.array([value]))
        state = nncore.AdamState.like(p.value)
        for g in grads:
            p.grad[:] = g
            nncore.adam_update(p, state)
        return p, state

    def test_first_step(self):
        p, state = self._step(1.0, [0.5])
        assert state.t == 1
        assert state.m[0] == pytest.approx(0.05, abs=1e-15)
        assert state.v[0] == pytest.approx(0.00025, abs=1e-15)
        assert abs(p.value[0] - (1.0 - 1e-3 * 0.5 / (0.5 + 1e-8))) < 1e-12

    def test_zero_gradient_is_fixed_point(self):
        value = np.array([0.123456789, -7.0])
        p = nncore.Parameter(value.copy())
        state = nncore.AdamState.like(p.value)
        for _ in range(3):
            nncore.adam_update(p, state)
        assert p.value.tobytes() == value.tobytes()

    def test_momentum_carries_after_gradient_stops(self):
        p, _ = self._step(0.0, [0.5, 0.0, 0.0])
        assert abs(p.value[0] - _scalar_adam([0.5, 0.0, 0.0])) < 1e-15
        one_step = _scalar_adam([0.5])
        assert p.value[0] < one_step  # kept moving

    def test_second_moment_nonnegative(self):
        rng = np.random.default_rng(0)
        p = nncore.Parameter(rng.normal(size=10))
        state = nncore.AdamState.like(p.value)
        for _ in range(20):
            p.grad[:] = rng.normal(size=10)
            nncore.adam_update(p, state)
        assert np.all(state.v >= 0)

    def test_parameter_shape_guard(self):
        with pytest.raises(ConfigError):
            nncore.Parameter(np.zeros(3), np.zeros(4))


class TestGradCheck:
    def test_quadratic(self):
        params = {"w": np.array([3.0])}
        err = nncore.grad_check(lambda: (float(params["w"][0] ** 2), {"w": 2 * params["w"]}), params)
        assert err < 1e-9

    def test_detects_wrong_gradient(self):
        params = {"w": np.array([3.0, -1.0])}
        err = nncore.grad_check(lambda: (float(np.sum(params["w"] ** 2)), {"w": 2.2 * params["w"]}), params)
        assert err > 1e-2

    def test_skip_mask(self):
        params = {"w": np.array([3.0, -1.0])}
        wrong = lambda: (float(np.sum(params["w"] ** 2)), {"w": np.array([6.0, 0.0])})  # noqa: E731
        assert nncore.grad_check(wrong, params) > 0.5
        assert nncore.grad_check(wrong, params, skip={"w": np.array([False, True])}) < 1e-9


def test_check_finite():
    with pytest.raises(NonFiniteError):
        nncore.check_finite(np.array([1.0, np.nan]))


def test_kernels_are_deterministic():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(3, 10, 4))
    w_x, w_h, b = rng.normal(size=(4, 12)), rng.normal(size=(3, 12)), rng.normal(size=12)
    a, _ = nncore.lstm_forward(x, w_x, w_h, b)
    c, _ = nncore.lstm_forward(x.copy(), w_x.copy(), w_h.copy(), b.copy())
    assert a.tobytes() == c.tobytes()


def test_float32_preserved():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 5, 3)).astype(np.float32)
    hs, _ = nncore.lstm_forward(x, *(a.astype(np.float32) for a in (rng.normal(size=(3, 8)), rng.normal(size=(2, 8)), rng.normal(size=8))))
    assert hs.dtype == np.float32


class TestScatter:
    def test_matches_add_at(self):
        rng = np.random.default_rng(4)
        index = rng.integers(0, 7, 50)
        values = rng.normal(size=(50, 3))
        want = np.zeros((9, 3))
        np.add.at(want, index, values)
        got = nncore.scatter_add_columns(9, index, np.ascontiguousarray(values.T))
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)
        assert np.all(got[7:] == 0)
