"""Dense numpy kernels with hand-written backward passes.

Every layer comes as a ``*_forward``/``*_backward`` pair where the forward
returns ``(output, cache)`` and the backward consumes the cache.  Arrays keep
whatever float dtype they are given, so the same code runs the 32-bit
training path and the 64-bit checking path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NonFiniteError

SELU_LAMBDA = 1.0507009873554804934193349852946
SELU_ALPHA = 1.6732632423543772848170429916717
PROB_FLOOR = 1e-12

ACTIVATIONS = ("selu", "tanh", "identity")


def check_finite(x, what="tensor"):
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"non-finite values in {what}")
    return x


def scatter_add_columns(n_rows, index, columns):
    """Row scatter-add given values column-major: ``out[index[i], j] += columns[j, i]``.

    Accumulation is sequential per column, so results are deterministic.
    """
    out = np.empty((columns.shape[0], n_rows), dtype=columns.dtype)
    for j, column in enumerate(columns):
        out[j] = np.bincount(index, weights=column, minlength=n_rows)
    return out.T


# ---------------------------------------------------------------------------
# activations


def selu(x):
    x = np.asarray(x)
    neg = SELU_ALPHA * np.expm1(np.minimum(x, 0))
    return SELU_LAMBDA * np.where(x > 0, x, neg)


def selu_grad(x):
    """Derivative of selu evaluated at the pre-activation ``x``."""
    x = np.asarray(x)
    return SELU_LAMBDA * np.where(x > 0, 1.0, SELU_ALPHA * np.exp(np.minimum(x, 0))).astype(x.dtype)


def sigmoid(x):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(logits, axis=-1):
    logits = np.asarray(logits)
    if not np.issubdtype(logits.dtype, np.floating):
        logits = logits.astype(np.float64)
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def _activate(z, activation):
    if activation == "selu":
        return selu(z)
    if activation == "tanh":
        return np.tanh(z)
    if activation == "identity":
        return z
    raise ConfigError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")


def _activation_backward(dy, z, y, activation):
    if activation == "selu":
        return dy * selu_grad(z)
    if activation == "tanh":
        return dy * (1.0 - y * y)
    return dy


# ---------------------------------------------------------------------------
# dense


def dense_forward(x, w, b, activation="identity"):
    """``activation(x @ w + b)`` for ``x`` of shape (..., n_in) and ``w`` (n_in, n_out)."""
    if x.shape[-1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ConfigError(f"dense shapes do not line up: x{x.shape} w{w.shape} b{b.shape}")
    z = x @ w + b
    y = _activate(z, activation)
    return y, (x, w, z, y, activation)


def dense_backward(dy, cache):
    x, w, z, y, activation = cache
    dz = _activation_backward(dy, z, y, activation)
    x2 = x.reshape(-1, x.shape[-1])
    dz2 = dz.reshape(-1, dz.shape[-1])
    dw = x2.T @ dz2
    db = dz2.sum(axis=0)
    dx = dz @ w.T
    return dx, dw, db


def dense(x, w, b, activation="identity"):
    return dense_forward(np.asarray(x), np.asarray(w), np.asarray(b), activation)[0]


# ---------------------------------------------------------------------------
# LSTM
#
# Gate layout along the last axis of w_x, w_h and b is [input, forget, cell, output].


def _check_lstm_shapes(d, w_x, w_h, b):
    hidden = w_h.shape[0]
    if w_x.shape != (d, 4 * hidden) or w_h.shape != (hidden, 4 * hidden) or b.shape != (4 * hidden,):
        raise ConfigError(
            f"LSTM weight shapes inconsistent with input dim {d}: "
            f"w_x{w_x.shape} w_h{w_h.shape} b{b.shape}"
        )
    return hidden


def lstm_step(x_t, h_prev, c_prev, w_x, w_h, b):
    """One LSTM time step; works on single vectors or on (batch, dim) rows."""
    hidden = _check_lstm_shapes(np.shape(x_t)[-1], w_x, w_h, b)
    if np.shape(h_prev)[-1] != hidden or np.shape(c_prev)[-1] != hidden:
        raise ConfigError("state size does not match LSTM hidden size")
    a = x_t @ w_x + h_prev @ w_h + b
    i = sigmoid(a[..., :hidden])
    f = sigmoid(a[..., hidden : 2 * hidden])
    g = np.tanh(a[..., 2 * hidden : 3 * hidden])
    o = sigmoid(a[..., 3 * hidden :])
    c_t = f * c_prev + i * g
    h_t = o * np.tanh(c_t)
    return h_t, c_t


def lstm_forward(x, w_x, w_h, b):
    """Run the LSTM over ``x`` of shape (batch, time, d) from zero state.

    Returns the full hidden sequence (batch, time, H) and a cache for
    :func:`lstm_backward`.
    """
    batch, steps, d = x.shape
    hidden = _check_lstm_shapes(d, w_x, w_h, b)
    dtype = x.dtype
    xa = x @ w_x + b
    gates = np.empty((steps, batch, 4 * hidden), dtype=dtype)
    cells = np.empty((steps + 1, batch, hidden), dtype=dtype)
    hs = np.empty((steps + 1, batch, hidden), dtype=dtype)
    cells[0] = 0.0
    hs[0] = 0.0
    tanh_c = np.empty((steps, batch, hidden), dtype=dtype)
    for t in range(steps):
        a = xa[:, t] + hs[t] @ w_h
        act = gates[t]
        act[:, : 2 * hidden] = sigmoid(a[:, : 2 * hidden])
        act[:, 2 * hidden : 3 * hidden] = np.tanh(a[:, 2 * hidden : 3 * hidden])
        act[:, 3 * hidden :] = sigmoid(a[:, 3 * hidden :])
        i = act[:, :hidden]
        f = act[:, hidden : 2 * hidden]
        g = act[:, 2 * hidden : 3 * hidden]
        o = act[:, 3 * hidden :]
        cells[t + 1] = f * cells[t] + i * g
        tanh_c[t] = np.tanh(cells[t + 1])
        hs[t + 1] = o * tanh_c[t]
    out = np.ascontiguousarray(hs[1:].transpose(1, 0, 2))
    return out, (x, w_x, w_h, gates, cells, hs, tanh_c)


def lstm_backward(dout, cache):
    """Backpropagation through time.  ``dout`` is dL/dh for every step."""
    x, w_x, w_h, gates, cells, hs, tanh_c = cache
    steps, batch, four_h = gates.shape
    hidden = four_h // 4
    da = np.empty_like(gates)
    dw_h = np.zeros_like(w_h)
    dh_next = np.zeros((batch, hidden), dtype=x.dtype)
    dc_next = np.zeros((batch, hidden), dtype=x.dtype)
    for t in reversed(range(steps)):
        act = gates[t]
        i = act[:, :hidden]
        f = act[:, hidden : 2 * hidden]
        g = act[:, 2 * hidden : 3 * hidden]
        o = act[:, 3 * hidden :]
        dh = dout[:, t] + dh_next
        dc = dc_next + dh * o * (1.0 - tanh_c[t] ** 2)
        d = da[t]
        d[:, :hidden] = dc * g * i * (1.0 - i)
        d[:, hidden : 2 * hidden] = dc * cells[t] * f * (1.0 - f)
        d[:, 2 * hidden : 3 * hidden] = dc * i * (1.0 - g * g)
        d[:, 3 * hidden :] = dh * tanh_c[t] * o * (1.0 - o)
        dc_next = dc * f
        dw_h += hs[t].T @ d
        dh_next = d @ w_h.T
    da_bt = da.transpose(1, 0, 2)  # (batch, time, 4H)
    dx = da_bt @ w_x.T
    flat_x = x.reshape(-1, x.shape[-1])
    flat_da = da_bt.reshape(-1, four_h)
    dw_x = flat_x.T @ flat_da
    db = flat_da.sum(axis=0)
    return dx, dw_x, dw_h, db


# ---------------------------------------------------------------------------
# convolution over time + max pooling


def conv1d_maxpool_forward(seq, filters, bias=None):
    """Valid 1-D convolution over time followed by max-over-time pooling.

    ``seq`` is (batch, T, H); ``filters`` is (width, H, F).  Returns pooled
    features (batch, F) and a cache holding the argmax window start.
    """
    width, in_dim, n_filters = filters.shape
    batch, steps, h = seq.shape
    if h != in_dim:
        raise ConfigError(f"filter depth {in_dim} does not match sequence features {h}")
    if steps < width:
        raise ConfigError(f"sequence length {steps} shorter than kernel width {width}")
    n_windows = steps - width + 1
    conv = np.zeros((batch, n_windows, n_filters), dtype=seq.dtype)
    if bias is not None:
        conv += bias
    for k in range(width):
        conv += seq[:, k : k + n_windows] @ filters[k]
    arg = np.argmax(conv, axis=1)  # (B, F)
    pooled = np.take_along_axis(conv, arg[:, None, :], axis=1)[:, 0, :]
    return pooled, (seq, filters, arg)


def conv1d_maxpool_backward(dpooled, cache):
    seq, filters, arg = cache
    width, in_dim, n_filters = filters.shape
    batch, steps, _ = seq.shape
    out_len = steps - width + 1
    # route the pooled gradient back to the argmax position only
    dconv = np.zeros((batch, out_len, n_filters), dtype=dpooled.dtype)
    np.put_along_axis(dconv, arg[:, None, :], dpooled[:, None, :], axis=1)
    flat_dconv = dconv.reshape(-1, n_filters)
    dseq = np.zeros_like(seq)
    dfilters = np.empty_like(filters)
    for k in range(width):
        window = seq[:, k:k + out_len, :]
        dfilters[k] = window.reshape(-1, in_dim).T @ flat_dconv
        dseq[:, k:k + out_len, :] += (flat_dconv @ filters[k].T).reshape(batch, out_len, in_dim)
    dbias = dpooled.sum(axis=0)
    return dseq, dfilters, dbias


def conv1d_maxpool(seq, filters, bias=None):
    """Convenience wrapper for a single (T, H) sequence; returns (pooled, argmax)."""
    seq = np.asarray(seq)
    filters = np.asarray(filters)
    squeeze = seq.ndim == 2
    if squeeze:
        seq = seq[None]
    pooled, (_, _, arg) = conv1d_maxpool_forward(seq, filters, bias)
    if squeeze:
        return pooled[0], arg[0]
    return pooled, arg


# ---------------------------------------------------------------------------
# losses


def cross_entropy(probs, target):
    """``-log(probs[target])`` with probabilities floored at 1e-12.

    Accepts a single distribution and class index, or a (batch, C) array with a
    vector of indices, in which case the per-example losses are returned.
    """
    probs = np.asarray(probs, dtype=float) if not hasattr(probs, "dtype") else probs
    if probs.ndim == 1:
        return float(-np.log(max(float(probs[target]), PROB_FLOOR)))
    picked = probs[np.arange(probs.shape[0]), np.asarray(target)]
    return -np.log(np.maximum(picked, PROB_FLOOR))


def l2_loss(pred, target):
    diff = np.asarray(pred) - np.asarray(target)
    out = diff * diff
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Adam


@dataclass
class Parameter:
    value: np.ndarray
    grad: np.ndarray = None

    def __post_init__(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        if self.grad.shape != self.value.shape:
            raise ConfigError(f"grad shape {self.grad.shape} != value shape {self.value.shape}")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def like(cls, value, **hyper):
        return cls(m=np.zeros_like(value), v=np.zeros_like(value), **hyper)


def adam_update(param, state):
    """One bias-corrected Adam step, applied in place.  Returns ``(param, state)``."""
    g = param.grad
    state.t += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * g
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * (g * g)
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    param.value -= (state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(param.value.dtype)
    return param, state


# ---------------------------------------------------------------------------
# gradient checking


def relative_error(analytic, numeric):
    return np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))


def grad_check_report(loss_fn, params, epsilon=1e-4, skip=None):
    """Per-tensor maximum relative error between analytic and central-difference gradients.

    ``loss_fn()`` must evaluate the loss at the current contents of ``params``
    (a name -> float64 array mapping, perturbed in place) and return
    ``(loss, grads)``.  ``skip`` maps a tensor name to a boolean mask of
    elements to leave out (frozen entries), or to ``True`` to skip the tensor.
    """
    skip = skip or {}
    _, grads = loss_fn()
    grads = {k: np.array(v, dtype=np.float64) for k, v in grads.items()}
    report = {}
    for name, value in params.items():
        mask = skip.get(name)
        if mask is True:
            continue
        worst = 0.0
        flat = value.reshape(-1)
        if not np.shares_memory(flat, value):
            raise ConfigError(f"parameter {name!r} must be contiguous to be perturbed in place")
        for idx in range(flat.size):
            if mask is not None and np.asarray(mask).reshape(-1)[idx]:
                continue
            orig = flat[idx]
            flat[idx] = orig + epsilon
            up = loss_fn()[0]
            flat[idx] = orig - epsilon
            down = loss_fn()[0]
            flat[idx] = orig
            numeric = (up - down) / (2.0 * epsilon)
            err = float(relative_error(grads[name].reshape(-1)[idx], numeric))
            worst = max(worst, err)
        report[name] = worst
    return report


def grad_check(loss_fn, params, epsilon=1e-4, skip=None):
    """Maximum relative gradient error over every checked parameter element."""
    report = grad_check_report(loss_fn, params, epsilon, skip)
    return max(report.values(), default=0.0)
