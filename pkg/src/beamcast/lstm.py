"""Single-layer LSTM regressor with a dense head, trained by full BPTT.

Gate equations, with ``*`` the elementwise product::

    f = sigmoid(w_xf x + w_hf h_prev + b_f)
    i = sigmoid(w_xi x + w_hi h_prev + b_i)
    o = sigmoid(w_xo x + w_ho h_prev + b_o)
    g = tanh(w_xc x + w_hc h_prev + b_c)
    c = f * c_prev + i * g
    h = o * tanh(c)
    y = w_out h + b_out
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .timeseries import SupervisedWindows

GATES = ("f", "i", "o", "c")
PARAM_NAMES = (
    "w_xf", "w_xi", "w_xo", "w_xc",
    "w_hf", "w_hi", "w_ho", "w_hc",
    "b_f", "b_i", "b_o", "b_c",
    "w_out", "b_out",
)


class ShapeMismatch(ValueError):
    pass


class StaleCache(RuntimeError):
    """Backward was called with a cache from different parameters."""


class Divergence(FloatingPointError):
    pass


@dataclass
class LstmParams:
    w_xf: np.ndarray
    w_xi: np.ndarray
    w_xo: np.ndarray
    w_xc: np.ndarray
    w_hf: np.ndarray
    w_hi: np.ndarray
    w_ho: np.ndarray
    w_hc: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_o: np.ndarray
    b_c: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray

    def __post_init__(self):
        for name in PARAM_NAMES:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        H, C = self.hidden_size, self.input_size
        for g in GATES:
            if getattr(self, "w_x" + g).shape != (H, C):
                raise ShapeMismatch(f"w_x{g} must be {(H, C)}")
            if getattr(self, "w_h" + g).shape != (H, H):
                raise ShapeMismatch(f"w_h{g} must be {(H, H)}")
            if getattr(self, "b_" + g).shape != (H,):
                raise ShapeMismatch(f"b_{g} must be {(H,)}")
        if self.w_out.ndim != 2 or self.w_out.shape[1] != H or self.b_out.shape != (self.w_out.shape[0],):
            raise ShapeMismatch("dense head shapes are inconsistent")

    @property
    def hidden_size(self) -> int:
        return self.w_xf.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_xf.shape[1]

    @property
    def output_size(self) -> int:
        return self.w_out.shape[0]

    def tensors(self) -> list[np.ndarray]:
        return [getattr(self, n) for n in PARAM_NAMES]

    def flat(self) -> np.ndarray:
        return np.concatenate([t.ravel() for t in self.tensors()])

    def copy(self) -> "LstmParams":
        return LstmParams(*(t.copy() for t in self.tensors()))

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int, output_size: int | None = None) -> "LstmParams":
        C, H = input_size, hidden_size
        O = C if output_size is None else output_size
        shapes = param_shapes(C, H, O)
        return cls(*(np.zeros(shapes[n]) for n in PARAM_NAMES))

    @classmethod
    def from_flat(cls, vec, input_size: int, hidden_size: int, output_size: int | None = None) -> "LstmParams":
        O = input_size if output_size is None else output_size
        shapes = param_shapes(input_size, hidden_size, O)
        vec = np.asarray(vec, dtype=float)
        sizes = [int(np.prod(shapes[n])) for n in PARAM_NAMES]
        if sum(sizes) != vec.size:
            raise ShapeMismatch(f"flat vector has {vec.size} entries, expected {sum(sizes)}")
        out, k = [], 0
        for n, size in zip(PARAM_NAMES, sizes):
            out.append(vec[k:k + size].reshape(shapes[n]))
            k += size
        return cls(*out)


def param_shapes(C: int, H: int, O: int) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    for g in GATES:
        shapes["w_x" + g] = (H, C)
        shapes["w_h" + g] = (H, H)
        shapes["b_" + g] = (H,)
    shapes["w_out"] = (O, H)
    shapes["b_out"] = (O,)
    return shapes


def init_params(input_size: int, hidden_size: int, seed: int = 0, output_size: int | None = None) -> LstmParams:
    """Uniform(-1/sqrt(H), 1/sqrt(H)) weights, forget bias 1, other biases 0."""
    rng = np.random.default_rng(seed)
    O = input_size if output_size is None else output_size
    shapes = param_shapes(input_size, hidden_size, O)
    bound = 1.0 / np.sqrt(hidden_size)
    vals = {}
    for n in PARAM_NAMES:
        if n.startswith("w_"):
            vals[n] = rng.uniform(-bound, bound, shapes[n])
        else:
            vals[n] = np.zeros(shapes[n])
    vals["b_f"][:] = 1.0
    return LstmParams(**vals)


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden_size: int) -> "LstmState":
        return cls(np.zeros(hidden_size), np.zeros(hidden_size))


@dataclass
class TrainConfig:
    learning_rate: float = 1e-2
    epochs: int = 100
    seed: int = 0
    grad_clip: float = 1.0
    hidden_size: int = 64
    dropout: float = 0.0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _stacked(p: LstmParams):
    Wx = np.vstack([p.w_xf, p.w_xi, p.w_xo, p.w_xc])
    Wh = np.vstack([p.w_hf, p.w_hi, p.w_ho, p.w_hc])
    b = np.concatenate([p.b_f, p.b_i, p.b_o, p.b_c])
    return Wx, Wh, b


def _check_inputs(p: LstmParams, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x[:, None] if p.input_size == 1 else x[None, :]
    if x.ndim != 2 or x.shape[1] != p.input_size:
        raise ShapeMismatch(f"inputs must be (T, {p.input_size}), got {np.shape(inputs)}")
    if x.shape[0] == 0:
        raise ShapeMismatch("input sequence is empty")
    return x


def cell_step(p: LstmParams, x_t, prev: LstmState) -> LstmState:
    x = np.asarray(x_t, dtype=float).ravel()
    if x.size != p.input_size or prev.h.shape != (p.hidden_size,) or prev.c.shape != (p.hidden_size,):
        raise ShapeMismatch("input or state size does not match parameters")
    f = _sigmoid(p.w_xf @ x + p.w_hf @ prev.h + p.b_f)
    i = _sigmoid(p.w_xi @ x + p.w_hi @ prev.h + p.b_i)
    o = _sigmoid(p.w_xo @ x + p.w_ho @ prev.h + p.b_o)
    g = np.tanh(p.w_xc @ x + p.w_hc @ prev.h + p.b_c)
    c = f * prev.c + i * g
    return LstmState(o * np.tanh(c), c)


@dataclass
class ForwardCache:
    x: np.ndarray
    gates: np.ndarray  # (T, 4H): f, i, o, g after activation
    h: np.ndarray  # (T+1, H), row 0 is the initial state
    c: np.ndarray  # (T+1, H)
    h_out: np.ndarray  # (T, H) hidden state fed to the head (after dropout)
    mask: np.ndarray | None
    fingerprint: np.ndarray = field(repr=False)


def forward(p: LstmParams, inputs, initial: LstmState | None = None, dropout_mask=None):
    """Run the sequence; returns ``(predictions (T, O), final state, cache)``."""
    x = _check_inputs(p, inputs)
    T, H = x.shape[0], p.hidden_size
    state = LstmState.zeros(H) if initial is None else initial
    Wx, Wh, b = _stacked(p)
    zx = x @ Wx.T + b
    hs = np.empty((T + 1, H))
    cs = np.empty((T + 1, H))
    gates = np.empty((T, 4 * H))
    hs[0], cs[0] = state.h, state.c
    for t in range(T):
        z = zx[t] + Wh @ hs[t]
        act = _sigmoid(z)
        act[3 * H:] = np.tanh(z[3 * H:])
        f, i, o, g = act[:H], act[H:2 * H], act[2 * H:3 * H], act[3 * H:]
        cs[t + 1] = f * cs[t] + i * g
        hs[t + 1] = o * np.tanh(cs[t + 1])
        gates[t] = act
    h_out = hs[1:] if dropout_mask is None else hs[1:] * dropout_mask
    preds = h_out @ p.w_out.T + p.b_out
    cache = ForwardCache(x, gates, hs, cs, h_out, dropout_mask, p.flat())
    return preds, LstmState(hs[T].copy(), cs[T].copy()), cache


def backward(p: LstmParams, cache: ForwardCache, targets, scale: float | None = None) -> LstmParams:
    """Gradient of ``scale * sum((pred - target)**2)`` w.r.t. every parameter.

    ``scale`` defaults to ``1 / (T * O)``, i.e. the mean squared error.
    """
    fp = p.flat()
    if fp.shape != cache.fingerprint.shape or not np.array_equal(fp, cache.fingerprint):
        raise StaleCache("cache was produced by different parameters")
    y = np.asarray(targets, dtype=float).reshape(cache.h_out.shape[0], p.output_size)
    T, H = y.shape[0], p.hidden_size
    if scale is None:
        scale = 1.0 / y.size
    preds = cache.h_out @ p.w_out.T + p.b_out
    dy = 2.0 * scale * (preds - y)

    d_wout = dy.T @ cache.h_out
    d_bout = dy.sum(axis=0)
    dh_head = dy @ p.w_out
    if cache.mask is not None:
        dh_head = dh_head * cache.mask

    _, Wh, _ = _stacked(p)
    dz_all = np.empty((T, 4 * H))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in range(T - 1, -1, -1):
        act = cache.gates[t]
        f, i, o, g = act[:H], act[H:2 * H], act[2 * H:3 * H], act[3 * H:]
        tc = np.tanh(cache.c[t + 1])
        dh = dh_head[t] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz = dz_all[t]
        dz[:H] = dc * cache.c[t] * f * (1.0 - f)
        dz[H:2 * H] = dc * g * i * (1.0 - i)
        dz[2 * H:3 * H] = dh * tc * o * (1.0 - o)
        dz[3 * H:] = dc * i * (1.0 - g * g)
        dh_next = Wh.T @ dz
        dc_next = dc * f
    dWx = dz_all.T @ cache.x
    dWh = dz_all.T @ cache.h[:-1]
    db = dz_all.sum(axis=0)
    grads = {}
    for k, gname in enumerate(GATES):
        sl = slice(k * H, (k + 1) * H)
        grads["w_x" + gname] = dWx[sl]
        grads["w_h" + gname] = dWh[sl]
        grads["b_" + gname] = db[sl]
    grads["w_out"] = d_wout
    grads["b_out"] = d_bout
    return LstmParams(**grads)


def mse_loss(p: LstmParams, inputs, targets) -> float:
    preds, _, _ = forward(p, inputs)
    return float(np.mean((preds - np.asarray(targets, dtype=float).reshape(preds.shape)) ** 2))


class _Adam:
    def __init__(self, size: int, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0

    def step(self, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1 ** self.t)
        vhat = self.v / (1 - self.beta2 ** self.t)
        return -self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _segments(windows) -> list[SupervisedWindows]:
    if isinstance(windows, SupervisedWindows):
        return [windows]
    return list(windows)


def train(windows: SupervisedWindows | Sequence[SupervisedWindows], cfg: TrainConfig,
          init: LstmParams | None = None) -> tuple[LstmParams, np.ndarray]:
    """Full-sequence BPTT with Adam and global-norm clipping.

    ``windows`` may be a list of disjoint segments; each starts from a zero
    state and the loss is the mean over all cells of all segments. Returns the
    trained parameters and the per-epoch loss (evaluated before each update).
    """
    segs = _segments(windows)
    if sum(len(s) for s in segs) < 2:
        raise ValueError("need at least 2 windows to train")
    C = segs[0].num_channels
    params = init.copy() if init is not None else init_params(C, cfg.hidden_size, cfg.seed)
    n_cells = sum(s.targets.size for s in segs)
    opt = _Adam(params.flat().size, cfg.learning_rate)
    rng = np.random.default_rng([cfg.seed, 1])
    keep = 1.0 - cfg.dropout
    curve = np.empty(cfg.epochs)
    for epoch in range(cfg.epochs):
        total = 0.0
        grad = np.zeros(params.flat().size)
        for s in segs:
            mask = None
            if cfg.dropout > 0:
                mask = (rng.random((len(s), params.hidden_size)) < keep) / keep
            preds, _, cache = forward(params, s.inputs, dropout_mask=mask)
            total += float(np.sum((preds - s.targets) ** 2))
            if not np.isfinite(total):
                raise Divergence(f"loss became non-finite at epoch {epoch}")
            grad += backward(params, cache, s.targets, scale=1.0 / n_cells).flat()
        loss = total / n_cells
        if not np.all(np.isfinite(grad)):
            raise Divergence(f"gradient became non-finite at epoch {epoch}")
        curve[epoch] = loss
        norm = np.linalg.norm(grad)
        if norm > cfg.grad_clip:
            grad *= cfg.grad_clip / norm
        params = LstmParams.from_flat(params.flat() + opt.step(grad), C, params.hidden_size, params.output_size)
    return params, curve


def predict_updating(p: LstmParams, observed, initial: LstmState | None = None) -> np.ndarray:
    """One-step-ahead forecasts with the state advanced on observed values.

    ``out[t]`` forecasts the value following ``observed[t]``.
    """
    preds, _, _ = forward(p, observed, initial)
    return preds


def predict_free_running(p: LstmParams, primer, steps: int, initial: LstmState | None = None) -> np.ndarray:
    """Closed-loop rollout: prime on observed values, then feed predictions back.

    Returns ``steps`` forecasts; the first follows the last primer value.
    """
    preds, state, _ = forward(p, primer, initial)
    out = np.empty((steps, p.output_size))
    y = preds[-1]
    for t in range(steps):
        out[t] = y
        if t + 1 < steps:
            state = cell_step(p, y, state)
            y = p.w_out @ state.h + p.b_out
    return out

