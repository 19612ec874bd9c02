"""Nonlinear autoregressive (NAR) forecaster trained by Levenberg-Marquardt.

The model maps the ``p`` previous values of a C-channel series to the next one
through a single tanh hidden layer::

    y(t) = W2 tanh(W1 [y(t-1), ..., y(t-p)] + b1) + b2

Parameters live in one flat vector ordered ``W1, b1, W2, b2`` (row-major).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .timeseries import SupervisedWindows

MU_MAX = 1e10
MU_MIN = 1e-12


class WrongLagCount(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


class IllConditioned(np.linalg.LinAlgError):
    """The damped normal equations are not positive definite; raise mu."""


class Divergence(FloatingPointError):
    pass


class TooShort(ValueError):
    pass


@dataclass
class NarConfig:
    delays: int = 8
    hidden_neurons: int = 10
    mu_init: float = 1e-3
    mu_increase: float = 10.0
    mu_decrease: float = 0.1
    max_iterations: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.delays < 1 or self.hidden_neurons < 1:
            raise ValueError("delays and hidden_neurons must be >= 1")
        if not self.mu_init > 0:
            raise ValueError("mu_init must be positive")
        if not self.mu_increase > 1 or not 0 < self.mu_decrease < 1:
            raise ValueError("need mu_increase > 1 and 0 < mu_decrease < 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class NarParams:
    theta: np.ndarray
    delays: int
    hidden: int
    channels: int
    activation: str = "tanh"

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).ravel()
        n = num_params(self.delays, self.hidden, self.channels)
        if self.theta.size != n:
            raise ShapeMismatch(f"expected {n} parameters, got {self.theta.size}")
        if self.activation not in ("tanh", "identity"):
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def n_inputs(self) -> int:
        return self.delays * self.channels

    def unpack(self):
        D, Hn, C = self.n_inputs, self.hidden, self.channels
        k = 0
        W1 = self.theta[k:k + Hn * D].reshape(Hn, D)
        k += Hn * D
        b1 = self.theta[k:k + Hn]
        k += Hn
        W2 = self.theta[k:k + C * Hn].reshape(C, Hn)
        k += C * Hn
        b2 = self.theta[k:k + C]
        return W1, b1, W2, b2

    def with_theta(self, theta) -> "NarParams":
        return NarParams(theta, self.delays, self.hidden, self.channels, self.activation)


def num_params(delays: int, hidden: int, channels: int) -> int:
    return hidden * delays * channels + hidden + channels * hidden + channels


def pack(W1, b1, W2, b2, delays: int, activation: str = "tanh") -> NarParams:
    W1, W2 = np.asarray(W1, float), np.asarray(W2, float)
    theta = np.concatenate([W1.ravel(), np.ravel(b1), W2.ravel(), np.ravel(b2)])
    return NarParams(theta, delays, W1.shape[0], W2.shape[0], activation)


def init_params(delays: int, hidden: int, channels: int, seed: int = 0) -> NarParams:
    rng = np.random.default_rng(seed)
    return NarParams(rng.uniform(-0.5, 0.5, num_params(delays, hidden, channels)), delays, hidden, channels)


def lagged_windows(values, delays: int) -> SupervisedWindows:
    """Tapped-delay-line windows from a (T, C) series.

    Input row ``m`` is ``[y(t-1), ..., y(t-p)]`` flattened, target is ``y(t)``
    for ``t = p + m``.
    """
    y = np.asarray(values, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    T = y.shape[0]
    if T <= delays:
        raise TooShort(f"series of length {T} is too short for {delays} delays")
    rows = [y[t - delays:t][::-1].ravel() for t in range(delays, T)]
    return SupervisedWindows(np.array(rows), y[delays:].copy())


def _act(params: NarParams, a):
    if params.activation == "identity":
        return a, np.ones_like(a)
    z = np.tanh(a)
    return z, 1.0 - z * z


def nar_forward(params: NarParams, lagged_inputs) -> np.ndarray:
    """Network output for one set of lags (shape (p, C) or flat p*C) or a batch (M, p*C)."""
    u = np.asarray(lagged_inputs, dtype=float)
    # a (p, C) block of lags is a single sample unless it already reads as a batch
    single = u.ndim <= 1 or (u.shape == (params.delays, params.channels) and u.shape[1] != params.n_inputs)
    if single:
        u = u.reshape(1, -1)
    if u.shape[1] != params.n_inputs:
        raise WrongLagCount(f"expected {params.delays} lags of {params.channels} channels, got {u.shape[1]} values")
    W1, b1, W2, b2 = params.unpack()
    z, _ = _act(params, u @ W1.T + b1)
    out = z @ W2.T + b2
    return out[0] if single else out


def residuals_and_jacobian(params: NarParams, windows: SupervisedWindows):
    """Errors ``e = target - output`` stacked sample-major, and ``J = de/dtheta``."""
    u = np.asarray(windows.inputs, dtype=float)
    y = np.asarray(windows.targets, dtype=float)
    if u.ndim != 2 or u.shape[1] != params.n_inputs or y.shape != (u.shape[0], params.channels):
        raise ShapeMismatch("windows do not match the network's lag and channel counts")
    M, D = u.shape
    Hn, C = params.hidden, params.channels
    W1, b1, W2, b2 = params.unpack()
    z, dz = _act(params, u @ W1.T + b1)
    out = z @ W2.T + b2
    e = (y - out).ravel()

    # d(out[m, c]) / d(a[m, j]) = W2[c, j] * dz[m, j]
    back = W2[None, :, :] * dz[:, None, :]  # (M, C, Hn)
    dW1 = back[..., None] * u[:, None, None, :]  # (M, C, Hn, D)
    dW2 = np.zeros((M, C, C, Hn))
    dW2[:, np.arange(C), np.arange(C), :] = z[:, None, :]
    db2 = np.broadcast_to(np.eye(C), (M, C, C))
    J = -np.concatenate(
        [dW1.reshape(M * C, Hn * D), back.reshape(M * C, Hn), dW2.reshape(M * C, C * Hn), db2.reshape(M * C, C)],
        axis=1,
    )
    return e, J


def lm_step(params, e, J, mu: float):
    """Damped Gauss-Newton step ``theta - (J^T J + mu I)^-1 J^T e``.

    ``params`` may be a :class:`NarParams` or a bare parameter vector; the
    candidate has the same type.
    """
    theta = params.theta if isinstance(params, NarParams) else np.asarray(params, dtype=float)
    J = np.asarray(J, dtype=float)
    e = np.asarray(e, dtype=float)
    A = J.T @ J + mu * np.eye(J.shape[1])
    g = J.T @ e
    try:
        step = la.cho_solve(la.cho_factor(A, lower=True), g)
    except (la.LinAlgError, ValueError) as exc:
        raise IllConditioned(f"J^T J + mu I not positive definite at mu={mu:g}") from exc
    if not np.all(np.isfinite(step)):
        raise IllConditioned(f"non-finite step at mu={mu:g}")
    new = theta - step
    return params.with_theta(new) if isinstance(params, NarParams) else new


def sse(params: NarParams, windows: SupervisedWindows) -> float:
    out = nar_forward(params, windows.inputs)
    return float(np.sum((np.asarray(windows.targets) - out) ** 2))


def train_lm(windows, cfg: NarConfig, init: NarParams | None = None):
    """Levenberg-Marquardt training.

    ``windows`` is a lagged :class:`SupervisedWindows` (see
    :func:`lagged_windows`) or a list of them. Returns the parameters and the
    SSE curve: the initial SSE followed by the SSE after every accepted step.
    """
    segs = [windows] if isinstance(windows, SupervisedWindows) else list(windows)
    data = SupervisedWindows(np.vstack([s.inputs for s in segs]), np.vstack([s.targets for s in segs]))
    if len(data) < 1:
        raise TooShort("no windows to train on")
    C = data.targets.shape[1]
    params = init if init is not None else init_params(cfg.delays, cfg.hidden_neurons, C, cfg.seed)
    if params.n_inputs != data.inputs.shape[1]:
        raise ShapeMismatch("window width does not match the configured delays")
    mu = cfg.mu_init
    e, J = residuals_and_jacobian(params, data)
    current = float(e @ e)
    if not np.isfinite(current):
        raise Divergence("initial SSE is not finite")
    curve = [current]
    for _ in range(cfg.max_iterations):
        try:
            cand = lm_step(params, e, J, mu)
            cand_sse = sse(cand, data)
        except IllConditioned:
            cand_sse = np.inf
        if np.isfinite(cand_sse) and cand_sse < current:
            rel = (current - cand_sse) / max(current, np.finfo(float).tiny)
            params, current = cand, cand_sse
            curve.append(current)
            mu = max(mu * cfg.mu_decrease, MU_MIN)
            if rel < 1e-12 or current == 0.0:
                break
            e, J = residuals_and_jacobian(params, data)
        else:
            if np.isnan(cand_sse):
                raise Divergence(f"candidate SSE is NaN at mu={mu:g}")
            mu *= cfg.mu_increase
            if mu > MU_MAX:
                break
    return params, np.array(curve)


def nar_predict_updating(params: NarParams, observed, delays: int | None = None) -> np.ndarray:
    """One-step forecasts from observed lags; ``out[i]`` forecasts ``observed[p + i]``."""
    p = params.delays if delays is None else delays
    if p != params.delays:
        raise WrongLagCount(f"params use {params.delays} delays, got {p}")
    y = np.asarray(observed, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[0] <= p:
        raise TooShort(f"need more than {p} observations")
    return nar_forward(params, lagged_windows(y, p).inputs)


def nar_predict_free_running(params: NarParams, primer, steps: int) -> np.ndarray:
    """Closed-loop rollout seeded with the last ``p`` primer values."""
    y = np.asarray(primer, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    p = params.delays
    if y.shape[0] < p:
        raise TooShort(f"need at least {p} primer values")
    hist = list(y[-p:])
    out = np.empty((steps, params.channels))
    for t in range(steps):
        lags = np.array(hist[-p:][::-1]).ravel()
        out[t] = nar_forward(params, lags)
        hist.append(out[t])
    return out
