"""Real-valued series handling: channel split, standardization, splits, RMSE, folds."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

STD_EPS = 1e-12


class TooShort(ValueError):
    pass


class ConstantChannel(ValueError):
    pass


class DegenerateSplit(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class InvalidK(ValueError):
    pass


@dataclass
class Series:
    """``channels`` is C x T. ``mean``/``std`` map standardized values back to raw ones."""

    channels: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    standardized: bool = False

    @property
    def num_channels(self) -> int:
        return self.channels.shape[0]

    def __len__(self) -> int:
        return self.channels.shape[1]

    def values(self) -> np.ndarray:
        """Time-major view, shape (T, C)."""
        return self.channels.T

    def raw(self) -> np.ndarray:
        """Channels in original units (C x T)."""
        if not self.standardized:
            return self.channels.copy()
        return self.channels * self.std[:, None] + self.mean[:, None]


@dataclass
class SupervisedWindows:
    """One-step-ahead pairs: ``targets[t]`` is the value following ``inputs[t]``."""

    inputs: np.ndarray  # (T-1, C)
    targets: np.ndarray  # (T-1, C)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def num_channels(self) -> int:
        return self.inputs.shape[1]


def from_array(values) -> Series:
    """Wrap a (C, T) or (T,) real array as an unstandardized series."""
    ch = np.atleast_2d(np.asarray(values, dtype=float))
    C = ch.shape[0]
    return Series(ch.copy(), np.zeros(C), np.ones(C), False)


def channelize(signal) -> Series:
    """Split a complex sequence into real and imaginary channels."""
    z = np.asarray(signal, dtype=complex).ravel()
    if z.size < 2:
        raise TooShort("need at least 2 samples")
    return from_array(np.vstack([z.real, z.imag]))


def recombine(s: Series) -> np.ndarray:
    raw = s.raw()
    return raw[0] + 1j * raw[1]


def standardize(s: Series, reference: Series | None = None, allow_constant: bool = False) -> Series:
    """Zero-mean, unit-variance per channel (population std).

    With ``reference`` the statistics of that (raw) series are applied instead,
    which is how held-out data must be transformed. ``allow_constant`` keeps a
    constant channel by forcing its std to 1 rather than raising.
    """
    raw = s.raw()
    basis = raw if reference is None else reference.raw()
    mean = basis.mean(axis=1)
    std = basis.std(axis=1)
    bad = std <= STD_EPS
    if np.any(bad):
        if not allow_constant:
            raise ConstantChannel(f"channels {np.flatnonzero(bad).tolist()} are constant")
        std = np.where(bad, 1.0, std)
    return Series((raw - mean[:, None]) / std[:, None], mean, std, True)


def destandardize(s: Series) -> Series:
    return from_array(s.raw())


def split_train_test(s: Series, train_fraction: float = 0.8) -> tuple[Series, Series]:
    """Chronological split: the first ``floor(fraction * T)`` steps train."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    T = len(s)
    cut = math.floor(train_fraction * T)
    if cut < 2 or T - cut < 2:
        raise DegenerateSplit(f"split of {T} steps at {cut} leaves a side with < 2 steps")
    return replace(s, channels=s.channels[:, :cut].copy()), replace(s, channels=s.channels[:, cut:].copy())


def make_supervised(s: Series) -> SupervisedWindows:
    if len(s) < 2:
        raise TooShort("need at least 2 steps")
    v = s.values()
    return SupervisedWindows(v[:-1].copy(), v[1:].copy())


def rmse(predicted, actual, normalized: bool = False) -> float:
    """Root mean squared error over all cells.

    ``normalized`` divides by the population std of ``actual`` (all cells).
    """
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape:
        raise LengthMismatch(f"shapes {p.shape} and {a.shape} differ")
    if p.size == 0:
        raise ValueError("empty input")
    err = float(np.sqrt(np.mean((p - a) ** 2)))
    if normalized:
        scale = float(a.std())
        if scale <= STD_EPS:
            raise ConstantChannel("cannot normalize by a constant target")
        err /= scale
    return err


def kfold_partitions(T: int, k: int = 10, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Contiguous validation blocks of near-equal size; train is the complement.

    The seed only permutes the order in which folds are returned.
    """
    if k < 2 or T < k:
        raise InvalidK(f"need 2 <= k <= T, got k={k}, T={T}")
    idx = np.arange(T)
    blocks = np.array_split(idx, k)
    order = np.random.default_rng(seed).permutation(k)
    folds = []
    for j in order:
        val = blocks[j]
        train = np.concatenate([b for i, b in enumerate(blocks) if i != j])
        folds.append((train, val))
    return folds


def contiguous_runs(indices) -> list[np.ndarray]:
    """Split sorted indices into runs of consecutive values."""
    idx = np.asarray(indices)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) != 1) + 1
    return np.split(idx, breaks)
