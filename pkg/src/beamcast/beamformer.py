"""Covariance estimation, Bartlett/MVDR weights, beamforming and SINR."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as la

from .array_model import ArrayConfig, SnapshotMatrix, steering_vector


class EmptyInput(ValueError):
    pass


class SingularCovariance(np.linalg.LinAlgError):
    """Raised when the loaded covariance cannot be inverted."""


class ZeroSteeringVector(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class DegenerateDenominator(ZeroDivisionError):
    pass


@dataclass
class CovarianceMatrix:
    data: np.ndarray
    loading: float = 0.0

    @property
    def num_elements(self) -> int:
        return self.data.shape[0]


@dataclass
class BeamWeights:
    data: np.ndarray

    def __len__(self):
        return self.data.shape[0]


def H(A):
    """Conjugate transpose."""
    return np.conj(np.swapaxes(A, -1, -2))


def _matrix(A) -> np.ndarray:
    return A.data if isinstance(A, CovarianceMatrix) else np.asarray(A, dtype=complex)


def _vector(v) -> np.ndarray:
    return v.data if isinstance(v, BeamWeights) else np.asarray(v, dtype=complex).ravel()


def _snapshots(X) -> np.ndarray:
    return X.data if isinstance(X, SnapshotMatrix) else np.atleast_2d(np.asarray(X, dtype=complex))


def default_loading(R: np.ndarray, factor: float = 1e-6) -> float:
    """Loading level ``factor * trace(R) / N``."""
    return factor * float(np.real(np.trace(R))) / R.shape[0]


def sample_covariance(X, diagonal_loading: float | None = None) -> CovarianceMatrix:
    """Sample covariance ``(1/T) sum_t x_t x_t^H + loading * I``.

    With ``diagonal_loading=None`` the loading is ``1e-6 * trace / N`` of the
    unloaded estimate.
    """
    data = _snapshots(X)
    T, N = data.shape
    if T == 0:
        raise EmptyInput("covariance needs at least one snapshot")
    R = data.T @ data.conj() / T
    R = 0.5 * (R + H(R))
    loading = default_loading(R) if diagonal_loading is None else float(diagonal_loading)
    if loading < 0:
        raise ValueError("diagonal loading must be nonnegative")
    return CovarianceMatrix(R + loading * np.eye(N), loading)


def _solve_hermitian(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        c = la.cho_factor(A, lower=True, check_finite=True)
        x = la.cho_solve(c, b)
    except la.LinAlgError:
        try:
            with np.errstate(all="ignore"):
                x = la.solve(A, b)
        except la.LinAlgError as exc:
            raise SingularCovariance("covariance is singular; increase diagonal loading") from exc
    if not np.all(np.isfinite(x)):
        raise SingularCovariance("covariance solve produced non-finite values")
    return x


def mvdr_weights(A_in, b_s) -> BeamWeights:
    """Closed-form MVDR weights ``A^-1 b / (b^H A^-1 b)``."""
    A = _matrix(A_in)
    b = _vector(b_s)
    if A.shape != (b.size, b.size):
        raise DimensionMismatch(f"covariance {A.shape} vs steering vector length {b.size}")
    if not np.any(b):
        raise ZeroSteeringVector("steering vector is zero")
    Ainv_b = _solve_hermitian(A, b)
    denom = np.vdot(b, Ainv_b)
    if denom == 0 or not np.isfinite(denom):
        raise SingularCovariance("b^H A^-1 b is zero or non-finite")
    return BeamWeights(Ainv_b / denom)


def bartlett_weights(b_s) -> BeamWeights:
    b = _vector(b_s)
    norm2 = np.vdot(b, b).real
    if norm2 == 0:
        raise ZeroSteeringVector("steering vector is zero")
    return BeamWeights(b / norm2)


def beamform(V, X) -> np.ndarray:
    """Array output ``R[t] = V^H x_t``."""
    v = _vector(V)
    data = _snapshots(X)
    if data.shape[1] != v.size:
        raise DimensionMismatch(f"{v.size} weights for {data.shape[1]} sensors")
    return data @ v.conj()


def sinr(V, sigma_s2: float, b_s, A_in) -> float:
    """Output SINR in dB: ``sigma_s2 |V^H b|^2 / (V^H A V)``."""
    v = _vector(V)
    b = _vector(b_s)
    A = _matrix(A_in)
    denom = np.vdot(v, A @ v).real
    if not denom > 0:
        raise DegenerateDenominator("V^H A V must be positive")
    return float(10.0 * np.log10(sigma_s2 * abs(np.vdot(v, b)) ** 2 / denom))


def beampattern(V, cfg: ArrayConfig, azimuth_grid_deg: Sequence[float], elevation_deg: float = 0.0) -> np.ndarray:
    """Array gain in dB over an azimuth grid, normalized to a 0 dB peak."""
    grid = np.asarray(azimuth_grid_deg, dtype=float).ravel()
    if grid.size == 0:
        raise ValueError("azimuth grid is empty")
    v = _vector(V)
    A = np.stack([steering_vector(cfg, az, elevation_deg) for az in grid], axis=1)
    mag = np.abs(v.conj() @ A)
    gain = 20.0 * np.log10(np.maximum(mag, np.finfo(float).tiny))
    return gain - gain.max()
