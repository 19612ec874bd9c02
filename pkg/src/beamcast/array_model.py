"""Uniform linear array geometry and received-signal synthesis.

Snapshots are stored time-major: ``data[t, n]`` is the sample of sensor ``n``
at time step ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np


class MismatchedLength(ValueError):
    """A source waveform does not have the scenario's snapshot count."""


@dataclass(frozen=True)
class ArrayConfig:
    num_elements: int = 64
    spacing_wavelengths: float = 0.5
    carrier_freq_hz: float = 700e6

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 1:
            raise ValueError(f"num_elements must be a positive integer, got {self.num_elements}")
        if not self.spacing_wavelengths > 0:
            raise ValueError("spacing_wavelengths must be positive")
        if not self.carrier_freq_hz > 0:
            raise ValueError("carrier_freq_hz must be positive")

    @property
    def wavelength_m(self) -> float:
        return 299_792_458.0 / self.carrier_freq_hz


class SourceKind(str, Enum):
    DESIRED = "desired"
    INTERFERENCE = "interference"


@dataclass
class PlaneWaveSource:
    azimuth_deg: float
    elevation_deg: float
    waveform: np.ndarray
    kind: SourceKind = SourceKind.DESIRED

    def __post_init__(self):
        if not -180.0 <= self.azimuth_deg <= 180.0:
            raise ValueError(f"azimuth {self.azimuth_deg} outside [-180, 180]")
        if not -90.0 <= self.elevation_deg <= 90.0:
            raise ValueError(f"elevation {self.elevation_deg} outside [-90, 90]")
        self.waveform = np.asarray(self.waveform, dtype=complex).ravel()
        self.kind = SourceKind(self.kind)


@dataclass
class SnapshotMatrix:
    data: np.ndarray
    sample_rate_hz: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=complex))
        if self.data.ndim != 2:
            raise ValueError("snapshot data must be a T x N matrix")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")

    @property
    def num_samples(self) -> int:
        return self.data.shape[0]

    @property
    def num_elements(self) -> int:
        return self.data.shape[1]


def steering_vector(cfg: ArrayConfig, azimuth_deg: float, elevation_deg: float = 0.0) -> np.ndarray:
    """Narrowband ULA response, referenced to element 0.

    Element ``n`` carries phase ``-2*pi*d*n*sin(az)*cos(el)`` with ``d`` the
    element pitch in wavelengths, so ``a[0] == 1`` and ``|a[n]| == 1``.
    """
    az = math.radians(azimuth_deg)
    el = math.radians(elevation_deg)
    n = np.arange(cfg.num_elements)
    return np.exp(-2j * np.pi * cfg.spacing_wavelengths * n * math.sin(az) * math.cos(el))


def rectangular_pulse(num_samples: int, on_fraction: float = 1.0, amplitude: complex = 1.0) -> np.ndarray:
    """Pulse whose first ``ceil(on_fraction * num_samples)`` samples equal ``amplitude``."""
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    if not 0.0 < on_fraction <= 1.0:
        raise ValueError("on_fraction must lie in (0, 1]")
    pulse = np.zeros(num_samples, dtype=complex)
    pulse[: math.ceil(on_fraction * num_samples)] = amplitude
    return pulse


def rectangular_pulse_train(num_samples: int, period: int, on_fraction: float = 0.5, amplitude: complex = 1.0) -> np.ndarray:
    """Periodic repetition of :func:`rectangular_pulse` with ``period`` samples per cycle."""
    if period < 1:
        raise ValueError("period must be >= 1")
    one = rectangular_pulse(period, on_fraction, amplitude)
    return np.resize(one, num_samples)


def collect_plane_waves(
    cfg: ArrayConfig,
    sources: Sequence[PlaneWaveSource],
    num_samples: int,
    sample_rate_hz: float = 1.0,
) -> SnapshotMatrix:
    """Superpose plane waves on the array: ``X[t, n] = sum_s w_s[t] a_s[n]``."""
    if not any(s.kind is SourceKind.DESIRED for s in sources):
        raise ValueError("at least one desired source is required")
    data = np.zeros((num_samples, cfg.num_elements), dtype=complex)
    for s in sources:
        if s.waveform.shape[0] != num_samples:
            raise MismatchedLength(
                f"waveform of source at {s.azimuth_deg} deg has length {s.waveform.shape[0]}, expected {num_samples}"
            )
        data += np.outer(s.waveform, steering_vector(cfg, s.azimuth_deg, s.elevation_deg))
    return SnapshotMatrix(data, sample_rate_hz)


def add_noise(
    X: SnapshotMatrix,
    snr_db: float,
    seed: int,
    signal_power: float | None = None,
) -> SnapshotMatrix:
    """Add circular complex white Gaussian noise at the requested SNR.

    The noise variance per element is ``signal_power / 10**(snr_db/10)`` where
    ``signal_power`` defaults to the mean of ``|X|**2``. Draws are taken in
    (element, time, re/im) order, so a wider array reuses the narrower array's
    noise on its leading elements for the same seed.
    """
    data = X.data
    if data.size == 0:
        raise ValueError("cannot add noise to an empty snapshot matrix")
    if signal_power is None:
        signal_power = float(np.mean(np.abs(data) ** 2))
    noise_var = signal_power / 10.0 ** (snr_db / 10.0)
    rng = np.random.default_rng(seed)
    T, N = data.shape
    draws = rng.standard_normal((N, T, 2))
    noise = (draws[..., 0] + 1j * draws[..., 1]).T * math.sqrt(noise_var / 2.0)
    out = SnapshotMatrix(data + noise, X.sample_rate_hz, dict(X.meta))
    out.meta["noise_var"] = noise_var
    return out
