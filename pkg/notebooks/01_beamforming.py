"""
MVDR beamforming of a pulse arriving at a 64-element array
==========================================================

A rectangular pulse train hits a half-wavelength uniform linear array from
45 degrees while a Gaussian interferer arrives from 15 degrees. We estimate
the covariance from the received snapshots, form MVDR weights and look at
what comes out.
"""

# %%
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from beamcast import ScenarioConfig, bartlett_weights, beampattern, generate_dataset, sinr, steering_vector

cfg = ScenarioConfig(snr_db=20.0)
ds = generate_dataset(cfg)
print("snapshots:", ds.snapshots.data.shape, " interferers at", cfg.interferers())

# %%
# Three sets of weights: plain delay-and-sum (Bartlett), MVDR from the
# sample covariance of the received snapshots (what the pipeline uses), and
# MVDR from the true interference-plus-noise covariance.
from beamcast import mvdr_weights

grid = np.linspace(-90, 90, 721)
b = steering_vector(cfg.array, cfg.desired_azimuth_deg)
noise_var = np.mean(np.abs(ds.pulse) ** 2) / 10 ** (cfg.snr_db / 10)
a_int = steering_vector(cfg.array, cfg.interferers()[0])
A = noise_var * (np.eye(64) + 10 ** (cfg.inr_db / 10) * np.outer(a_int, a_int.conj()))
weights = {"Bartlett": bartlett_weights(b), "MVDR, sample covariance": ds.weights, "MVDR, true covariance": mvdr_weights(A, b)}

fig, ax = plt.subplots(figsize=(7, 3.5))
power = np.mean(np.abs(ds.pulse) ** 2)
for name, V in weights.items():
    gain = beampattern(V, cfg.array, grid)
    ax.plot(grid, np.maximum(gain, -80), label=name, alpha=0.8)
    g_look, g_int = beampattern(V, cfg.array, [cfg.desired_azimuth_deg, cfg.interferers()[0]])
    print(f"{name:<24} interferer vs look {g_int - g_look:7.1f} dB   SINR {sinr(V, power, b, A):5.1f} dB")
ax.axvline(cfg.interferers()[0], color="r", ls=":")
ax.set_xlabel("azimuth (deg)")
ax.set_ylabel("gain (dB)")
ax.legend(fontsize=8)
fig.savefig("beampattern.png", dpi=120)

# %%
# The sample-covariance weights null the interferer far less deeply than the
# ideal ones. The strong desired pulse is itself inside the estimated
# covariance, and 361 snapshots for 64 sensors leave enough estimation error
# for MVDR to start cancelling the pulse. Diagonal loading trades null depth
# for a faithful pulse; the pipeline loads by the mean sensor power.
from dataclasses import replace

for factor in (1e-6, 1e-2, 1.0):
    d = generate_dataset(replace(cfg, diagonal_loading_factor=factor))
    res = np.sqrt(np.mean(np.abs(d.beamformed - d.pulse) ** 2))
    print(f"loading factor {factor:g}: residual RMS against the pulse {res:.3f}")

# %%
# The beamformed output tracks the transmitted pulse train.
fig, ax = plt.subplots(figsize=(7, 3))
ax.plot(ds.beamformed.real, label="beamformed (real)")
ax.plot(ds.pulse.real, "k--", lw=1, label="pulse (real)")
ax.set_xlabel("sample")
ax.legend()
fig.savefig("beamformed.png", dpi=120)
print("residual RMS:", np.sqrt(np.mean(np.abs(ds.beamformed - ds.pulse) ** 2)))
