"""
Forecasting the beamformed signal with an LSTM and a NAR network
================================================================

The complex beamformed output is split into real and imaginary channels,
standardized with training statistics, and forecast one step ahead. The
first 288 of 361 samples train; the last 73 test.
"""

# %%
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from beamcast import ScenarioConfig, generate_dataset, lstm, nar
from beamcast.harness import _standardized_values
from beamcast.timeseries import from_array, make_supervised, rmse

cfg = ScenarioConfig(snr_db=20.0)
series = generate_dataset(cfg).series
T = len(series)
cut = math.floor(cfg.train_fraction * T)
z = _standardized_values(series, np.arange(cut))  # (T, 2), train statistics
print("train/test:", cut, T - cut)

# %%
# LSTM trained with backpropagation through time and Adam
lstm_params, lstm_curve = lstm.train(make_supervised(from_array(z[:cut].T)), lstm.TrainConfig(hidden_size=16, epochs=100))
lstm_pred = lstm.predict_updating(lstm_params, z[:-1])  # lstm_pred[t-1] forecasts z[t]
lstm_free = lstm.predict_free_running(lstm_params, z[:cut], T - cut)

# %%
# NAR network with 8 delays trained by Levenberg-Marquardt
ncfg = nar.NarConfig()
nar_params, nar_curve = nar.train_lm(nar.lagged_windows(z[:cut], ncfg.delays), ncfg)
nar_pred = nar.nar_predict_updating(nar_params, z)  # nar_pred[t-p] forecasts z[t]
nar_free = nar.nar_predict_free_running(nar_params, z[:cut], T - cut)

p = ncfg.delays
print(f"LSTM test RMSE: updating {rmse(lstm_pred[cut - 1:], z[cut:]):.3f}, free-running {rmse(lstm_free, z[cut:]):.3f}")
print(f"NAR  test RMSE: updating {rmse(nar_pred[cut - p:], z[cut:]):.3f}, free-running {rmse(nar_free, z[cut:]):.3f}")

# %%
# Updating the state with every observed sample keeps the forecast on track;
# feeding predictions back lets errors pile up.
t = np.arange(cut, T)
fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
for ax, pred, free, name in ((axes[0], lstm_pred[cut - 1:], lstm_free, "LSTM"),
                             (axes[1], nar_pred[cut - p:], nar_free, "NAR")):
    ax.plot(t, z[cut:, 0], "k", lw=1, label="observed")
    ax.plot(t, pred[:, 0], label="updating")
    ax.plot(t, free[:, 0], ls="--", label="free-running")
    ax.set_title(f"{name}, real channel")
    ax.legend(fontsize=8)
axes[1].set_xlabel("sample")
fig.tight_layout()
fig.savefig("forecasts.png", dpi=120)

# %%
fig, ax = plt.subplots(1, 2, figsize=(8, 3))
ax[0].semilogy(lstm_curve)
ax[0].set_title("LSTM training MSE")
ax[1].semilogy(nar_curve, marker=".")
ax[1].set_title("NAR accepted SSE")
fig.tight_layout()
fig.savefig("training_curves.png", dpi=120)
