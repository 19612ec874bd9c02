"""
Cross-validated sweeps over incident angle, azimuth span and array size
=======================================================================

Each sweep rebuilds the dataset for every axis value, runs k-fold cross
validation for both forecasters and writes records, summaries and a plot.
Budgets are reduced here so the whole script finishes in a few minutes;
raise ``K`` and the training settings for a fuller run.
"""

# %%
from pathlib import Path

from beamcast import ScenarioConfig, SweepSpec, run_sweep, write_results
from beamcast.lstm import TrainConfig
from beamcast.nar import NarConfig

K = 5
OUT = Path("sweeps")
lstm_cfg = TrainConfig(hidden_size=8, epochs=40)
nar_cfg = NarConfig()

# %%
results = {}
for axis in ("incident", "span", "antennas"):
    r = run_sweep(SweepSpec(axis, k=K), ScenarioConfig(), lstm_cfg, nar_cfg)
    write_results(r, OUT / axis)
    results[axis] = r
    print(f"{axis}: {len(r.records)} records written to {OUT / axis}")

# %%
# Mean RMSE per model and the NAR/LSTM ratio
for axis, r in results.items():
    print(f"\n{axis}")
    s = r.summaries
    for value, ratio in r.mean_ratio().items():
        print(f"  {value:>4}: LSTM {s[(value, 'lstm')][1]:.3f}  NAR {s[(value, 'nar')][1]:.3f}  ratio {ratio:.2f}")
