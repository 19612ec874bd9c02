"""End-to-end experiments: dataset generation, fold evaluation and sweeps."""

from __future__ import annotations

import configparser
import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from . import lstm, nar
from .array_model import (
    ArrayConfig,
    PlaneWaveSource,
    SnapshotMatrix,
    SourceKind,
    add_noise,
    collect_plane_waves,
    rectangular_pulse,
    rectangular_pulse_train,
    steering_vector,
)
from .beamformer import BeamWeights, CovarianceMatrix, beamform, default_loading, mvdr_weights, sample_covariance
from .io import fmt
from .timeseries import (
    Series,
    channelize,
    from_array,
    contiguous_runs,
    kfold_partitions,
    make_supervised,
    rmse,
    standardize,
)

# Angle spans by code; codes 3 and 4 share a span in the source table.
SPAN_TABLE = {
    1: (-30.0, 30.0),
    2: (-45.0, 45.0),
    3: (-60.0, 60.0),
    4: (-60.0, 60.0),
    5: (-70.0, 70.0),
    6: (-80.0, 80.0),
    7: (-90.0, 90.0),
    8: (-100.0, 100.0),
    9: (-110.0, 110.0),
    10: (-120.0, 120.0),
}

MIN_SOURCE_SEPARATION_DEG = 5.0


class UnknownCode(KeyError):
    pass


class SweepError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    array: ArrayConfig = field(default_factory=ArrayConfig)
    desired_azimuth_deg: float = 45.0
    elevation_deg: float = 0.0
    num_samples: int = 361
    snr_db: float = 5.0
    # None places one interferer 30 degrees below the desired azimuth
    interferer_azimuths_deg: tuple[float, ...] | None = None
    inr_db: float = 10.0
    seed: int = 0
    pulse_on_fraction: float = 0.5
    # None sends a single pulse spanning the whole record
    pulse_period_samples: int | None = 150
    pulse_amplitude: complex = complex(math.cos(math.pi / 4), math.sin(math.pi / 4))
    diagonal_loading_factor: float = 1.0
    train_fraction: float = 0.8
    # radio-planning figures kept for the record; no computation uses them
    rsu_height_m: float = 25.0
    inter_site_distance_m: float = 200.0
    ue_tx_power_dbm: float = 23.0
    rsu_noise_figure_db: float = 5.0
    ue_noise_figure_db: float = 7.0

    def __post_init__(self):
        if self.num_samples < 4:
            raise ValueError("num_samples must be >= 4")
        for az in self.interferers():
            if abs(az - self.desired_azimuth_deg) < MIN_SOURCE_SEPARATION_DEG:
                raise ValueError(
                    f"interferer at {az} deg is within {MIN_SOURCE_SEPARATION_DEG} deg of the desired source"
                )

    def interferers(self) -> tuple[float, ...]:
        if self.interferer_azimuths_deg is None:
            az = self.desired_azimuth_deg - 30.0
            return ((az + 180.0) % 360.0 - 180.0,)
        return tuple(self.interferer_azimuths_deg)


class Axis(str, Enum):
    INCIDENT_ANGLE = "incident"
    AZIMUTH_SPAN = "span"
    ANTENNA_COUNT = "antennas"


class Model(str, Enum):
    LSTM = "lstm"
    NAR = "nar"
    BOTH = "both"

    def expand(self) -> list["Model"]:
        return [Model.LSTM, Model.NAR] if self is Model.BOTH else [self]


DEFAULT_VALUES = {
    Axis.INCIDENT_ANGLE: tuple(range(40, 101, 10)),
    Axis.AZIMUTH_SPAN: tuple(range(1, 11)),
    Axis.ANTENNA_COUNT: (4, 8, 16, 32, 64),
}


@dataclass(frozen=True)
class SweepSpec:
    axis: Axis
    values: tuple = ()
    model: Model = Model.BOTH
    k: int = 10

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis(self.axis))
        object.__setattr__(self, "model", Model(self.model))
        if not self.values:
            object.__setattr__(self, "values", DEFAULT_VALUES[self.axis])
        object.__setattr__(self, "values", tuple(self.values))
        if self.k < 2:
            raise ValueError("k must be >= 2")


@dataclass(frozen=True)
class Record:
    axis: str
    value: float
    model: str
    fold: int
    rmse: float


@dataclass
class SweepResult:
    axis: Axis
    records: list[Record] = field(default_factory=list)

    @property
    def summaries(self) -> dict[tuple, tuple[float, float, float]]:
        """``(value, model) -> (min, mean, max)`` over folds, in record order."""
        groups: dict[tuple, list[float]] = {}
        for r in self.records:
            groups.setdefault((r.value, r.model), []).append(r.rmse)
        return {key: (min(v), float(np.mean(v)), max(v)) for key, v in groups.items()}

    def mean_ratio(self, numerator: str = "nar", denominator: str = "lstm") -> dict:
        """Per axis value, ratio of the two models' mean RMSEs."""
        s = self.summaries
        out = {}
        for (value, model), stats in s.items():
            if model == numerator and (value, denominator) in s:
                out[value] = stats[1] / s[(value, denominator)][1]
        return out


@dataclass
class Dataset:
    clean: SnapshotMatrix
    snapshots: SnapshotMatrix
    covariance: CovarianceMatrix
    weights: BeamWeights
    beamformed: np.ndarray
    series: Series
    pulse: np.ndarray


def _sub_seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def generate_dataset(cfg: ScenarioConfig) -> Dataset:
    """Pulse -> plane waves -> noise -> sample covariance -> MVDR -> beamformed series."""
    T = cfg.num_samples
    noise_seed, interf_seed = _sub_seeds(cfg.seed, 2)
    if cfg.pulse_period_samples is None:
        pulse = rectangular_pulse(T, cfg.pulse_on_fraction, cfg.pulse_amplitude)
    else:
        pulse = rectangular_pulse_train(T, cfg.pulse_period_samples, cfg.pulse_on_fraction, cfg.pulse_amplitude)
    desired_power = float(np.mean(np.abs(pulse) ** 2))
    noise_var = desired_power / 10.0 ** (cfg.snr_db / 10.0)
    interf_var = noise_var * 10.0 ** (cfg.inr_db / 10.0)

    sources = [PlaneWaveSource(cfg.desired_azimuth_deg, cfg.elevation_deg, pulse, SourceKind.DESIRED)]
    rng = np.random.default_rng(interf_seed)
    for az in cfg.interferers():
        draws = rng.standard_normal((T, 2))
        w = (draws[:, 0] + 1j * draws[:, 1]) * math.sqrt(interf_var / 2.0)
        sources.append(PlaneWaveSource(az, cfg.elevation_deg, w, SourceKind.INTERFERENCE))

    clean = collect_plane_waves(cfg.array, sources, T)
    X = add_noise(clean, cfg.snr_db, noise_seed, signal_power=desired_power)
    R0 = sample_covariance(X, 0.0)
    A = sample_covariance(X, default_loading(R0.data, cfg.diagonal_loading_factor))
    b = steering_vector(cfg.array, cfg.desired_azimuth_deg, cfg.elevation_deg)
    V = mvdr_weights(A, b)
    y = beamform(V, X)
    return Dataset(clean, X, A, V, y, channelize(y), pulse)


def span_code_to_range(code: int) -> tuple[float, float]:
    try:
        return SPAN_TABLE[int(code)]
    except (KeyError, ValueError, TypeError):
        raise UnknownCode(f"unknown azimuth span code {code!r}; expected 1..10") from None


# --- fold evaluation -------------------------------------------------------


@dataclass
class FoldScore:
    model: str
    rmse: float
    rmse_free_running: float | None = None


def _standardized_values(series: Series, train_idx) -> np.ndarray:
    train = Series(series.raw()[:, train_idx], series.mean, series.std, False)
    return standardize(series, reference=train, allow_constant=True).values()


def fit_lstm(values: np.ndarray, train_idx, cfg: lstm.TrainConfig) -> lstm.LstmParams:
    segs = [make_supervised(from_array(values[run].T)) for run in contiguous_runs(train_idx) if run.size >= 2]
    params, _ = lstm.train(segs, cfg)
    return params


def fit_nar(values: np.ndarray, train_idx, cfg: nar.NarConfig) -> nar.NarParams:
    segs = [nar.lagged_windows(values[run], cfg.delays) for run in contiguous_runs(train_idx) if run.size > cfg.delays]
    if not segs:
        raise SweepError("no training run is longer than the NAR delay line")
    params, _ = nar.train_lm(segs, cfg)
    return params


def evaluate_fold(series: Series, train_idx, val_idx, model: Model | str,
                  lstm_cfg: lstm.TrainConfig, nar_cfg: nar.NarConfig,
                  free_running: bool = False) -> FoldScore:
    """Train on ``train_idx`` and score one-step forecasts of ``val_idx``.

    Values are standardized with training statistics. Forecasts use observed
    history only; targets earlier than the NAR delay line are skipped for both
    models so their scores cover the same cells. With ``free_running`` the
    validation block must be a suffix of the series and the closed-loop
    variant is scored as well.
    """
    model = Model(model)
    train_idx = np.sort(np.asarray(train_idx))
    val_idx = np.sort(np.asarray(val_idx))
    if np.intersect1d(train_idx, val_idx).size:
        raise SweepError("training and validation indices overlap")
    values = _standardized_values(series, train_idx)
    T = values.shape[0]
    p = nar_cfg.delays
    targets = val_idx[val_idx >= max(p, 1)]
    if targets.size == 0:
        raise SweepError("validation block has no scorable targets")

    if model is Model.LSTM:
        params = fit_lstm(values, train_idx, lstm_cfg)
        preds = lstm.predict_updating(params, values[:-1])  # preds[t - 1] forecasts values[t]
        score = FoldScore("lstm", rmse(preds[targets - 1], values[targets]))
        if free_running:
            start = _suffix_start(val_idx, T)
            fr = lstm.predict_free_running(params, values[:start], T - start)
            keep = np.arange(start, T) >= max(p, 1)
            score.rmse_free_running = rmse(fr[keep], values[start:][keep])
        return score
    if model is Model.NAR:
        params = fit_nar(values, train_idx, nar_cfg)
        preds = nar.nar_predict_updating(params, values)  # preds[t - p] forecasts values[t]
        score = FoldScore("nar", rmse(preds[targets - p], values[targets]))
        if free_running:
            start = _suffix_start(val_idx, T)
            fr = nar.nar_predict_free_running(params, values[:start], T - start)
            keep = np.arange(start, T) >= max(p, 1)
            score.rmse_free_running = rmse(fr[keep], values[start:][keep])
        return score
    raise ValueError("evaluate_fold needs a single model")


def _suffix_start(val_idx: np.ndarray, T: int) -> int:
    start = int(val_idx[0])
    if not np.array_equal(val_idx, np.arange(start, T)):
        raise SweepError("free-running evaluation needs the validation block to end the series")
    return start


def train_test_scores(cfg: ScenarioConfig, lstm_cfg: lstm.TrainConfig, nar_cfg: nar.NarConfig,
                      models: Sequence[str] = ("lstm", "nar")) -> dict[str, FoldScore]:
    """Chronological train/test evaluation of the default pipeline."""
    ds = generate_dataset(cfg)
    T = len(ds.series)
    cut = math.floor(cfg.train_fraction * T)
    train_idx, test_idx = np.arange(cut), np.arange(cut, T)
    return {m: evaluate_fold(ds.series, train_idx, test_idx, m, lstm_cfg, nar_cfg, free_running=True) for m in models}


# --- sweeps ----------------------------------------------------------------


def scenario_for(axis: Axis, value, base: ScenarioConfig, fold: int) -> ScenarioConfig:
    if axis is Axis.INCIDENT_ANGLE:
        return replace(base, desired_azimuth_deg=float(value))
    if axis is Axis.ANTENNA_COUNT:
        return replace(base, array=replace(base.array, num_elements=int(value)))
    lo, hi = span_code_to_range(value)
    rng = np.random.default_rng([base.seed, int(value), fold])
    return replace(base, desired_azimuth_deg=float(rng.uniform(lo, hi)))


def _run_cell(args) -> list[Record]:
    axis, value, fold, train_idx, val_idx, models, base, lstm_cfg, nar_cfg = args
    cfg = scenario_for(axis, value, base, fold)
    series = generate_dataset(cfg).series
    out = []
    for m in models:
        try:
            s = evaluate_fold(
                series, train_idx, val_idx, m,
                replace(lstm_cfg, seed=lstm_cfg.seed + fold),
                replace(nar_cfg, seed=nar_cfg.seed + fold),
            )
        except Exception as exc:
            raise SweepError(f"{axis.value}={value} fold={fold} model={m.value}: {exc}") from exc
        out.append(Record(axis.value, value, m.value, fold, s.rmse))
    return out


def run_sweep(spec: SweepSpec, base: ScenarioConfig | None = None,
              lstm_cfg: lstm.TrainConfig | None = None, nar_cfg: nar.NarConfig | None = None,
              jobs: int = 1) -> SweepResult:
    """k-fold evaluation of each requested model at every axis value.

    Cells run in parallel when ``jobs > 1``; records are merged in
    (value, fold, model) order either way, so results do not depend on ``jobs``.
    """
    base = base or ScenarioConfig()
    lstm_cfg = lstm_cfg or lstm.TrainConfig()
    nar_cfg = nar_cfg or nar.NarConfig()
    folds = kfold_partitions(base.num_samples, spec.k, base.seed)
    models = spec.model.expand()
    tasks = [
        (spec.axis, value, f, tr, va, models, base, lstm_cfg, nar_cfg)
        for value in spec.values
        for f, (tr, va) in enumerate(folds)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_cell, tasks))
    else:
        chunks = [_run_cell(t) for t in tasks]
    return SweepResult(spec.axis, [r for chunk in chunks for r in chunk])


# --- output ----------------------------------------------------------------


def write_results(r: SweepResult, out_dir) -> list[Path]:
    """Write ``records.csv``, ``summary.csv`` and an SVG plot; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rec_path = out / "records.csv"
    with open(rec_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["axis", "value", "model", "fold", "rmse"])
        for rec in r.records:
            w.writerow([rec.axis, _fmt_value(rec.value), rec.model, rec.fold, fmt(rec.rmse)])
    sum_path = out / "summary.csv"
    with open(sum_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["axis", "value", "model", "min", "mean", "max"])
        for (value, model), (lo, mean, hi) in r.summaries.items():
            w.writerow([r.axis.value, _fmt_value(value), model, fmt(lo), fmt(mean), fmt(hi)])
    plot_path = out / f"sweep_{r.axis.value}.svg"
    plot_sweep(r, plot_path)
    return [rec_path, sum_path, plot_path]


def _fmt_value(v) -> str:
    return str(int(v)) if float(v).is_integer() else fmt(v)


def read_summary(path) -> dict[tuple, tuple[float, float, float]]:
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            value = float(row["value"])
            value = int(value) if value.is_integer() else value
            out[(value, row["model"])] = (float(row["min"]), float(row["mean"]), float(row["max"]))
    return out


AXIS_LABELS = {
    Axis.INCIDENT_ANGLE: "incident angle (deg)",
    Axis.AZIMUTH_SPAN: "azimuth span code",
    Axis.ANTENNA_COUNT: "number of antenna elements",
}


def plot_sweep(r: SweepResult, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    s = r.summaries
    with matplotlib.rc_context({"svg.hashsalt": "beamcast", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for model in sorted({m for _, m in s}):
            xs = [v for v, m in s if m == model]
            lo = [s[(v, model)][0] for v in xs]
            mean = [s[(v, model)][1] for v in xs]
            hi = [s[(v, model)][2] for v in xs]
            ax.plot(xs, mean, marker="o", label=f"{model.upper()} mean")
            ax.fill_between(xs, lo, hi, alpha=0.2, label=f"{model.upper()} min/max")
        ax.set_xlabel(AXIS_LABELS[r.axis])
        ax.set_ylabel("RMSE (standardized)")
        ax.set_yscale("log")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return Path(path)


# --- config files ----------------------------------------------------------


def _coerce(kind, text: str):
    text = text.strip()
    if kind is bool:
        return text.lower() in ("1", "true", "yes", "on")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if kind is complex:
        return complex(text.replace(" ", ""))
    return text


_SCENARIO_TYPES = {
    "desired_azimuth_deg": float, "elevation_deg": float, "num_samples": int, "snr_db": float,
    "inr_db": float, "seed": int, "pulse_on_fraction": float, "pulse_amplitude": complex,
    "diagonal_loading_factor": float, "train_fraction": float, "rsu_height_m": float,
    "inter_site_distance_m": float, "ue_tx_power_dbm": float, "rsu_noise_figure_db": float,
    "ue_noise_figure_db": float,
}
_ARRAY_TYPES = {"num_elements": int, "spacing_wavelengths": float, "carrier_freq_hz": float}
_LSTM_TYPES = {f.name: f.type for f in fields(lstm.TrainConfig)}
_NAR_TYPES = {f.name: f.type for f in fields(nar.NarConfig)}


@dataclass
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    lstm: lstm.TrainConfig = field(default_factory=lstm.TrainConfig)
    nar: nar.NarConfig = field(default_factory=nar.NarConfig)
    sweep: dict = field(default_factory=dict)


def _type_of(annotation) -> type:
    name = annotation if isinstance(annotation, str) else getattr(annotation, "__name__", "str")
    return {"int": int, "float": float, "bool": bool}.get(name, str)


def parse_config(sections: dict[str, dict[str, str]]) -> ExperimentConfig:
    """Build configs from ``{section: {key: text}}``; unknown keys raise ``KeyError``."""
    scen: dict = {}
    arr: dict = {}
    lcfg: dict = {}
    ncfg: dict = {}
    sweep: dict = {}
    for section, items in sections.items():
        for key, text in items.items():
            if section == "scenario":
                if key in _ARRAY_TYPES:
                    arr[key] = _coerce(_ARRAY_TYPES[key], text)
                elif key == "pulse_period_samples":
                    t = text.strip().lower()
                    scen[key] = None if t in ("", "none") else int(t)
                elif key == "interferer_azimuths_deg":
                    t = text.strip().lower()
                    scen[key] = None if t in ("", "default", "none") else tuple(float(x) for x in text.split(","))
                elif key in _SCENARIO_TYPES:
                    scen[key] = _coerce(_SCENARIO_TYPES[key], text)
                else:
                    raise KeyError(f"unknown scenario key {key!r}")
            elif section == "lstm":
                if key not in _LSTM_TYPES:
                    raise KeyError(f"unknown lstm key {key!r}")
                lcfg[key] = _coerce(_type_of(_LSTM_TYPES[key]), text)
            elif section == "nar":
                if key not in _NAR_TYPES:
                    raise KeyError(f"unknown nar key {key!r}")
                ncfg[key] = _coerce(_type_of(_NAR_TYPES[key]), text)
            elif section == "sweep":
                if key not in ("axis", "values", "model", "k", "jobs"):
                    raise KeyError(f"unknown sweep key {key!r}")
                sweep[key] = text.strip()
            else:
                raise KeyError(f"unknown config section {section!r}")
    scenario = ScenarioConfig(array=ArrayConfig(**arr), **scen)
    return ExperimentConfig(scenario, lstm.TrainConfig(**lcfg), nar.NarConfig(**ncfg), sweep)


def read_config_file(path) -> dict[str, dict[str, str]]:
    """Read an INI-style config into plain ``{section: {key: text}}``."""
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read(path)
    return {s: dict(cp.items(s)) for s in cp.sections()}


def load_config(path=None, overrides: Sequence[str] = ()) -> ExperimentConfig:
    """Defaults, then the config file, then ``section.key=value`` overrides."""
    sections = read_config_file(path) if path else {}
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ValueError(f"override {item!r} is not of the form section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.split(".", 1)
        sections.setdefault(section.strip(), {})[key.strip()] = value
    return parse_config(sections)
