"""Command-line front end: ``beamcast {generate,train,forecast,sweep,beampattern}``.

Settings are layered. Built-in defaults are overridden by the ``--config``
file, which is overridden by ``--set section.key=value`` items, which are
overridden by dedicated flags such as ``--seed`` or ``--axis``.

Exit codes: 0 on success, 1 on a usage error (nothing is written), 2 when a
command fails at run time.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness, io, lstm, nar
from .beamformer import beampattern
from .timeseries import Series, from_array, make_supervised, rmse, standardize

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

PRECEDENCE = (
    "precedence: dedicated flags (--seed, --axis, ...) > --set section.key=value "
    "> --config file > built-in defaults"
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI config with [scenario], [lstm], [nar] and [sweep] sections")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value; repeatable")
    common.add_argument("--out", default=".", help="output directory (default: current directory)")
    common.add_argument("--seed", type=int, help="seed for every stochastic stage")

    parser = _Parser(prog="beamcast", description=__doc__.split("\n\n")[0], epilog=PRECEDENCE)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("generate", parents=[common], epilog=PRECEDENCE,
                   help="write snapshots.csv, series.csv and weights.csv for the scenario")

    p = sub.add_parser("train", parents=[common], epilog=PRECEDENCE,
                       help="fit one forecaster on the training split; writes the model and loss curve")
    p.add_argument("--model", choices=["lstm", "nar"], required=True)
    p.add_argument("--series", help="series CSV to train on (default: generate from the scenario)")

    p = sub.add_parser("forecast", parents=[common], epilog=PRECEDENCE,
                       help="one-step forecasts of a series with a trained model; prints test RMSE")
    p.add_argument("--params", required=True, help="model file written by 'train'")
    p.add_argument("--series", help="series CSV (default: generate from the scenario)")
    p.add_argument("--free-running", action="store_true", help="feed predictions back over the test split")
    p.add_argument("--normalized", action="store_true", help="divide the RMSE by the std of the test targets")

    p = sub.add_parser("sweep", parents=[common], epilog=PRECEDENCE,
                       help="k-fold sweep along one axis; writes records.csv, summary.csv and a plot")
    p.add_argument("--axis", choices=[a.value for a in harness.Axis])
    p.add_argument("--values", help="comma-separated axis values (default: the standard grid)")
    p.add_argument("--model", choices=[m.value for m in harness.Model])
    p.add_argument("--k", type=int)
    p.add_argument("--jobs", type=int, help="parallel workers (default: number of processors)")

    p = sub.add_parser("beampattern", parents=[common], epilog=PRECEDENCE,
                       help="MVDR beampattern of the scenario; writes beampattern.csv and .svg")
    p.add_argument("--step", type=float, default=0.25, help="azimuth grid step in degrees")
    return parser


def _config(args) -> harness.ExperimentConfig:
    if args.config and not os.path.isfile(args.config):
        raise UsageError(f"config file not found: {args.config}")
    try:
        cfg = harness.load_config(args.config, args.overrides)
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"bad configuration: {exc}") from None
    if args.seed is not None:
        cfg.scenario = replace(cfg.scenario, seed=args.seed)
        cfg.lstm = replace(cfg.lstm, seed=args.seed)
        cfg.nar = replace(cfg.nar, seed=args.seed)
    return cfg


def _series(args, cfg) -> Series:
    if args.series:
        return io.read_series_csv(args.series)
    return harness.generate_dataset(cfg.scenario).series


def _split(series: Series, fraction: float):
    """Chronological cut and the series standardized with training statistics."""
    cut = math.floor(fraction * len(series))
    train = from_array(series.raw()[:, :cut])
    return cut, standardize(series, reference=train, allow_constant=True)


def cmd_generate(args, cfg, out: Path):
    ds = harness.generate_dataset(cfg.scenario)
    io.write_snapshots_csv(out / "snapshots.csv", ds.snapshots)
    io.write_series_csv(out / "series.csv", ds.series)
    io.write_weights_csv(out / "weights.csv", ds.weights)
    print(f"wrote {len(ds.series)} samples from {cfg.scenario.array.num_elements} elements to {out}")


def cmd_train(args, cfg, out: Path):
    series = _series(args, cfg)
    cut, z = _split(series, cfg.scenario.train_fraction)
    values = z.values()[:cut]
    if args.model == "lstm":
        params, curve = lstm.train(make_supervised(from_array(values.T)), cfg.lstm)
        io.save_lstm(out / "model.lstm", params)
        io.write_matrix_csv(out / "loss_curve.csv", ["epoch", "loss"], curve)
    else:
        params, curve = nar.train_lm(nar.lagged_windows(values, cfg.nar.delays), cfg.nar)
        io.save_nar(out / "model.nar", params)
        io.write_matrix_csv(out / "loss_curve.csv", ["iteration", "sse"], curve)
    print(f"trained {args.model} on {cut} samples; final loss {curve[-1]:.6g}")


def _load_model(path):
    head = Path(path).read_bytes()[:5]
    if head == io.LSTM_MAGIC:
        return "lstm", io.load_lstm(path)
    if head == io.NAR_MAGIC:
        return "nar", io.load_nar(path)
    raise io.FormatError(f"{path}: not a beamcast model file")


def cmd_forecast(args, cfg, out: Path):
    kind, params = _load_model(args.params)
    series = _series(args, cfg)
    cut, z = _split(series, cfg.scenario.train_fraction)
    values = z.values()
    T = values.shape[0]
    # preds[t] forecasts values[t]; the first `lag` samples have no forecast
    preds = np.full_like(values, np.nan)
    if kind == "lstm":
        lag = 1
        preds[1:] = lstm.predict_updating(params, values[:-1])
        if args.free_running:
            preds[cut:] = lstm.predict_free_running(params, values[:cut], T - cut)
    else:
        lag = params.delays
        preds[lag:] = nar.nar_predict_updating(params, values)
        if args.free_running:
            preds[cut:] = nar.nar_predict_free_running(params, values[:cut], T - cut)
    start = max(cut, lag)
    score = rmse(preds[start:], values[start:], normalized=args.normalized)
    header = ["t"] + [f"ch{c}" for c in range(values.shape[1])]
    io.write_matrix_csv(out / "predictions.csv", header, preds * z.std + z.mean)
    mode = "free-running" if args.free_running else "updating"
    units = "normalized" if args.normalized else "standardized"
    print(f"{kind} {mode} test RMSE ({units}): {score:.6g}")


def _sweep_plan(args, cfg) -> tuple[harness.SweepSpec, int]:
    opts = dict(cfg.sweep)
    for key in ("axis", "values", "model", "k", "jobs"):
        if getattr(args, key) is not None:
            opts[key] = getattr(args, key)
    if "axis" not in opts:
        raise UsageError("sweep needs --axis or [sweep] axis in the config")
    try:
        values = tuple(float(v) for v in str(opts["values"]).split(",")) if opts.get("values") else ()
        values = tuple(int(v) if v.is_integer() else v for v in values)
        spec = harness.SweepSpec(opts["axis"], values, opts.get("model", "both"), int(opts.get("k", 10)))
        jobs = int(opts["jobs"]) if opts.get("jobs") not in (None, "") else (os.cpu_count() or 1)
    except ValueError as exc:
        raise UsageError(f"bad sweep options: {exc}") from None
    if jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if spec.axis is harness.Axis.AZIMUTH_SPAN:
        for v in spec.values:
            try:
                harness.span_code_to_range(v)
            except harness.UnknownCode as exc:
                raise UsageError(str(exc)) from None
    return spec, jobs


def cmd_sweep(args, cfg, out: Path):
    spec, jobs = args.plan
    result = harness.run_sweep(spec, cfg.scenario, cfg.lstm, cfg.nar, jobs=jobs)
    harness.write_results(result, out)
    for (value, model), (lo, mean, hi) in result.summaries.items():
        print(f"{spec.axis.value}={value} {model}: min {lo:.4g} mean {mean:.4g} max {hi:.4g}")
    for value, ratio in result.mean_ratio().items():
        print(f"{spec.axis.value}={value} NAR/LSTM mean RMSE ratio: {ratio:.3g}")


def cmd_beampattern(args, cfg, out: Path):
    ds = harness.generate_dataset(cfg.scenario)
    grid = np.arange(-90.0, 90.0 + args.step / 2, args.step)
    gain = beampattern(ds.weights, cfg.scenario.array, grid, cfg.scenario.elevation_deg)
    io.write_beampattern_csv(out / "beampattern.csv", grid, gain)
    _plot_pattern(grid, gain, cfg.scenario, out / "beampattern.svg")
    print(f"wrote beampattern over {grid.size} azimuths to {out}")


def _plot_pattern(grid, gain, scenario, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "beamcast", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(grid, np.maximum(gain, -80.0))
        ax.axvline(scenario.desired_azimuth_deg, color="g", ls="--", label="desired")
        for az in scenario.interferers():
            ax.axvline(az, color="r", ls=":", label="interferer")
        ax.set_xlabel("azimuth (deg)")
        ax.set_ylabel("gain (dB)")
        ax.legend()
        ax.grid(alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "forecast": cmd_forecast,
    "sweep": cmd_sweep,
    "beampattern": cmd_beampattern,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _config(args)
        if args.command == "sweep":
            args.plan = _sweep_plan(args, cfg)
        if args.command == "beampattern" and args.step <= 0:
            raise UsageError("--step must be positive")
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"beamcast: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, cfg, out)
    except UsageError as exc:
        print(f"beamcast: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"beamcast: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
