"""CSV and binary formats for snapshots, series, weights and trained models."""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .array_model import SnapshotMatrix
from .lstm import LstmParams
from .nar import NarParams
from .timeseries import Series, from_array

LSTM_MAGIC = b"LSTM1"
NAR_MAGIC = b"NARX1"


class FormatError(ValueError):
    pass


def fmt(x: float) -> str:
    """Shortest repr that round-trips a float64 exactly."""
    return repr(float(x))


def _write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _read_rows(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [row for row in r if row]
    return header, rows


def write_snapshots_csv(path, X: SnapshotMatrix):
    N = X.num_elements
    header = ["t"] + [f"{part}_{n}" for n in range(N) for part in ("re", "im")]
    rows = []
    for t, row in enumerate(X.data):
        cells = [str(t)]
        for z in row:
            cells += [fmt(z.real), fmt(z.imag)]
        rows.append(cells)
    return _write_rows(path, header, rows)


def read_snapshots_csv(path, sample_rate_hz: float = 1.0) -> SnapshotMatrix:
    header, rows = _read_rows(path)
    if header[0] != "t" or (len(header) - 1) % 2:
        raise FormatError(f"{path}: not a snapshot CSV")
    vals = np.array([[float(c) for c in row[1:]] for row in rows])
    return SnapshotMatrix(vals[:, 0::2] + 1j * vals[:, 1::2], sample_rate_hz)


def write_series_csv(path, s: Series):
    """Writes the series in original units."""
    raw = s.raw()
    header = ["t"] + [f"ch{c}" for c in range(raw.shape[0])]
    rows = [[str(t)] + [fmt(v) for v in raw[:, t]] for t in range(raw.shape[1])]
    return _write_rows(path, header, rows)


def read_series_csv(path) -> Series:
    header, rows = _read_rows(path)
    if header[0] != "t" or not all(h.startswith("ch") for h in header[1:]):
        raise FormatError(f"{path}: not a series CSV")
    vals = np.array([[float(c) for c in row[1:]] for row in rows])
    return from_array(vals.T)


def write_matrix_csv(path, header, values):
    """Generic (index, values...) table, e.g. predictions or loss curves."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] == 1 and len(header) == 2:
        values = values.T
    rows = [[str(i)] + [fmt(v) for v in row] for i, row in enumerate(values)]
    return _write_rows(path, header, rows)


def write_weights_csv(path, weights):
    v = np.asarray(getattr(weights, "data", weights), dtype=complex)
    return _write_rows(path, ["n", "re", "im"], [[str(n), fmt(z.real), fmt(z.imag)] for n, z in enumerate(v)])


def read_weights_csv(path) -> np.ndarray:
    header, rows = _read_rows(path)
    if header != ["n", "re", "im"]:
        raise FormatError(f"{path}: not a weight CSV")
    return np.array([float(r[1]) + 1j * float(r[2]) for r in rows])


def write_beampattern_csv(path, azimuth_deg, gain_db):
    rows = [[fmt(a), fmt(g)] for a, g in zip(azimuth_deg, gain_db)]
    return _write_rows(path, ["azimuth_deg", "gain_db"], rows)


def save_lstm(path, p: LstmParams):
    if p.output_size != p.input_size:
        raise FormatError("the LSTM file format assumes as many outputs as inputs")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(LSTM_MAGIC)
        fh.write(struct.pack("<II", p.input_size, p.hidden_size))
        fh.write(p.flat().astype("<f8").tobytes())
    return path


def load_lstm(path) -> LstmParams:
    blob = Path(path).read_bytes()
    if blob[:5] != LSTM_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:5]!r}")
    C, H = struct.unpack("<II", blob[5:13])
    return LstmParams.from_flat(np.frombuffer(blob[13:], dtype="<f8").astype(float), C, H)


def save_nar(path, p: NarParams):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(NAR_MAGIC)
        fh.write(struct.pack("<III", p.delays, p.hidden, p.channels))
        fh.write(p.theta.astype("<f8").tobytes())
    return path


def load_nar(path) -> NarParams:
    blob = Path(path).read_bytes()
    if blob[:5] != NAR_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:5]!r}")
    p, hidden, C = struct.unpack("<III", blob[5:17])
    return NarParams(np.frombuffer(blob[17:], dtype="<f8").astype(float), p, hidden, C)
