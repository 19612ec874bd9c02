import numpy as np
import pytest

from beamcast import io, lstm, nar
from beamcast.array_model import SnapshotMatrix
from beamcast.timeseries import channelize, from_array, standardize


def test_snapshot_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    X = SnapshotMatrix(rng.normal(size=(7, 3)) + 1j * rng.normal(size=(7, 3)))
    path = io.write_snapshots_csv(tmp_path / "snapshots.csv", X)
    assert path.read_text().splitlines()[0] == "t,re_0,im_0,re_1,im_1,re_2,im_2"
    assert np.array_equal(io.read_snapshots_csv(path).data, X.data)


def test_series_written_in_original_units(tmp_path):
    s = channelize(np.array([1 + 2j, 3 - 1j, 0.5 + 0.25j, -2 + 0j]))
    path = io.write_series_csv(tmp_path / "series.csv", standardize(s))
    back = io.read_series_csv(path)
    np.testing.assert_allclose(back.channels, s.channels, atol=1e-12)


def test_series_reader_rejects_other_csv(tmp_path):
    path = io.write_weights_csv(tmp_path / "w.csv", np.ones(3))
    with pytest.raises(io.FormatError):
        io.read_series_csv(path)


def test_weights_round_trip(tmp_path):
    v = np.array([0.25 - 1e-17j, -3.5 + 2j])
    assert np.array_equal(io.read_weights_csv(io.write_weights_csv(tmp_path / "w.csv", v)), v)


def test_lstm_file(tmp_path):
    p = lstm.init_params(2, 5, seed=3)
    path = io.save_lstm(tmp_path / "m.lstm", p)
    blob = path.read_bytes()
    assert blob[:5] == b"LSTM1"
    assert len(blob) == 5 + 8 + 8 * p.flat().size
    assert np.array_equal(io.load_lstm(path).flat(), p.flat())


def test_nar_file(tmp_path):
    p = nar.init_params(3, 4, 2, seed=1)
    path = io.save_nar(tmp_path / "m.nar", p)
    q = io.load_nar(path)
    assert (q.delays, q.hidden, q.channels) == (3, 4, 2)
    assert np.array_equal(q.theta, p.theta)
    with pytest.raises(io.FormatError):
        io.load_lstm(path)


def test_matrix_csv_single_column(tmp_path):
    path = io.write_matrix_csv(tmp_path / "loss.csv", ["epoch", "loss"], [0.5, 0.25])
    assert path.read_text() == "epoch,loss\n0,0.5\n1,0.25\n"
