import os

import numpy as np
import pytest

from aprnet.data import (
    SeriesTable,
    WindowedDataset,
    default_ratios_for,
    load_csv,
    make_windows,
    save_csv,
    synth_multifreq,
)
from aprnet.errors import ConfigError, DataError


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def test_load_small_file(tmp_path):
    path = write(tmp_path, "a.csv", "x,y\n1,2\n3,4\n5,6\n")
    t = load_csv(path)
    assert t.values.shape == (3, 2)
    assert np.allclose(t.values, [[1, 2], [3, 4], [5, 6]])
    assert t.channel_names == ["x", "y"]
    assert t.timestamps is None


def test_load_timestamp_autodetect(tmp_path):
    path = write(tmp_path, "b.csv", "date,a,b\n2020-01-01,1,2\n2020-01-02,3,4\n")
    t = load_csv(path)
    assert t.timestamps == ["2020-01-01", "2020-01-02"]
    assert t.values.shape == (2, 2)


def test_load_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_csv(str(tmp_path / "nope.csv"))
    assert "nope.csv" in str(exc.value)


def test_load_header_only_file(tmp_path):
    path = write(tmp_path, "c.csv", "x,y\n")
    with pytest.raises(DataError):
        load_csv(path)


def test_load_bad_cell_names_row_and_column(tmp_path):
    path = write(tmp_path, "d.csv", "x,y\n1,2\n1,oops\n")
    with pytest.raises(DataError) as exc:
        load_csv(path)
    msg = str(exc.value)
    assert "row 3" in msg and "'y'" in msg


def test_load_ragged_row(tmp_path):
    path = write(tmp_path, "e.csv", "x,y\n1,2\n3\n")
    with pytest.raises(DataError):
        load_csv(path)


def test_save_load_round_trip_exact(tmp_path):
    rng = np.random.default_rng(0)
    t = SeriesTable(values=rng.normal(size=(20, 3)) * 1e3,
                    channel_names=["a", "b", "c"],
                    timestamps=[f"t{i}" for i in range(20)])
    path = str(tmp_path / "rt.csv")
    save_csv(t, path)
    back = load_csv(path)
    assert np.array_equal(back.values, t.values)
    assert back.timestamps == t.timestamps
    assert back.channel_names == t.channel_names


def test_synth_exact_sinusoid():
    f, a, p = 0.05, 2.0, 0.7
    t = synth_multifreq(100, 1, [[(f, a, p)]])
    ts = np.arange(100.0)
    expect = a * np.sin(2 * np.pi * f * ts + p)
    assert np.max(np.abs(t.values[:, 0] - expect)) == 0.0


def test_synth_seed_determinism():
    comps = [[(0.1, 1.0, 0.0)]] * 2
    a = synth_multifreq(50, 2, comps, noise_sd=0.3, seed=5)
    b = synth_multifreq(50, 2, comps, noise_sd=0.3, seed=5)
    c = synth_multifreq(50, 2, comps, noise_sd=0.3, seed=6)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_synth_dominant_bin():
    t = synth_multifreq(64, 1, [[(4 / 64, 1.0, 0.0)]])
    spec = np.abs(np.fft.rfft(t.values[:, 0]))
    assert np.argmax(spec) == 4


def test_synth_component_count_mismatch():
    with pytest.raises(ConfigError):
        synth_multifreq(10, 2, [[(0.1, 1.0, 0.0)]])


def test_window_count_formula():
    t = SeriesTable(values=np.zeros((10, 1)), channel_names=["a"])
    ds = make_windows(t, 3, 2, ratios=(1.0, 0.0, 0.0))
    assert ds.count("train") == 6
    assert ds.count("val") == 0 and ds.count("test") == 0


def test_window_too_short_names_split():
    t = SeriesTable(values=np.zeros((5, 1)), channel_names=["a"])
    with pytest.raises(ConfigError) as exc:
        make_windows(t, 3, 3, ratios=(1.0, 0.0, 0.0))
    assert "train" in str(exc.value)


def test_ratios_must_sum_to_one():
    t = SeriesTable(values=np.zeros((100, 1)), channel_names=["a"])
    with pytest.raises(ConfigError):
        make_windows(t, 3, 2, ratios=(0.5, 0.2, 0.2))


def test_window_shapes_and_alignment():
    vals = np.arange(40.0)[:, None]
    t = SeriesTable(values=vals, channel_names=["a"])
    ds = make_windows(t, 4, 2, ratios=(0.5, 0.25, 0.25))
    x, y = ds.window("train", 0)
    assert x.shape == (4, 1) and y.shape == (2, 1)
    assert np.array_equal(x[:, 0], [0, 1, 2, 3])
    assert np.array_equal(y[:, 0], [4, 5])
    # val split starts where train ends
    xv, yv = ds.window("val", 0)
    assert xv[0, 0] == 20.0


def test_windows_never_straddle_boundaries():
    vals = np.arange(40.0)[:, None]
    ds = make_windows(SeriesTable(values=vals, channel_names=["a"]), 4, 2,
                      ratios=(0.5, 0.25, 0.25))
    for split in ("train", "val", "test"):
        lo, hi = ds.bounds[split]
        for i in range(ds.count(split)):
            x, y = ds.window(split, i)
            assert x[0, 0] >= lo and y[-1, 0] <= hi - 1


def test_window_index_out_of_range():
    vals = np.arange(20.0)[:, None]
    ds = make_windows(SeriesTable(values=vals, channel_names=["a"]), 3, 2,
                      ratios=(1.0, 0.0, 0.0))
    with pytest.raises(IndexError):
        ds.window("train", ds.count("train"))


def test_shuffle_preserves_multiset():
    vals = np.arange(30.0)[:, None]
    ds = make_windows(SeriesTable(values=vals, channel_names=["a"]), 3, 1,
                      ratios=(1.0, 0.0, 0.0))
    plain = [x for xb, _ in ds.batches("train", 4, dtype=np.float64)
             for x in xb]
    rng = np.random.default_rng(9)
    shuffled = [x for xb, _ in ds.batches("train", 4, shuffle=True, rng=rng, dtype=np.float64)
                for x in xb]
    key = lambda arr: tuple(arr.ravel())
    assert sorted(map(key, plain)) == sorted(map(key, shuffled))
    assert [key(a) for a in plain] != [key(a) for a in shuffled]


def test_batches_dtype_and_shape():
    vals = np.arange(30.0)[:, None]
    ds = make_windows(SeriesTable(values=vals, channel_names=["a"]), 3, 2,
                      ratios=(1.0, 0.0, 0.0))
    batches = list(ds.batches("train", 8))
    assert batches[0][0].dtype == np.float32
    assert batches[0][0].shape == (8, 3, 1)
    assert batches[0][1].shape == (8, 2, 1)
    assert sum(b[0].shape[0] for b in batches) == ds.count("train")


def test_prefetch_thread_matches_serial(monkeypatch):
    vals = np.arange(60.0)[:, None]
    ds = make_windows(SeriesTable(values=vals, channel_names=["a"]), 4, 2,
                      ratios=(1.0, 0.0, 0.0))
    serial = list(ds.batches("train", 8, dtype=np.float64))
    monkeypatch.setenv("APRNET_THREADS", "4")
    threaded = list(ds.batches("train", 8, dtype=np.float64))
    assert len(serial) == len(threaded)
    for (xa, ya), (xb, yb) in zip(serial, threaded):
        assert np.array_equal(xa, xb) and np.array_equal(ya, yb)


def test_default_ratios_for_names():
    assert default_ratios_for("/data/ETTh1.csv") == (0.6, 0.2, 0.2)
    assert default_ratios_for("ettm2.csv") == (0.6, 0.2, 0.2)
    assert default_ratios_for("weather.csv") == (0.7, 0.1, 0.2)
