"""Dataset ingestion, deterministic windowing/splits, and a synthetic
multi-frequency generator for property tests.

CSV convention: UTF-8, header row, optional leading timestamp column,
decimal-point reals.  Emission uses 17 significant digits so a load/save
round trip is value-exact.
"""
from __future__ import annotations

import csv
import os
import queue
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

SPLITS = ("train", "val", "test")


@dataclass
class SeriesTable:
    values: np.ndarray  # [Tlen, C] float64
    channel_names: list
    timestamps: list | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError(f"series values must be 2-D, got shape {self.values.shape}")

    @property
    def length(self):
        return self.values.shape[0]

    @property
    def n_channels(self):
        return self.values.shape[1]


def _is_float(cell):
    try:
        float(cell)
        return True
    except ValueError:
        return False


def load_csv(path, timestamp_column=None):
    """Read a SeriesTable from a header-first CSV.

    timestamp_column: True/False forces the leading column to be treated as
    timestamps; None auto-detects from the first data row.
    """
    if not os.path.exists(path):
        raise ConfigError(f"data file not found: {path}")
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: empty file")
    header = rows[0]
    body = rows[1:]
    if not body:
        raise DataError(f"{path}: header-only file, no data rows")
    if timestamp_column is None:
        timestamp_column = not _is_float(body[0][0])
    start = 1 if timestamp_column else 0
    names = header[start:]
    timestamps = [] if timestamp_column else None
    values = np.empty((len(body), len(names)), dtype=np.float64)
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(row)} cells, expected {len(header)}")
        if timestamp_column:
            timestamps.append(row[0])
        for j, cell in enumerate(row[start:]):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell at row {i + 2}, column {names[j]!r}: {cell!r}"
                ) from None
    return SeriesTable(values=values, channel_names=names, timestamps=timestamps)


def save_csv(table: SeriesTable, path):
    """Write a SeriesTable losslessly (17 significant digits)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if table.timestamps is not None:
            writer.writerow(["date"] + list(table.channel_names))
            for ts, row in zip(table.timestamps, table.values):
                writer.writerow([ts] + [f"{v:.17g}" for v in row])
        else:
            writer.writerow(list(table.channel_names))
            for row in table.values:
                writer.writerow([f"{v:.17g}" for v in row])


def synth_multifreq(length, n_channels, components, drift=0.0, noise_sd=0.0, seed=0):
    """Deterministic multi-sinusoid series.

    components: per channel, a list of (freq, amplitude, phase) triples;
    channel c value at t = sum_j a_j sin(2 pi f_j t + p_j + drift * t) + noise.
    A single component list is shared across channels.
    """
    if len(components) != n_channels:
        raise ConfigError(
            f"need one component list per channel: {len(components)} != {n_channels}"
        )
    rng = np.random.default_rng(seed)
    t = np.arange(length, dtype=np.float64)
    values = np.zeros((length, n_channels), dtype=np.float64)
    for c, comps in enumerate(components):
        for f, a, p in comps:
            values[:, c] += a * np.sin(2.0 * np.pi * f * t + p + drift * t)
    if noise_sd > 0:
        values += rng.normal(0.0, noise_sd, size=values.shape)
    names = [f"ch{c}" for c in range(n_channels)]
    return SeriesTable(values=values, channel_names=names)


@dataclass
class WindowedDataset:
    """Sliding-window (stride 1) view with contiguous time splits.

    Window i of a split reads rows [i, i+L) as input and [i+L, i+L+tau) as
    target, both relative to the split start; windows never straddle split
    boundaries.
    """

    source: SeriesTable
    lookback: int
    horizon: int
    ratios: tuple = (0.7, 0.1, 0.2)
    bounds: dict = field(init=False)

    def __post_init__(self):
        if self.lookback < 1 or self.horizon < 1:
            raise ConfigError("lookback and horizon must be >= 1")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split ratios must sum to 1, got {self.ratios}")
        n = self.source.length
        n_train = int(n * self.ratios[0])
        n_val = int(n * self.ratios[1])
        self.bounds = {
            "train": (0, n_train),
            "val": (n_train, n_train + n_val),
            "test": (n_train + n_val, n),
        }
        need = self.lookback + self.horizon
        for split, ratio in zip(SPLITS, self.ratios):
            lo, hi = self.bounds[split]
            if ratio > 0 and hi - lo < need:
                raise ConfigError(
                    f"{split} split has {hi - lo} rows, needs at least {need} "
                    f"(lookback {self.lookback} + horizon {self.horizon})"
                )

    def count(self, split):
        lo, hi = self.bounds[split]
        return max(hi - lo - self.lookback - self.horizon + 1, 0)

    def window(self, split, i):
        if not 0 <= i < self.count(split):
            raise IndexError(f"window {i} out of range for split {split!r}")
        lo, _ = self.bounds[split]
        s = lo + i
        x = self.source.values[s : s + self.lookback]
        y = self.source.values[s + self.lookback : s + self.lookback + self.horizon]
        return x, y

    def batches(self, split, batch_size, shuffle=False, rng=None, dtype=np.float32):
        """Yield (x, y) batch arrays; order is a permutation of the window
        indices when shuffle is set, drawn from `rng` once per call."""
        n = self.count(split)
        order = np.arange(n)
        if shuffle:
            rng = rng or np.random.default_rng(0)
            order = rng.permutation(n)
        it = self._assemble(split, order, batch_size, dtype)
        threads = _reader_threads()
        if threads > 1:
            yield from _prefetch(it)
        else:
            yield from it

    def _assemble(self, split, order, batch_size, dtype):
        for start in range(0, len(order), batch_size):
            idx = order[start : start + batch_size]
            xs = np.stack([self.window(split, i)[0] for i in idx])
            ys = np.stack([self.window(split, i)[1] for i in idx])
            yield xs.astype(dtype), ys.astype(dtype)


def _reader_threads():
    raw = os.environ.get("APRNET_THREADS", "1")
    try:
        return max(int(raw), 1)
    except ValueError:
        return 1


def _prefetch(it, depth=4):
    """Order-preserving single-reader prefetch on a background thread."""
    q = queue.Queue(maxsize=depth)
    sentinel = object()

    def fill():
        for item in it:
            q.put(item)
        q.put(sentinel)

    worker = threading.Thread(target=fill, daemon=True)
    worker.start()
    while True:
        item = q.get()
        if item is sentinel:
            break
        yield item
    worker.join()


def make_windows(table, lookback, horizon, ratios=(0.7, 0.1, 0.2)):
    """Spec surface for WindowedDataset construction."""
    return WindowedDataset(table, lookback, horizon, tuple(ratios))


def default_ratios_for(path):
    """ETT-style files conventionally split 0.6/0.2/0.2, others 0.7/0.1/0.2."""
    name = os.path.basename(str(path)).lower()
    return (0.6, 0.2, 0.2) if name.startswith("ett") else (0.7, 0.1, 0.2)
