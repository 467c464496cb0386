"""Loss and evaluation metrics, Adam, the training loop with early stopping,
and the binary checkpoint format.
"""
from __future__ import annotations

import logging
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointCorruptError, CheckpointFormatError, ConfigError
from .model import AprnetModel
from .tensor import ShapeError, Tensor, no_grad

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"APRNETCK"
CHECKPOINT_VERSION = 1


# ----------------------------------------------------------------------
# metrics
def mse_mae(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"mse_mae: {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff)), float(np.mean(np.abs(diff)))


def smape_mase_owa(pred, target, insample, season_period, naive2_smape, naive2_mase):
    """M4-convention metrics.

    smape = (200/h) sum |p-t| / (|p|+|t|)   (0/0 terms contribute 0)
    mase  = (1/h) sum |p-t| / seasonal-naive in-sample MAE
    owa   = 0.5 (smape/naive2_smape + mase/naive2_mase)
    """
    pred = np.asarray(pred, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    insample = np.asarray(insample, dtype=np.float64).ravel()
    m = int(season_period)
    if insample.size <= m:
        raise ValueError(f"insample length {insample.size} must exceed season period {m}")
    if pred.shape != target.shape:
        raise ShapeError(f"smape_mase_owa: {pred.shape} vs {target.shape}")
    denom = np.abs(pred) + np.abs(target)
    terms = np.where(denom > 0, np.abs(pred - target) / np.where(denom > 0, denom, 1.0), 0.0)
    smape = 200.0 / pred.size * terms.sum()
    naive_mae = np.mean(np.abs(insample[m:] - insample[:-m]))
    if naive_mae == 0:
        raise ValueError("degenerate series: seasonal-naive denominator is zero")
    mase = float(np.mean(np.abs(pred - target)) / naive_mae)
    owa = 0.5 * (smape / naive2_smape + mase / naive2_mase)
    return float(smape), mase, float(owa)


# ----------------------------------------------------------------------
# optimizer
class Adam:
    """Bias-corrected Adam over a named parameter dict.  Steps with any
    non-finite gradient are skipped and counted."""

    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps_opt=1e-8):
        self.params = dict(params)
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps_opt = eps_opt
        self.step_count = 0
        self.skipped_steps = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        grads = {}
        for name, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                self.skipped_steps += 1
                logger.warning("skipping step: non-finite gradient in %s", name)
                return False
            grads[name] = g
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for name, p in self.params.items():
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            mhat = self.m[name] / bc1
            vhat = self.v[name] / bc2
            p.data -= (self.learning_rate * mhat / (np.sqrt(vhat) + self.eps_opt)).astype(
                p.data.dtype, copy=False
            )
        return True


# ----------------------------------------------------------------------
# training loop
@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    patience: int = 5
    seed: int = 0
    checkpoint_path: str | None = None
    loss_kind: str = "mse"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 0:
            raise ConfigError("need epochs >= 1, batch_size >= 1, patience >= 0")
        if self.loss_kind != "mse":
            raise ConfigError(f"unknown loss kind {self.loss_kind!r}")


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)  # (epoch, train_mse, val_mse, seconds)
    best_epoch: int = -1
    best_val: float = float("inf")
    wall_time: float = 0.0

    def to_csv(self):
        lines = ["epoch,train_mse,val_mse,seconds"]
        for e, tr, va, sec in self.epochs:
            lines.append(f"{e},{tr:.17g},{va:.17g},{sec:.17g}")
        return "\n".join(lines) + "\n"


def _batch_loss(model, xb, yb):
    pred, _ = model.forward(xb)
    diff = pred - Tensor(yb)
    return (diff * diff).mean(), pred


def evaluate(model, dataset, split, batch_size=64):
    """Dataset-wide MSE/MAE on denormalized predictions."""
    se = ae = count = 0.0
    with no_grad():
        for xb, yb in dataset.batches(split, batch_size, dtype=np.dtype(model.dtype)):
            pred, _ = model.forward(xb)
            diff = pred.data.astype(np.float64) - yb.astype(np.float64)
            se += float(np.sum(diff * diff))
            ae += float(np.sum(np.abs(diff)))
            count += diff.size
    if count == 0:
        raise ConfigError(f"split {split!r} has no windows to evaluate")
    return se / count, ae / count


def train(model: AprnetModel, dataset, config: TrainConfig):
    """MSE training with per-epoch validation, early stopping, and
    best-epoch parameter restoration.  Single-threaded and deterministic
    for a fixed seed."""
    if dataset.count("train") == 0 or dataset.count("val") == 0:
        raise ConfigError("train and val splits must be non-empty")
    optim = Adam(
        model.parameters(),
        learning_rate=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        eps_opt=config.eps_opt,
    )
    rng = np.random.default_rng(config.seed)
    report = TrainReport()
    best_params = None
    start = time.perf_counter()
    dtype = np.dtype(model.dtype)
    for epoch in range(1, config.epochs + 1):
        tick = time.perf_counter()
        train_se = train_n = 0.0
        for xb, yb in dataset.batches(
            "train", config.batch_size, shuffle=True, rng=rng, dtype=dtype
        ):
            loss, _ = _batch_loss(model, xb, yb)
            optim.zero_grad()
            loss.backward()
            optim.step()
            train_se += loss.item() * xb.shape[0]
            train_n += xb.shape[0]
        val_mse, _ = evaluate(model, dataset, "val", config.batch_size)
        seconds = time.perf_counter() - tick
        train_mse = train_se / max(train_n, 1)
        report.epochs.append((epoch, train_mse, val_mse, seconds))
        if val_mse < report.best_val:
            report.best_val = val_mse
            report.best_epoch = epoch
            best_params = {k: p.data.copy() for k, p in model.parameters().items()}
        if epoch - report.best_epoch >= config.patience:
            break
    if best_params is not None:
        for k, p in model.parameters().items():
            p.data = best_params[k].copy()
    report.wall_time = time.perf_counter() - start
    if config.checkpoint_path:
        save_checkpoint(config.checkpoint_path, model, optim)
    return report


# ----------------------------------------------------------------------
# checkpointing
def _records_for(model: AprnetModel, optim: Adam | None):
    records = []
    for key, value in model.config().items():
        if key == "klc_kind":
            value = ("kan", "linear", "conv1d").index(value)
        records.append((f"meta.{key}", np.asarray(float(value), dtype=np.float32)))
    for name, p in model.parameters().items():
        records.append((f"param.{name}", p.data))
    if optim is not None:
        records.append(("adam.step_count", np.asarray(float(optim.step_count), dtype=np.float32)))
        for name in model.parameters():
            records.append((f"adam.m.{name}", optim.m[name]))
            records.append((f"adam.v.{name}", optim.v[name]))
    return records


def save_checkpoint(path, model: AprnetModel, optim: Adam | None = None):
    records = _records_for(model, optim)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(records)))
        for name, arr in records:
            # note: ascontiguousarray would promote rank-0 records to rank 1
            raw = np.asarray(arr, dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", raw.ndim))
            fh.write(struct.pack(f"<{raw.ndim}I", *raw.shape))
            fh.write(raw.tobytes())


def _read_exact(fh, n, path):
    buf = fh.read(n)
    if len(buf) != n:
        raise CheckpointCorruptError(f"{path}: truncated checkpoint")
    return buf


def read_checkpoint(path):
    """Return the raw name -> float32 array record map."""
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointFormatError(f"{path}: bad magic {magic!r}")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, path))
        if version != CHECKPOINT_VERSION:
            raise CheckpointFormatError(f"{path}: unsupported version {version}")
        (count,) = struct.unpack("<I", _read_exact(fh, 4, path))
        records = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<I", _read_exact(fh, 4, path))
            name = _read_exact(fh, nlen, path).decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(fh, 4, path))
            shape = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank, path))
            numel = int(np.prod(shape)) if rank else 1
            raw = _read_exact(fh, 4 * numel, path)
            records[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    return records


def model_from_records(records, dtype=np.float32):
    """Rebuild an AprnetModel from checkpoint meta records and parameters."""
    meta = {k[len("meta."):]: v for k, v in records.items() if k.startswith("meta.")}

    def geti(key, default=None):
        if key not in meta:
            if default is None:
                raise CheckpointFormatError(f"checkpoint missing meta.{key}")
            return default
        return int(round(float(meta[key])))

    model = AprnetModel(
        lookback=geti("lookback"),
        horizon=geti("horizon"),
        n_channels=geti("n_channels"),
        latent_dim=geti("latent_dim"),
        klc_kind=("kan", "linear", "conv1d")[geti("klc_kind")],
        aplc_enabled=bool(geti("aplc_enabled")),
        seq_enabled=bool(geti("seq_enabled", 1)),
        chan_enabled=bool(geti("chan_enabled", 1)),
        amp_enabled=bool(geti("amp_enabled", 1)),
        phase_enabled=bool(geti("phase_enabled", 1)),
        dtype=dtype,
        seed=geti("seed", 0),
    )
    _load_params(model, records)
    return model


def _load_params(model, records):
    for name, p in model.parameters().items():
        key = f"param.{name}"
        if key not in records:
            raise CheckpointFormatError(f"checkpoint missing record {key}")
        arr = records[key]
        if tuple(arr.shape) != tuple(p.data.shape):
            raise CheckpointFormatError(
                f"record {key}: shape {arr.shape} != parameter shape {p.data.shape}"
            )
        p.data = arr.astype(p.data.dtype)


def load_checkpoint(path, model: AprnetModel, optim: Adam | None = None):
    """Load parameters (and optimizer moments) saved by save_checkpoint."""
    records = read_checkpoint(path)
    _load_params(model, records)
    if optim is not None:
        optim.step_count = int(round(float(records.get("adam.step_count", 0.0))))
        for name in model.parameters():
            if f"adam.m.{name}" in records:
                optim.m[name] = records[f"adam.m.{name}"].astype(optim.m[name].dtype)
                optim.v[name] = records[f"adam.v.{name}"].astype(optim.v[name].dtype)
    return model, optim
