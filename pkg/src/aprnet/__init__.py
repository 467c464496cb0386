"""APRNet: frequency-domain time-series forecasting with B-spline KAN
spectral gating over both the temporal and latent-channel axes."""

from .aplc import AplcBlock, KlcHead
from .data import SeriesTable, WindowedDataset, load_csv, make_windows, save_csv, synth_multifreq
from .kan import KanLayer, LinearLayer, Conv1dLayer, SplineGrid, bspline_basis, swap_core
from .model import AprnetModel, NormStats
from .spectral import Spectrum, irfft, reconstruct, rfft, to_amp_phase
from .tensor import Tensor, no_grad
from .training import (
    Adam,
    TrainConfig,
    TrainReport,
    evaluate,
    load_checkpoint,
    mse_mae,
    save_checkpoint,
    smape_mase_owa,
    train,
)

__all__ = [
    "AplcBlock",
    "AprnetModel",
    "Adam",
    "Conv1dLayer",
    "KanLayer",
    "KlcHead",
    "LinearLayer",
    "NormStats",
    "SeriesTable",
    "Spectrum",
    "SplineGrid",
    "Tensor",
    "TrainConfig",
    "TrainReport",
    "WindowedDataset",
    "bspline_basis",
    "evaluate",
    "irfft",
    "load_checkpoint",
    "load_csv",
    "make_windows",
    "mse_mae",
    "no_grad",
    "reconstruct",
    "rfft",
    "save_checkpoint",
    "save_csv",
    "smape_mase_owa",
    "swap_core",
    "synth_multifreq",
    "to_amp_phase",
    "train",
]
