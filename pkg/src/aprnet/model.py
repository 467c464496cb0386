"""Full APRNet assembly: per-instance normalization with a learnable affine
(RevIN), affine encoder into the latent space, the APLC block, layer norms,
a temporal + feature decoder, and the inverse transforms.
"""
from __future__ import annotations

import numpy as np

from .aplc import AplcBlock
from .errors import DataError
from .kan import _uniform_init
from .tensor import ShapeError, Tensor, matmul, reduce_mean, reduce_var, sqrt, transpose_axes


class NormStats:
    """Per-instance, per-channel mean/std cached by the forward pass."""

    def __init__(self, mean: Tensor, std: Tensor):
        self.mean = mean
        self.std = std


class AprnetModel:
    def __init__(
        self,
        lookback,
        horizon,
        n_channels,
        latent_dim=128,
        klc_kind="kan",
        seq_enabled=True,
        chan_enabled=True,
        amp_enabled=True,
        phase_enabled=True,
        gate_activation="sigmoid",
        aplc_enabled=True,
        delta=1e-5,
        gamma_floor=1e-4,
        dtype=np.float32,
        seed=0,
    ):
        rng = np.random.default_rng(seed)
        self.lookback = lookback
        self.horizon = horizon
        self.n_channels = n_channels
        self.latent_dim = latent_dim
        self.klc_kind = klc_kind
        self.aplc_enabled = aplc_enabled
        self.delta = delta
        self.gamma_floor = gamma_floor
        self.dtype = dtype
        self.seed = seed

        C, K, L, tau = n_channels, latent_dim, lookback, horizon
        self.revin_gamma = Tensor(np.ones(C, dtype=dtype), requires_grad=True)
        self.revin_beta = Tensor(np.zeros(C, dtype=dtype), requires_grad=True)
        self.encoder_w = Tensor(_uniform_init(rng, (C, K), C, dtype), requires_grad=True)
        self.encoder_b = Tensor(np.zeros(K, dtype=dtype), requires_grad=True)
        self.pre_norm_scale = Tensor(np.ones(K, dtype=dtype), requires_grad=True)
        self.pre_norm_offset = Tensor(np.zeros(K, dtype=dtype), requires_grad=True)
        self.aplc = (
            AplcBlock(
                L,
                K,
                kind=klc_kind,
                seq_enabled=seq_enabled,
                chan_enabled=chan_enabled,
                amp_enabled=amp_enabled,
                phase_enabled=phase_enabled,
                gate_activation=gate_activation,
                rng=rng,
                dtype=dtype,
            )
            if aplc_enabled
            else None
        )
        self.post_norm_scale = Tensor(np.ones(K, dtype=dtype), requires_grad=True)
        self.post_norm_offset = Tensor(np.zeros(K, dtype=dtype), requires_grad=True)
        self.dec_time_w = Tensor(_uniform_init(rng, (L, tau), L, dtype), requires_grad=True)
        self.dec_time_b = Tensor(np.zeros(tau, dtype=dtype), requires_grad=True)
        self.dec_feat_w = Tensor(_uniform_init(rng, (K, C), K, dtype), requires_grad=True)
        self.dec_feat_b = Tensor(np.zeros(C, dtype=dtype), requires_grad=True)

    # ------------------------------------------------------------------
    def _layernorm(self, x, scale, offset, eps=1e-5):
        m = reduce_mean(x, axis=-1, keepdims=True)
        v = reduce_var(x, axis=-1, keepdims=True)
        return (x - m) / sqrt(v + eps) * scale + offset

    def forward(self, x):
        """Map a B x L x C batch to (B x tau x C predictions, NormStats)."""
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=self.dtype))
        if x.ndim != 3 or x.shape[1] != self.lookback or x.shape[2] != self.n_channels:
            raise ShapeError(
                f"forward: expected (B, {self.lookback}, {self.n_channels}), got {x.shape}"
            )
        if not np.all(np.isfinite(x.data)):
            raise DataError("forward: input contains non-finite values")

        mean = reduce_mean(x, axis=1, keepdims=True)
        std = sqrt(reduce_var(x, axis=1, keepdims=True))
        stats = NormStats(mean, std)
        xbar = (x - mean) / (std + self.delta)
        xhat = xbar * self.revin_gamma + self.revin_beta

        z = self._layernorm(
            matmul(xhat, self.encoder_w) + self.encoder_b,
            self.pre_norm_scale,
            self.pre_norm_offset,
        )
        yh = self.aplc(z) if self.aplc is not None else z
        t = self._layernorm(yh, self.post_norm_scale, self.post_norm_offset)
        # temporal decode L -> tau along axis 1, then feature decode K -> C
        t = transpose_axes(t, (0, 2, 1))  # B x K x L
        t = matmul(t, self.dec_time_w) + self.dec_time_b  # B x K x tau
        t = transpose_axes(t, (0, 2, 1))  # B x tau x K
        ybar = matmul(t, self.dec_feat_w) + self.dec_feat_b  # B x tau x C
        y = self.inverse_revin(ybar, stats)
        return y, stats

    __call__ = forward

    def inverse_revin(self, y, stats: NormStats):
        """Undo the affine then the per-instance normalization:
        ((y - beta) / gamma) * (std + delta) + mean."""
        g = self.revin_gamma.data
        floor = self.gamma_floor
        correction = np.where(
            np.abs(g) < floor, np.where(g < 0, -floor, floor) - g, 0.0
        ).astype(self.dtype)
        # constant shift keeps the op differentiable while flooring |gamma|
        g_safe = self.revin_gamma + Tensor(correction)
        return (y - self.revin_beta) / g_safe * (stats.std + self.delta) + stats.mean

    # ------------------------------------------------------------------
    def parameters(self):
        out = {
            "revin_gamma": self.revin_gamma,
            "revin_beta": self.revin_beta,
            "encoder_w": self.encoder_w,
            "encoder_b": self.encoder_b,
            "pre_norm_scale": self.pre_norm_scale,
            "pre_norm_offset": self.pre_norm_offset,
            "post_norm_scale": self.post_norm_scale,
            "post_norm_offset": self.post_norm_offset,
            "dec_time_w": self.dec_time_w,
            "dec_time_b": self.dec_time_b,
            "dec_feat_w": self.dec_feat_w,
            "dec_feat_b": self.dec_feat_b,
        }
        if self.aplc is not None:
            for name, p in self.aplc.parameters().items():
                out[f"aplc.{name}"] = p
        return out

    def count_parameters(self):
        return int(sum(p.size for p in self.parameters().values()))

    def zero_grad(self):
        for p in self.parameters().values():
            p.grad = None

    def config(self):
        """Scalar hyperparameters needed to rebuild an identical model."""
        cfg = {
            "lookback": self.lookback,
            "horizon": self.horizon,
            "n_channels": self.n_channels,
            "latent_dim": self.latent_dim,
            "klc_kind": self.klc_kind,
            "aplc_enabled": self.aplc_enabled,
            "seed": self.seed,
        }
        if self.aplc is not None:
            cfg.update(
                seq_enabled=self.aplc.seq_enabled,
                chan_enabled=self.aplc.chan_enabled,
                amp_enabled=self.aplc.amp_enabled,
                phase_enabled=self.aplc.phase_enabled,
            )
        return cfg
