"""Amplitude-Phase Local Correlation block.

Two spectral branches: one FFT along the temporal axis, one along the
latent-channel axis.  Each branch decomposes its spectrum into amplitude
and phase, produces a sigmoid gate from the amplitude path and an additive
shift from the phase path, reconstructs the spectrum, and inverts the FFT.
The branch outputs are fused residually with learnable scalars.
"""
from __future__ import annotations

import numpy as np

from .kan import LinearLayer, swap_core
from .spectral import Spectrum, irfft, reconstruct, rfft, to_amp_phase
from .tensor import Tensor, sigmoid, softmax, transpose_axes

# gate logit bias at construction: sigma(bias) = 1 - 1e-3, so the block
# starts within 1e-3 of an identity-scaled spectrum (and exactly identity
# overall because the fusion scalars start at zero)
_GATE_INIT = float(np.log((1.0 - 1e-3) / 1e-3))


class KlcHead:
    """Gate/shift head over one frequency axis: core (kan|linear|conv1d)
    followed by an affine alignment map per path."""

    def __init__(self, bins, kind="kan", gate_activation="sigmoid", rng=None, dtype=np.float32):
        if gate_activation not in ("sigmoid", "softmax"):
            raise ValueError(f"unknown gate activation {gate_activation!r}")
        rng = rng or np.random.default_rng(0)
        self.bins = bins
        self.kind = kind
        self.gate_activation = gate_activation
        self.amp_core = swap_core(kind, bins, bins, rng=rng, dtype=dtype)
        self.amp_align = LinearLayer(bins, bins, rng=rng, dtype=dtype)
        self.phase_core = swap_core(kind, bins, bins, rng=rng, dtype=dtype)
        self.phase_align = LinearLayer(bins, bins, rng=rng, dtype=dtype)
        # damp the align maps so gates start near-uniform and shifts near zero
        self.amp_align.weight.data *= 0.1
        self.phase_align.weight.data *= 0.1
        self.amp_align.bias.data += np.asarray(_GATE_INIT, dtype=dtype)

    def gates(self, amplitude: Tensor) -> Tensor:
        logits = self.amp_align(self.amp_core(amplitude))
        if self.gate_activation == "softmax":
            return softmax(logits, axis=-1)
        return sigmoid(logits)

    def shifts(self, phase: Tensor) -> Tensor:
        return self.phase_align(self.phase_core(phase))

    def parameters(self):
        out = {}
        for name, layer in (
            ("amp_core", self.amp_core),
            ("amp_align", self.amp_align),
            ("phase_core", self.phase_core),
            ("phase_align", self.phase_align),
        ):
            for pname, p in layer.parameters().items():
                out[f"{name}.{pname}"] = p
        return out


class AplcBlock:
    def __init__(
        self,
        lookback,
        latent_dim,
        kind="kan",
        seq_enabled=True,
        chan_enabled=True,
        amp_enabled=True,
        phase_enabled=True,
        gate_activation="sigmoid",
        rng=None,
        dtype=np.float32,
    ):
        rng = rng or np.random.default_rng(0)
        self.lookback = lookback
        self.latent_dim = latent_dim
        self.seq_enabled = seq_enabled
        self.chan_enabled = chan_enabled
        self.amp_enabled = amp_enabled
        self.phase_enabled = phase_enabled
        self.dtype = dtype
        self.seq_head = KlcHead(
            lookback // 2 + 1, kind, gate_activation, rng=rng, dtype=dtype
        )
        self.chan_head = KlcHead(
            latent_dim // 2 + 1, kind, gate_activation, rng=rng, dtype=dtype
        )
        self.alpha = Tensor(np.zeros((), dtype=dtype), requires_grad=True)
        self.beta_fuse = Tensor(np.zeros((), dtype=dtype), requires_grad=True)

    def branch(self, z: Tensor, axis: int, head: KlcHead) -> Tensor:
        """One spectral branch: rfft along `axis`, gate/shift with the head's
        frequency axis last, reconstruct, inverse fft.  Output shape == input."""
        n = z.shape[axis]
        re, im = rfft(z, axis=axis)
        spec = to_amp_phase(re, im, n)
        amp, phase = spec.amplitude, spec.phase
        last = z.ndim - 1
        if axis != last:
            perm = list(range(z.ndim))
            perm[axis], perm[last] = perm[last], perm[axis]
            amp = transpose_axes(amp, perm)
            phase = transpose_axes(phase, perm)
        if self.amp_enabled:
            gate = head.gates(amp)
        else:
            gate = Tensor(np.ones(amp.shape, dtype=amp.dtype.type))
        if self.phase_enabled:
            shift = head.shifts(phase)
        else:
            shift = Tensor(np.zeros(phase.shape, dtype=phase.dtype.type))
        re2, im2 = reconstruct(
            Spectrum(amplitude=amp, phase=phase, source_length=n), gate, shift
        )
        if axis != last:
            re2 = transpose_axes(re2, perm)
            im2 = transpose_axes(im2, perm)
        return irfft(re2, im2, n, axis=axis)

    def __call__(self, z: Tensor) -> Tensor:
        out = z
        if self.seq_enabled:
            out = out + self.alpha * self.branch(z, 1, self.seq_head)
        if self.chan_enabled:
            out = out + self.beta_fuse * self.branch(z, 2, self.chan_head)
        return out

    def parameters(self):
        out = {"alpha": self.alpha, "beta_fuse": self.beta_fuse}
        if self.seq_enabled:
            for name, p in self.seq_head.parameters().items():
                out[f"seq_head.{name}"] = p
        if self.chan_enabled:
            for name, p in self.chan_head.parameters().items():
                out[f"chan_head.{name}"] = p
        return out
