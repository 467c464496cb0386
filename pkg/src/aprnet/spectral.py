"""One-sided real FFT, amplitude/phase decomposition, and spectral
reconstruction, all differentiable.

Convention: un-normalized forward transform, 1/n inverse.  The forward and
inverse maps are linear, so their backward passes are the (scaled) adjoint
transforms rather than per-butterfly tape records.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, Tensor, _node, atan2, cos, mul, sin, sqrt

#: smoothing constant inside the amplitude square root; keeps the gradient
#: finite at zero bins (constant inputs produce exactly-zero spectra).
EPS_AMP = 1e-8


@dataclass
class Spectrum:
    """Amplitude/phase view of a one-sided real spectrum."""

    amplitude: Tensor
    phase: Tensor
    source_length: int

    @property
    def num_bins(self):
        return self.source_length // 2 + 1


def _onesided_weights(n, dtype):
    """Adjoint weights: DC and (even-n) Nyquist count once, interior twice."""
    nb = n // 2 + 1
    w = np.full(nb, 0.5, dtype=dtype)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    return w


def _expand(w, ndim, axis):
    shape = [1] * ndim
    shape[axis] = w.size
    return w.reshape(shape)


def rfft(x: Tensor, axis: int = -1):
    """One-sided DFT along `axis`; returns (re, im) tensors of n//2+1 bins."""
    axis = axis % x.ndim
    n = x.shape[axis]
    if n < 2:
        raise ValueError(f"rfft: axis extent must be >= 2, got {n}")
    c = np.fft.rfft(x.data, axis=axis)
    dtype = x.dtype
    re_data = np.ascontiguousarray(c.real).astype(dtype, copy=False)
    im_data = np.ascontiguousarray(c.imag).astype(dtype, copy=False)

    w = _onesided_weights(n, np.float64)
    w_re = _expand(w, x.ndim, axis)
    w_im = w_re.copy()
    # d(im_k)/dx vanishes at DC and Nyquist (sin term is identically zero)
    idx = [slice(None)] * x.ndim
    idx[axis] = 0
    w_im[tuple(idx)] = 0.0
    if n % 2 == 0:
        idx[axis] = -1
        w_im[tuple(idx)] = 0.0

    def vjp_re(g):
        return (n * np.fft.irfft(g * w_re, n=n, axis=axis)).astype(dtype, copy=False)

    def vjp_im(g):
        return (n * np.fft.irfft(1j * (g * w_im), n=n, axis=axis)).astype(
            dtype, copy=False
        )

    re = _node(re_data, (x,), (vjp_re,))
    im = _node(im_data, (x,), (vjp_im,))
    return re, im


def irfft(re: Tensor, im: Tensor, source_length: int, axis: int = -1):
    """Inverse one-sided transform with 1/n scaling; irfft(rfft(x)) == x."""
    n = int(source_length)
    axis = axis % re.ndim
    nb = n // 2 + 1
    if re.shape != im.shape:
        raise ShapeError(f"irfft: re shape {re.shape} != im shape {im.shape}")
    if re.shape[axis] != nb:
        raise ShapeError(
            f"irfft: {re.shape[axis]} bins on axis {axis} but source length {n} "
            f"needs {nb}"
        )
    dtype = re.dtype
    y = np.fft.irfft(re.data + 1j * im.data, n=n, axis=axis).astype(dtype, copy=False)

    c = 1.0 / _onesided_weights(n, np.float64)  # 1 at DC/Nyquist, 2 interior
    c_re = _expand(c, re.ndim, axis)
    c_im = c_re.copy()
    idx = [slice(None)] * re.ndim
    idx[axis] = 0
    c_im[tuple(idx)] = 0.0  # imaginary DC/Nyquist parts are ignored by irfft
    if n % 2 == 0:
        idx[axis] = -1
        c_im[tuple(idx)] = 0.0

    def vjp_re(g):
        spec = np.fft.rfft(g, axis=axis)
        return ((c_re / n) * spec.real).astype(dtype, copy=False)

    def vjp_im(g):
        spec = np.fft.rfft(g, axis=axis)
        return ((c_im / n) * spec.imag).astype(dtype, copy=False)

    out = _node(y, (re, im), (vjp_re, vjp_im))
    return out


def to_amp_phase(re: Tensor, im: Tensor, source_length: int, eps: float = EPS_AMP):
    """Decompose (re, im) into a Spectrum of amplitude and phase.

    amplitude = sqrt(re^2 + im^2 + eps^2), phase = atan2(im, re) with the
    gradient denominator floored by the same eps so zero bins stay finite.
    """
    if re.shape != im.shape:
        raise ShapeError(f"to_amp_phase: {re.shape} vs {im.shape}")
    amp = sqrt(mul(re, re) + mul(im, im) + eps * eps)
    phase = atan2(im, re, denom_eps=eps)
    return Spectrum(amplitude=amp, phase=phase, source_length=int(source_length))


def reconstruct(spec: Spectrum, gain: Tensor, shift: Tensor):
    """Gated amplitude / shifted phase reconstruction back to (re, im).

    re = gain*A*cos(shift + P), im = gain*A*sin(shift + P).
    """
    if gain.shape != spec.amplitude.shape or shift.shape != spec.phase.shape:
        raise ShapeError(
            f"reconstruct: gain {gain.shape} / shift {shift.shape} do not match "
            f"spectrum bins {spec.amplitude.shape}"
        )
    scaled = mul(gain, spec.amplitude)
    angle = shift + spec.phase
    return mul(scaled, cos(angle)), mul(scaled, sin(angle))
