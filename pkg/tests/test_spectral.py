import numpy as np
import pytest

from aprnet.spectral import EPS_AMP, Spectrum, irfft, reconstruct, rfft, to_amp_phase
from aprnet.tensor import ShapeError, Tensor

from conftest import fd_grad, rel_err


def dft_onesided(x):
    """Direct O(n^2) one-sided DFT oracle: bin k = sum_t x_t e^{-2pi i k t / n}."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    k = np.arange(n // 2 + 1)[:, None]
    t = np.arange(n)[None, :]
    w = np.exp(-2j * np.pi * k * t / n)
    return w @ x


def idft_onesided(bins, n):
    """Inverse oracle: rebuild the full spectrum by conjugate symmetry, 1/n scale."""
    full = np.zeros(n, dtype=np.complex128)
    nb = n // 2 + 1
    full[:nb] = bins
    for k in range(1, n - nb + 1):
        full[n - k] = np.conj(bins[k])
    t = np.arange(n)[:, None]
    k = np.arange(n)[None, :]
    w = np.exp(2j * np.pi * k * t / n)
    return (w @ full).real / n


def test_rfft_constant_is_dc_only():
    re, im = rfft(Tensor([1.0, 1.0, 1.0, 1.0]), axis=0)
    assert np.allclose(re.data, [4, 0, 0], atol=1e-12)
    assert np.allclose(im.data, [0, 0, 0], atol=1e-12)


def test_rfft_impulse_is_flat():
    re, im = rfft(Tensor([1.0, 0.0, 0.0, 0.0]), axis=0)
    assert np.allclose(re.data, 1.0, atol=1e-12)
    assert np.allclose(im.data, 0.0, atol=1e-12)


def test_rfft_cosine_lands_in_bin_one():
    t = np.arange(8)
    re, im = rfft(Tensor(np.cos(2 * np.pi * t / 8)), axis=0)
    c = re.data + 1j * im.data
    expect = np.zeros(5, dtype=complex)
    expect[1] = 4.0
    assert np.max(np.abs(c - expect)) < 1e-9


def test_rfft_rejects_short_axis():
    with pytest.raises(ValueError):
        rfft(Tensor([1.0]), axis=0)


@pytest.mark.parametrize("n", list(range(2, 65)))
def test_rfft_matches_dft_oracle(n):
    rng = np.random.default_rng(n)
    x = rng.normal(size=n)
    re, im = rfft(Tensor(x), axis=0)
    ref = dft_onesided(x)
    assert np.max(np.abs(re.data + 1j * im.data - ref)) < 1e-9


@pytest.mark.parametrize("n", list(range(2, 65)))
def test_roundtrip_identity(n):
    rng = np.random.default_rng(100 + n)
    x = rng.normal(size=n)
    re, im = rfft(Tensor(x), axis=0)
    back = irfft(re, im, n, axis=0)
    assert np.max(np.abs(back.data - x)) < 1e-10


def test_irfft_zero_spectrum_is_zero_signal():
    z = Tensor(np.zeros(5))
    assert np.allclose(irfft(z, z, 8, axis=0).data, 0.0)


def test_irfft_bin_one_is_cosine():
    re = Tensor(np.array([0.0, 4.0, 0.0, 0.0, 0.0]))
    im = Tensor(np.zeros(5))
    out = irfft(re, im, 8, axis=0)
    expect = idft_onesided(re.data + 1j * im.data, 8)
    t = np.arange(8)
    assert np.max(np.abs(out.data - np.cos(2 * np.pi * t / 8))) < 1e-12
    assert np.max(np.abs(out.data - expect)) < 1e-12


def test_irfft_bin_count_mismatch():
    z = Tensor(np.zeros(4))
    with pytest.raises(ShapeError):
        irfft(z, z, 8, axis=0)


def test_parseval():
    rng = np.random.default_rng(7)
    for n in (8, 9, 16, 31):
        x = rng.normal(size=n)
        re, im = rfft(Tensor(x), axis=0)
        power = re.data**2 + im.data**2
        w = np.full(n // 2 + 1, 2.0)
        w[0] = 1.0
        if n % 2 == 0:
            w[-1] = 1.0
        assert abs((x**2).sum() - (w * power).sum() / n) < 1e-8


def test_linearity():
    rng = np.random.default_rng(8)
    x, y = rng.normal(size=16), rng.normal(size=16)
    a, b = 1.7, -0.3
    re1, im1 = rfft(Tensor(a * x + b * y), axis=0)
    rex, imx = rfft(Tensor(x), axis=0)
    rey, imy = rfft(Tensor(y), axis=0)
    assert np.max(np.abs(re1.data - (a * rex.data + b * rey.data))) < 1e-10
    assert np.max(np.abs(im1.data - (a * imx.data + b * imy.data))) < 1e-10


def test_rfft_gradient_is_linear_adjoint(rng):
    x0 = rng.normal(size=(2, 10))
    w_re = rng.normal(size=(2, 6))
    w_im = rng.normal(size=(2, 6))
    x = Tensor(x0, requires_grad=True)
    re, im = rfft(x, axis=1)
    ((re * w_re).sum() + (im * w_im).sum()).backward()

    def f(v):
        c = np.fft.rfft(v, axis=1)
        return (c.real * w_re).sum() + (c.imag * w_im).sum()

    assert rel_err(x.grad, fd_grad(f, x0)) < 1e-6


def test_irfft_gradient(rng):
    n = 12
    re0 = rng.normal(size=7)
    im0 = rng.normal(size=7)
    w = rng.normal(size=n)
    re = Tensor(re0, requires_grad=True)
    im = Tensor(im0, requires_grad=True)
    (irfft(re, im, n, axis=0) * w).sum().backward()
    fr = fd_grad(lambda v: (np.fft.irfft(v + 1j * im0, n) * w).sum(), re0)
    fi = fd_grad(lambda v: (np.fft.irfft(re0 + 1j * v, n) * w).sum(), im0)
    assert rel_err(re.grad, fr) < 1e-6
    assert rel_err(im.grad, fi, floor=1e-6) < 1e-6


def test_amp_phase_345():
    spec = to_amp_phase(Tensor([3.0]), Tensor([4.0]), source_length=2)
    assert abs(spec.amplitude.data[0] - 5.0) < 1e-9
    assert abs(spec.phase.data[0] - np.arctan2(4.0, 3.0)) < 1e-12


def test_amp_phase_origin():
    spec = to_amp_phase(Tensor([0.0]), Tensor([0.0]), source_length=2)
    assert abs(spec.amplitude.data[0] - EPS_AMP) < 1e-15
    assert spec.phase.data[0] == 0.0


def test_amp_grad_wrt_re():
    re = Tensor([3.0], requires_grad=True)
    spec = to_amp_phase(re, Tensor([4.0]), source_length=2)
    spec.amplitude.sum().backward()
    assert abs(re.grad[0] - 3.0 / 5.0) < 1e-6


def test_real_spectrum_phase_is_zero_or_pi():
    rng = np.random.default_rng(3)
    for n in (8, 9):
        x = rng.normal(size=n)
        re, im = rfft(Tensor(x), axis=0)
        spec = to_amp_phase(re, im, n)
        dc = spec.phase.data[0]
        assert min(abs(dc), abs(abs(dc) - np.pi)) < 1e-9
        if n % 2 == 0:
            ny = spec.phase.data[-1]
            assert min(abs(ny), abs(abs(ny) - np.pi)) < 1e-9


def test_reconstruct_identity():
    rng = np.random.default_rng(4)
    x = rng.normal(size=16)
    re, im = rfft(Tensor(x), axis=0)
    spec = to_amp_phase(re, im, 16)
    ones = Tensor(np.ones(9))
    zeros = Tensor(np.zeros(9))
    r2, i2 = reconstruct(spec, ones, zeros)
    back = irfft(r2, i2, 16, axis=0)
    assert np.max(np.abs(back.data - x)) < 1e-6


def test_reconstruct_zero_gain():
    spec = to_amp_phase(Tensor([1.0, 2.0]), Tensor([0.5, -0.5]), source_length=2)
    r2, i2 = reconstruct(spec, Tensor([0.0, 0.0]), Tensor([0.0, 0.0]))
    assert np.allclose(r2.data, 0.0) and np.allclose(i2.data, 0.0)


def test_reconstruct_pi_shift_negates():
    rng = np.random.default_rng(5)
    x = rng.normal(size=16)
    re, im = rfft(Tensor(x), axis=0)
    spec = to_amp_phase(re, im, 16)
    r2, i2 = reconstruct(spec, Tensor(np.ones(9)), Tensor(np.full(9, np.pi)))
    assert np.max(np.abs(r2.data + re.data)) < 1e-9
    assert np.max(np.abs(i2.data + im.data)) < 1e-9


def test_reconstruct_shape_mismatch():
    spec = to_amp_phase(Tensor([1.0, 2.0]), Tensor([0.0, 0.0]), source_length=2)
    with pytest.raises(ShapeError):
        reconstruct(spec, Tensor([1.0]), Tensor([0.0, 0.0]))
