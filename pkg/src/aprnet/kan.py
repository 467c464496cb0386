"""B-spline bases and the KAN linear layer, plus the linear and conv1d
drop-in cores used by the layer-swap ablation.

Bases are evaluated with the iterative Cox-de Boor recurrence over a uniform
padded knot vector; the derivative w.r.t. the input reuses the degree-(d-1)
bases, so the whole basis evaluation is a single tape node.
"""
from __future__ import annotations

import numpy as np

from .tensor import ShapeError, Tensor, _node, matmul, silu, tanh

try:
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional speedup
    _HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


class SplineGrid:
    """Uniform knot grid on [lo, hi]: `intervals` interior intervals plus
    degree-deep padding on both sides.  num_basis = intervals + degree."""

    def __init__(self, lo=-1.0, hi=1.0, intervals=5, degree=3):
        if hi <= lo:
            raise ValueError(f"grid range [{lo}, {hi}] is empty")
        if intervals < 1 or degree < 0:
            raise ValueError("need intervals >= 1 and degree >= 0")
        self.lo = float(lo)
        self.hi = float(hi)
        self.intervals = int(intervals)
        self.degree = int(degree)
        h = (self.hi - self.lo) / self.intervals
        self.knots = self.lo + h * np.arange(
            -self.degree, self.intervals + self.degree + 1, dtype=np.float64
        )
        #: incremented whenever an input falls outside [lo, hi]
        self.out_of_range_count = 0

    @property
    def num_basis(self):
        return self.intervals + self.degree


@njit(cache=True, fastmath=True)
def _bases_kernel(u, knots, degree, intervals, lo, hi, step, b_out, db_out):
    """Local-support Cox-de Boor evaluation over a uniform padded knot grid.

    Writes the d+1 nonzero degree-d bases (and their x-derivatives) of each
    point into dense rows of b_out/db_out; out-of-range points stay zero.
    Returns the number of out-of-range points.  Uniform spacing makes every
    level-k denominator equal to k*step, so the inner loop is division-free.
    """
    d = degree
    n = u.shape[0]
    inv_step = 1.0 / step
    out_count = 0
    work = np.empty(d + 1, dtype=u.dtype)
    lower = np.empty(d + 1, dtype=u.dtype)
    left = np.empty(d + 1, dtype=u.dtype)
    right = np.empty(d + 1, dtype=u.dtype)
    for i in range(n):
        x = u[i]
        if x < lo or x > hi:
            out_count += 1
            continue
        span = d + int((x - lo) * inv_step)
        if span > d + intervals - 1:
            span = d + intervals - 1
        work[0] = 1.0
        for j in range(1, d + 1):
            left[j] = x - knots[span + 1 - j]
            right[j] = knots[span + j] - x
        for k in range(1, d + 1):
            if k == d:
                for j in range(k):
                    lower[j] = work[j]
            inv_den = inv_step / k
            saved = 0.0
            for j in range(k):
                temp = work[j] * inv_den
                work[j] = saved + right[j + 1] * temp
                saved = left[k - j] * temp
            work[k] = saved
        base_col = span - d
        for j in range(d + 1):
            b_out[i, base_col + j] = work[j]
        if d >= 1:
            # degree-(d-1) bases in `lower` cover columns span-d+1 .. span;
            # with uniform knots dB_col = (L_{col-1-base} - L_{col-base})/step
            for j in range(d + 1):
                acc = 0.0
                if 1 <= j:
                    acc += lower[j - 1]
                if j < d:
                    acc -= lower[j]
                db_out[i, base_col + j] = acc * inv_step
    return out_count


def _bases_local(u, grid: SplineGrid):
    flat = np.ascontiguousarray(u.reshape(-1))
    knots = grid.knots.astype(flat.dtype)
    b = np.zeros((flat.size, grid.num_basis), dtype=flat.dtype)
    db = np.zeros_like(b)
    step = (grid.hi - grid.lo) / grid.intervals
    out = _bases_kernel(
        flat, knots, grid.degree, grid.intervals, flat.dtype.type(grid.lo),
        flat.dtype.type(grid.hi), flat.dtype.type(step), b, db,
    )
    grid.out_of_range_count += int(out)
    shape = u.shape + (grid.num_basis,)
    return b.reshape(shape), db.reshape(shape)


def _bases_np(u, grid: SplineGrid):
    """Return (bases[..., num_basis], dbases[..., num_basis]) at points u."""
    t = grid.knots.astype(u.dtype, copy=False)
    d = grid.degree
    x = u[..., None]
    b = ((x >= t[:-1]) & (x < t[1:])).astype(u.dtype)
    # close the right endpoint: hi belongs to the interval ending at hi
    at_hi = u == grid.hi
    if np.any(at_hi):
        b[at_hi, :] = 0.0
        b[at_hi, grid.degree + grid.intervals - 1] = 1.0
    bprev = b
    for k in range(1, d + 1):
        left = (x - t[: -(k + 1)]) / (t[k:-1] - t[: -(k + 1)]) * b[..., :-1]
        right = (t[k + 1 :] - x) / (t[k + 1 :] - t[1:-k]) * b[..., 1:]
        bprev = b
        b = left + right
    if d == 0:
        db = np.zeros_like(b)
    else:
        inv1 = d / (t[d:-1] - t[: -(d + 1)])
        inv2 = d / (t[d + 1 :] - t[1:-d])
        db = bprev[..., :-1] * inv1 - bprev[..., 1:] * inv2
    out_mask = (u < grid.lo) | (u > grid.hi)
    if np.any(out_mask):
        grid.out_of_range_count += int(out_mask.sum())
        b = np.where(out_mask[..., None], 0.0, b)
        db = np.where(out_mask[..., None], 0.0, db)
    return b, db


def bspline_basis(x: Tensor, grid: SplineGrid) -> Tensor:
    """All B-spline bases at each element of x; output shape x.shape + (num_basis,)."""
    if _HAVE_NUMBA:
        b, db = _bases_local(x.data, grid)
    else:
        b, db = _bases_np(x.data, grid)

    def vjp(g):
        return (g * db).sum(axis=-1)

    return _node(b, (x,), (vjp,))


def conv1d_same(x: Tensor, kernel: Tensor) -> Tensor:
    """Same-padded 1-D convolution along the last axis with a shared kernel."""
    kw = kernel.shape[0]
    if kernel.ndim != 1 or kw % 2 == 0:
        raise ValueError(f"conv1d kernel must be rank-1 with odd width, got {kernel.shape}")
    n = x.shape[-1]
    p = (kw - 1) // 2
    pad = [(0, 0)] * (x.ndim - 1) + [(p, p)]
    xp = np.pad(x.data, pad)
    win = np.lib.stride_tricks.sliding_window_view(xp, kw, axis=-1)
    out = win @ kernel.data

    def vjp_x(g):
        gp = np.pad(g, [(0, 0)] * (g.ndim - 1) + [(kw - 1, kw - 1)])
        gw = np.lib.stride_tricks.sliding_window_view(gp, kw, axis=-1)
        grad_xp = gw @ kernel.data[::-1].copy()
        return grad_xp[..., p : p + n]

    def vjp_k(g):
        return (win * g[..., None]).reshape(-1, kw).sum(axis=0)

    return _node(out, (x, kernel), (vjp_x, vjp_k))


def _uniform_init(rng, shape, fan_in, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class LinearLayer:
    """Affine map along the last axis."""

    def __init__(self, in_dim, out_dim, rng=None, dtype=np.float32):
        rng = rng or np.random.default_rng(0)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = Tensor(_uniform_init(rng, (in_dim, out_dim), in_dim, dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim, dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"linear: input last axis {x.shape[-1]} != in_dim {self.in_dim}")
        return matmul(x, self.weight) + self.bias

    def parameters(self):
        return {"weight": self.weight, "bias": self.bias}


class KanLayer:
    """KAN layer: out_j = sum_i [ sum_k c_jik B_k(x_i) + w_ji silu(x_i) ] + b_j.

    Inputs are squashed by tanh to the grid range before basis evaluation
    (disable with squash=False); the silu residual path can be disabled for
    a pure-spline layer.
    """

    def __init__(
        self,
        in_dim,
        out_dim,
        grid: SplineGrid | None = None,
        squash=True,
        residual=True,
        rng=None,
        dtype=np.float32,
    ):
        rng = rng or np.random.default_rng(0)
        if grid is None:
            grid = SplineGrid()
        if grid.degree < 1:
            raise ValueError("KanLayer needs spline degree >= 1")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.grid = grid
        self.squash = squash
        self.residual = residual
        nb = grid.num_basis
        self.coeffs = Tensor(
            (rng.normal(size=(out_dim, in_dim, nb)) * 0.1).astype(dtype),
            requires_grad=True,
        )
        self.residual_weight = Tensor(
            _uniform_init(rng, (out_dim, in_dim), in_dim, dtype), requires_grad=True
        )
        self.bias = Tensor(np.zeros(out_dim, dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"kan: input last axis {x.shape[-1]} != in_dim {self.in_dim}")
        u = tanh(x) if self.squash else x
        bases = bspline_basis(u, self.grid)  # [..., in_dim, nb]
        lead = x.shape[:-1]
        nb = self.grid.num_basis
        flat = bases.reshape((*lead, self.in_dim * nb))
        wc = self.coeffs.transpose((1, 2, 0)).reshape((self.in_dim * nb, self.out_dim))
        y = matmul(flat, wc)
        if self.residual:
            y = y + matmul(silu(x), self.residual_weight.transpose((1, 0)))
        return y + self.bias

    def parameters(self):
        params = {"coeffs": self.coeffs, "bias": self.bias}
        if self.residual:
            params["residual_weight"] = self.residual_weight
        return params


class Conv1dLayer:
    """Channel-preserving 1-D convolution along the last axis, then affine."""

    def __init__(self, in_dim, out_dim, kernel_size=3, rng=None, dtype=np.float32):
        if kernel_size % 2 == 0:
            raise ValueError(f"conv1d kernel width must be odd, got {kernel_size}")
        rng = rng or np.random.default_rng(0)
        self.in_dim = in_dim
        self.out_dim = out_dim
        k = np.zeros(kernel_size, dtype=dtype)
        k[kernel_size // 2] = 1.0  # start as identity along the axis
        self.kernel = Tensor(k, requires_grad=True)
        self.weight = Tensor(_uniform_init(rng, (in_dim, out_dim), in_dim, dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim, dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"conv1d: input last axis {x.shape[-1]} != in_dim {self.in_dim}")
        return matmul(conv1d_same(x, self.kernel), self.weight) + self.bias

    def parameters(self):
        return {"kernel": self.kernel, "weight": self.weight, "bias": self.bias}


CORE_KINDS = ("kan", "linear", "conv1d")


def swap_core(kind, in_dim, out_dim, rng=None, dtype=np.float32, **options):
    """Construct an interchangeable core layer of the given kind."""
    if kind == "kan":
        return KanLayer(in_dim, out_dim, rng=rng, dtype=dtype, **options)
    if kind == "linear":
        return LinearLayer(in_dim, out_dim, rng=rng, dtype=dtype)
    if kind == "conv1d":
        return Conv1dLayer(in_dim, out_dim, rng=rng, dtype=dtype, **options)
    raise ValueError(f"unknown core kind {kind!r}; expected one of {CORE_KINDS}")
