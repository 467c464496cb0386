"""numpy-backed dense tensors with reverse-mode automatic differentiation.

Every differentiable op records its parent tensors together with one
vector-Jacobian closure per parent; ``backward()`` replays those records in
reverse topological order.  Storage is row-major and contiguous; transposes
and reshapes materialize copies.  Two float widths are supported (float32
for training, float64 for gradient checking), selected per tensor.
"""
from __future__ import annotations

import contextlib

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested op."""


_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (evaluation-only forwards)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _as_array(x, dtype=None):
    arr = np.asarray(x)
    if dtype is not None:
        arr = arr.astype(dtype, copy=False)
    elif arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    return arr


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjps")

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = _as_array(data, dtype)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._vjps = ()

    # ------------------------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(-1)[0])

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

    # ------------------------------------------------------------------
    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into every requires_grad leaf's .grad.

        ``self`` must hold a single element.  Repeated calls without
        ``zero_grad`` accumulate additively.
        """
        if self.data.size != 1:
            raise ValueError(
                f"backward requires a scalar loss, got shape {self.data.shape}"
            )
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))

        seed = np.ones_like(self.data) if grad is None else _as_array(grad, self.dtype)
        grads = {id(self): seed}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, vjp in zip(node._parents, node._vjps):
                contrib = vjp(g)
                acc = grads.get(id(parent))
                grads[id(parent)] = contrib if acc is None else acc + contrib

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_coerce(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_coerce(other, self.dtype), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)

    def var(self, axis=None, keepdims=False):
        return reduce_var(self, axis, keepdims)

    def transpose(self, perm):
        return transpose_axes(self, perm)

    def reshape(self, shape):
        return reshape(self, shape)


def _coerce(x, dtype):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _node(data, parents, vjps):
    """Build an op-output tensor, recording only grad-requiring parents."""
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        kept = [(p, v) for p, v in zip(parents, vjps) if p.requires_grad]
        out.requires_grad = True
        out._parents = tuple(p for p, _ in kept)
        out._vjps = tuple(v for _, v in kept)
    else:
        out.requires_grad = False
        out._parents = ()
        out._vjps = ()
    return out


def _unbroadcast(g, shape):
    """Sum g over the axes that were broadcast to reach g.shape from shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _check_broadcast(a, b, opname):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(
            f"{opname}: shapes {a.shape} and {b.shape} do not broadcast"
        ) from None


# ----------------------------------------------------------------------
# binary elementwise
def add(a, b):
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = _coerce(b, a.dtype)
    _check_broadcast(a, b, "add")
    return _node(
        a.data + b.data,
        (a, b),
        (lambda g: _unbroadcast(g, a.shape), lambda g: _unbroadcast(g, b.shape)),
    )


def sub(a, b):
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = _coerce(b, a.dtype)
    _check_broadcast(a, b, "sub")
    return _node(
        a.data - b.data,
        (a, b),
        (lambda g: _unbroadcast(g, a.shape), lambda g: _unbroadcast(-g, b.shape)),
    )


def mul(a, b):
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = _coerce(b, a.dtype)
    _check_broadcast(a, b, "mul")
    return _node(
        a.data * b.data,
        (a, b),
        (
            lambda g: _unbroadcast(g * b.data, a.shape),
            lambda g: _unbroadcast(g * a.data, b.shape),
        ),
    )


def div(a, b):
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = _coerce(b, a.dtype)
    _check_broadcast(a, b, "div")
    out = a.data / b.data
    return _node(
        out,
        (a, b),
        (
            lambda g: _unbroadcast(g / b.data, a.shape),
            lambda g: _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        ),
    )


# -- unary elementwise ---------------------------------------------------
def neg(a):
    return _node(-a.data, (a,), (lambda g: -g,))


def power(a, p):
    p = float(p)
    out = a.data**p
    return _node(out, (a,), (lambda g: g * p * a.data ** (p - 1.0),))


def sqrt(a):
    out = np.sqrt(a.data)
    return _node(out, (a,), (lambda g: g * 0.5 / out,))


def reciprocal(a):
    out = 1.0 / a.data
    return _node(out, (a,), (lambda g: -g * out * out,))


def exp(a):
    out = np.exp(a.data)
    return _node(out, (a,), (lambda g: g * out,))


def log(a):
    return _node(np.log(a.data), (a,), (lambda g: g / a.data,))


def absolute(a):
    return _node(np.abs(a.data), (a,), (lambda g: g * np.sign(a.data),))


def sigmoid(a):
    # stable piecewise evaluation
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _node(out, (a,), (lambda g: g * out * (1.0 - out),))


def tanh(a):
    out = np.tanh(a.data)
    return _node(out, (a,), (lambda g: g * (1.0 - out * out),))


def silu(a):
    s = 1.0 / (1.0 + np.exp(-np.clip(a.data, -60, 60)))
    out = a.data * s
    return _node(out, (a,), (lambda g: g * (s + a.data * s * (1.0 - s)),))


def cos(a):
    return _node(np.cos(a.data), (a,), (lambda g: -g * np.sin(a.data),))


def sin(a):
    return _node(np.sin(a.data), (a,), (lambda g: g * np.cos(a.data),))


def atan2(y, x, denom_eps=0.0):
    """Elementwise atan2(y, x); gradient denominator floored by denom_eps**2."""
    _check_broadcast(y, x, "atan2")
    out = np.arctan2(y.data, x.data)
    denom = y.data * y.data + x.data * x.data + denom_eps * denom_eps
    return _node(
        out,
        (y, x),
        (
            lambda g: _unbroadcast(g * x.data / denom, y.shape),
            lambda g: _unbroadcast(-g * y.data / denom, x.shape),
        ),
    )


# -- matmul --------------------------------------------------------------
def matmul(a, b):
    """a @ b with a of rank >= 2 (leading axes batched) and b of rank 2."""
    if a.ndim < 2 or b.ndim != 2:
        raise ShapeError(f"matmul: need rank>=2 @ rank-2, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(
            f"matmul: inner extents differ for {a.shape} @ {b.shape}"
        )
    lead = a.shape[:-1]
    a2 = a.data.reshape(-1, a.shape[-1])
    out = (a2 @ b.data).reshape(*lead, b.shape[1])

    def vjp_a(g):
        return (g.reshape(-1, b.shape[1]) @ b.data.T).reshape(a.shape)

    def vjp_b(g):
        return a2.T @ g.reshape(-1, b.shape[1])

    return _node(out, (a, b), (vjp_a, vjp_b))


# -- reductions ----------------------------------------------------------
def _norm_axis(axis, ndim):
    if axis is None:
        return None
    if isinstance(axis, (tuple, list)):
        return tuple(_norm_axis(ax, ndim) for ax in axis)
    ax = int(axis)
    if ax < 0:
        ax += ndim
    if not 0 <= ax < ndim:
        raise IndexError(f"axis {axis} out of range for rank {ndim}")
    return ax


def reduce_sum(a, axis=None, keepdims=False):
    axis = _norm_axis(axis, a.ndim)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return np.full(a.shape, g if np.ndim(g) == 0 else g.reshape(()), a.dtype)
        gg = g
        if not keepdims:
            gg = np.expand_dims(gg, axis)
        return np.broadcast_to(gg, a.shape).astype(a.dtype, copy=False)

    return _node(np.asarray(out), (a,), (vjp,))


def reduce_mean(a, axis=None, keepdims=False):
    naxis = _norm_axis(axis, a.ndim)
    if naxis is None:
        count = a.size
    elif isinstance(naxis, tuple):
        count = int(np.prod([a.shape[ax] for ax in naxis]))
    else:
        count = a.shape[naxis]
    return reduce_sum(a, axis, keepdims) * (1.0 / count)


def reduce_var(a, axis=None, keepdims=False):
    """Biased (divide-by-n) variance, composed from primitives."""
    m = reduce_mean(a, axis, keepdims=True)
    d = sub(a, m)
    out = reduce_mean(mul(d, d), axis, keepdims)
    return out


# -- shape ops -----------------------------------------------------------
def transpose_axes(a, perm):
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != list(range(a.ndim)):
        raise ValueError(f"invalid permutation {perm} for rank {a.ndim}")
    inv = np.argsort(perm)
    return _node(
        np.ascontiguousarray(a.data.transpose(perm)),
        (a,),
        (lambda g: np.ascontiguousarray(g.transpose(inv)),),
    )


def reshape(a, shape):
    shape = tuple(shape)
    return _node(a.data.reshape(shape), (a,), (lambda g: g.reshape(a.shape),))


def softmax(a, axis=-1):
    m = Tensor(a.data.max(axis=axis, keepdims=True))  # constant shift
    e = exp(sub(a, m))
    return div(e, reduce_sum(e, axis, keepdims=True))


# -- spec-surface dispatchers -------------------------------------------
_ELEMENTWISE = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "cos": cos,
    "sin": sin,
    "sqrt": sqrt,
    "reciprocal": reciprocal,
}

_REDUCE = {"mean": reduce_mean, "sum": reduce_sum, "var": reduce_var}


def elementwise(kind, a, b=None):
    fn = _ELEMENTWISE.get(kind)
    if fn is None:
        raise ValueError(f"unknown elementwise kind {kind!r}")
    if kind in ("add", "sub", "mul"):
        if b is None:
            raise ValueError(f"{kind} needs two operands")
        return fn(a, b)
    if b is not None:
        raise ValueError(f"{kind} takes one operand")
    return fn(a)


def reduce(kind, a, axis=None, keepdims=False):
    fn = _REDUCE.get(kind)
    if fn is None:
        raise ValueError(f"unknown reduce kind {kind!r}")
    return fn(a, axis, keepdims)
