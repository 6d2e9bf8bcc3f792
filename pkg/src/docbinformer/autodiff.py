"""Reverse-mode automatic differentiation on numpy arrays.

A ``Tensor`` wraps an ndarray plus an optional gradient buffer.  Operations
executed while a ``Tape`` is active append a backward closure to that tape;
``backward`` replays the closures in exact reverse recording order, so two
runs over identical inputs produce bitwise-identical gradients.  Without an
active tape the same functions behave as plain forward numerics.

Every forward op checks its result for NaN/Inf and raises ``NumericsError``
instead of letting non-finite values propagate.

Broadcasting is deliberately narrow: elementwise ops accept equal shapes, a
scalar, or a trailing-shape operand (leading batch dims broadcast); matmul
broadcasts leading batch dims only.  Anything else is a ShapeError.

Two variants of matrix multiplication exist.  ``matmul`` uses BLAS and is the
default.  ``einsum_matmul`` accumulates every output element in the same
index order regardless of its row position, and ``attention_apply`` sums
value rows in attention-weight order; attention layers use these so that
permuting token order permutes outputs bitwise.
"""

from __future__ import annotations

import math
import threading

import numpy as np
from scipy.special import erf as _erf, expit as _expit

from .errors import ConfigError, NumericsError, ShapeError

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class Tensor:
    """An ndarray with an optional same-shaped gradient buffer.

    Tensors with ``requires_grad=True`` allocate a zero gradient buffer at
    construction, so an unused input reports an all-zero gradient rather
    than None after backward.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(arr) if requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0.0

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return slice_(self, key)


class Tape:
    """Ordered record of differentiable operations.

    Used as a context manager; ops executed inside the block are recorded.
    A tape is confined to the thread that created it.  Backward replays the
    records strictly last-to-first.
    """

    def __init__(self):
        self._records = []

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _tape_stack().pop()
        return False

    def record(self, backward_fn):
        self._records.append(backward_fn)

    def __len__(self):
        return len(self._records)

    def backward(self, loss: Tensor):
        backward(loss, self)


_TLS = threading.local()


def _tape_stack():
    stack = getattr(_TLS, "stack", None)
    if stack is None:
        stack = []
        _TLS.stack = stack
    return stack


def active_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


def backward(loss: Tensor, tape: Tape):
    """Seed d(loss)/d(loss)=1 and replay the tape in reverse order."""
    if loss.size != 1:
        raise ValueError(
            f"backward requires a scalar loss, got shape {loss.shape}"
        )
    if not loss.requires_grad:
        raise ValueError("backward requires a loss that participates in the tape")
    loss.grad += 1.0
    for record in reversed(tape._records):
        record()


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x))


def _finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericsError(f"non-finite values produced by {op}")
    return arr


def _make(data, op: str, inputs, backward_fn):
    """Wrap op output; record the backward closure if a tape is active."""
    data = _finite(data, op)
    tape = active_tape()
    needs = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs)
    if needs:
        tape.record(lambda: backward_fn(out.grad))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to the shape the operand actually had."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check_elementwise_shapes(a: Tensor, b: Tensor, op: str):
    # Equal shapes, a scalar, or one shape a suffix of the other
    # (optionally with leading size-1 dims). Nothing fancier.
    sa, sb = a.shape, b.shape
    if sa == sb or a.size == 1 or b.size == 1:
        return
    small, big = (sa, sb) if len(sa) <= len(sb) else (sb, sa)
    tail = big[len(big) - len(small):]
    if all(m == n or m == 1 for m, n in zip(small, tail)):
        return
    raise ShapeError(f"{op}: incompatible shapes {sa} and {sb}")


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_elementwise_shapes(a, b, "add")
    data = a.data + b.data

    def back(g):
        if a.requires_grad:
            a.grad += _unbroadcast(g, a.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(g, b.shape)

    return _make(data, "add", (a, b), back)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_elementwise_shapes(a, b, "sub")
    data = a.data - b.data

    def back(g):
        if a.requires_grad:
            a.grad += _unbroadcast(g, a.shape)
        if b.requires_grad:
            b.grad -= _unbroadcast(g, b.shape)

    return _make(data, "sub", (a, b), back)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_elementwise_shapes(a, b, "mul")
    data = a.data * b.data
    a_data, b_data = a.data, b.data

    def back(g):
        if a.requires_grad:
            a.grad += _unbroadcast(g * b_data, a.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(g * a_data, b.shape)

    return _make(data, "mul", (a, b), back)


def scale(x, c: float) -> Tensor:
    """Multiply by a python scalar constant."""
    x = _as_tensor(x)
    c = float(c)
    data = x.data * c

    def back(g):
        if x.requires_grad:
            x.grad += g * c

    return _make(data, "scale", (x,), back)


def _check_matmul_shapes(a: Tensor, b: Tensor, op: str):
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"{op}: operands must be at least 2-D, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"{op}: inner dimensions differ, {a.shape} vs {b.shape}")
    la, lb = a.shape[:-2], b.shape[:-2]
    n = min(len(la), len(lb))
    for m, k in zip(la[len(la) - n:], lb[len(lb) - n:]):
        if m != k and m != 1 and k != 1:
            raise ShapeError(f"{op}: batch dimensions differ, {a.shape} vs {b.shape}")


def _swap(x: np.ndarray) -> np.ndarray:
    return np.swapaxes(x, -1, -2)


def _matmul_backward(a: Tensor, b: Tensor):
    a_data, b_data = a.data, b.data

    def back(g):
        if a.requires_grad:
            a.grad += _unbroadcast(np.matmul(g, _swap(b_data)), a.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(np.matmul(_swap(a_data), g), b.shape)

    return back


def matmul(a, b) -> Tensor:
    """Batched matrix product via BLAS; leading batch dims broadcast."""
    a, b = _as_tensor(a), _as_tensor(b)
    _check_matmul_shapes(a, b, "matmul")
    data = np.matmul(a.data, b.data)
    return _make(data, "matmul", (a, b), _matmul_backward(a, b))


def einsum_matmul(a, b) -> Tensor:
    """Matrix product whose per-element accumulation order is independent of
    row position, so row-permuted inputs give bitwise row-permuted outputs.

    Slower than ``matmul``; attention layers use it for the projections and
    score products that must commute exactly with token permutation.
    """
    a, b = _as_tensor(a), _as_tensor(b)
    _check_matmul_shapes(a, b, "einsum_matmul")
    data = np.einsum("...ik,...kj->...ij", a.data, b.data, optimize=False)
    return _make(data, "einsum_matmul", (a, b), _matmul_backward(a, b))


def attention_apply(weights, values) -> Tensor:
    """Weighted sum of value rows, accumulated in ascending weight order.

    Computes ``weights @ values`` where ``weights`` is (..., q, n) and
    ``values`` is (..., n, d).  Because each output row adds its terms in
    sorted-weight order rather than token order, the result is exactly
    invariant to a shared permutation of the token axis (up to ties between
    equal weights).  Backward uses plain matmul rules.
    """
    w, v = _as_tensor(weights), _as_tensor(values)
    _check_matmul_shapes(w, v, "attention_apply")
    if w.shape[:-2] != v.shape[:-2]:
        raise ShapeError(
            f"attention_apply: batch dimensions differ, {w.shape} vs {v.shape}"
        )
    n = w.shape[-1]
    order = np.argsort(w.data, axis=-1)
    w_sorted = np.take_along_axis(w.data, order, axis=-1)
    out = np.zeros(w.shape[:-1] + (v.shape[-1],), dtype=np.result_type(w.data, v.data))
    for j in range(n):
        rows = np.take_along_axis(v.data, order[..., j, None], axis=-2)
        out += w_sorted[..., j, None] * rows
    return _make(out, "attention_apply", (w, v), _matmul_backward(w, v))


def softmax(x, axis: int = -1) -> Tensor:
    """Softmax along ``axis`` with a value-canonical denominator.

    The max shift makes it overflow-safe, and summing the exponentials in
    sorted order makes each row's result independent of element order.
    """
    x = _as_tensor(x)
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    denom = np.sum(np.sort(e, axis=axis), axis=axis, keepdims=True)
    y = e / denom

    def back(g):
        if x.requires_grad:
            inner = np.sum(g * y, axis=axis, keepdims=True)
            x.grad += (g - inner) * y

    return _make(y, "softmax", (x,), back)


def layer_norm(x, gamma, beta, eps: float = 1e-6) -> Tensor:
    """Normalize the last axis to zero mean and unit variance, then apply
    the learned affine ``gamma * xhat + beta``."""
    if eps <= 0:
        raise ConfigError(f"layer_norm eps must be positive, got {eps}")
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(
            f"layer_norm: gamma/beta shapes {gamma.shape}/{beta.shape} "
            f"do not match feature dim {d}"
        )
    mu = np.mean(x.data, axis=-1, keepdims=True)
    centered = x.data - mu
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    y = xhat * gamma.data + beta.data
    gamma_data = gamma.data

    def back(g):
        if gamma.requires_grad:
            gamma.grad += np.sum(g * xhat, axis=tuple(range(g.ndim - 1)))
        if beta.requires_grad:
            beta.grad += np.sum(g, axis=tuple(range(g.ndim - 1)))
        if x.requires_grad:
            dxhat = g * gamma_data
            mean_dxhat = np.mean(dxhat, axis=-1, keepdims=True)
            mean_dxhat_xhat = np.mean(dxhat * xhat, axis=-1, keepdims=True)
            x.grad += inv_std * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)

    return _make(y, "layer_norm", (x, gamma, beta), back)


def gelu(x) -> Tensor:
    """Exact-erf GELU: 0.5 * x * (1 + erf(x / sqrt(2)))."""
    x = _as_tensor(x)
    cdf = 0.5 * (1.0 + _erf(x.data * _INV_SQRT2))
    y = x.data * cdf
    x_data = x.data

    def back(g):
        if x.requires_grad:
            pdf = np.exp(-0.5 * x_data * x_data) * _INV_SQRT_2PI
            x.grad += g * (cdf + x_data * pdf)

    return _make(y, "gelu", (x,), back)


def logistic(x) -> Tensor:
    """Numerically stable sigmoid 1 / (1 + exp(-x))."""
    x = _as_tensor(x)
    y = _expit(x.data)

    def back(g):
        if x.requires_grad:
            x.grad += g * y * (1.0 - y)

    return _make(y, "logistic", (x,), back)


def reshape(x, shape) -> Tensor:
    x = _as_tensor(x)
    old = x.shape
    try:
        data = np.reshape(x.data, shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot view {old} as {shape}") from exc

    def back(g):
        if x.requires_grad:
            x.grad += np.reshape(g, old)

    return _make(data, "reshape", (x,), back)


def transpose(x, axes=None) -> Tensor:
    x = _as_tensor(x)
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeError(f"transpose: {axes} is not a permutation of axes for shape {x.shape}")
    data = np.transpose(x.data, axes)
    inverse = tuple(np.argsort(axes))

    def back(g):
        if x.requires_grad:
            x.grad += np.transpose(g, inverse)

    return _make(data, "transpose", (x,), back)


def concat(tensors, axis: int = 0) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat: need at least one tensor")
    try:
        data = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as exc:
        raise ShapeError(
            f"concat: incompatible shapes {[t.shape for t in ts]} on axis {axis}"
        ) from exc
    sizes = [t.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        pieces = np.split(g, splits, axis=axis)
        for t, piece in zip(ts, pieces):
            if t.requires_grad:
                t.grad += piece

    return _make(data, "concat", ts, back)


def slice_(x, key) -> Tensor:
    x = _as_tensor(x)
    data = x.data[key]

    def back(g):
        if x.requires_grad:
            np.add.at(x.grad, key, g)

    return _make(data, "slice", (x,), back)


def sum_(x, axis=None, keepdims: bool = False) -> Tensor:
    x = _as_tensor(x)
    data = np.sum(x.data, axis=axis, keepdims=keepdims)
    shape = x.shape

    def back(g):
        if x.requires_grad:
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            x.grad += np.broadcast_to(g, shape)

    return _make(data, "sum", (x,), back)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = _as_tensor(x)
    data = np.mean(x.data, axis=axis, keepdims=keepdims)
    count = x.size if axis is None else np.prod(
        [x.shape[a] for a in (axis if isinstance(axis, tuple) else (axis,))]
    )
    shape = x.shape

    def back(g):
        if x.requires_grad:
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            x.grad += np.broadcast_to(g, shape) / count

    return _make(data, "mean", (x,), back)


def square(x) -> Tensor:
    x = _as_tensor(x)
    data = x.data * x.data
    x_data = x.data

    def back(g):
        if x.requires_grad:
            x.grad += 2.0 * x_data * g

    return _make(data, "square", (x,), back)
