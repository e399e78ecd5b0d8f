"""Reverse-mode autodiff on numpy arrays.

Small tape-based design: each operation returns a new Tensor holding a
backward closure over its parents. Only the layers this project needs
exist (dense, SAME-padded conv and transposed conv, relu, log-softmax,
reductions). Float32 is the training dtype; tests and gradient checks
switch the default to float64.
"""

from __future__ import annotations

import contextlib
import math

import numpy as np

from .. import kernels

_default_dtype = np.float32
_grad_enabled = True
_check_finite = False


def set_default_dtype(dtype):
    global _default_dtype
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {dtype}")
    _default_dtype = dtype


def default_dtype():
    return _default_dtype


def set_check_finite(on: bool):
    """Verify every op output is finite (slow; used by the test suite)."""
    global _check_finite
    _check_finite = on


@contextlib.contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


@contextlib.contextmanager
def test_dtype(dtype=np.float64):
    """Temporarily switch the default dtype (gradient checks run at 64-bit)."""
    global _default_dtype
    prev = _default_dtype
    _default_dtype = dtype
    try:
        yield
    finally:
        _default_dtype = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        if not isinstance(data, np.ndarray):
            data = np.asarray(data, dtype=_default_dtype)
        self.data = data
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        if _check_finite and not np.all(np.isfinite(data)):
            raise FloatingPointError("non-finite values in tensor")

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.requires_grad})"

    def __float__(self):
        if self.data.size != 1:
            raise ValueError(f"cannot convert tensor of shape {self.data.shape} to float")
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def reshape(self, *shape) -> "Tensor":
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def sum(self, axis=None, keepdims=False) -> "Tensor":
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False) -> "Tensor":
        return tmean(self, axis, keepdims)

    # arithmetic
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -other)

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division is not supported; multiply by a reciprocal")
        return mul(self, 1.0 / other)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(value, like: Tensor | None = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.data.dtype if like is not None else _default_dtype
    return Tensor(np.asarray(value, dtype=dtype))


def _make(data, parents, backward):
    track = _grad_enabled and any(p.requires_grad for p in parents)
    if not track:
        return Tensor(data)
    return Tensor(data, requires_grad=True, _parents=parents, _backward=backward)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcasted gradient back to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


def _accum(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = np.array(np.broadcast_to(g, t.data.shape), dtype=t.data.dtype)
    else:
        t.grad += g


def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)

    def bwd(out):
        if a.requires_grad:
            _accum(a, _unbroadcast(out.grad, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(out.grad, b.data.shape))

    return _make(a.data + b.data, (a, b), bwd)


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)

    def bwd(out):
        if a.requires_grad:
            _accum(a, _unbroadcast(out.grad * b.data, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(out.grad * a.data, b.data.shape))

    return _make(a.data * b.data, (a, b), bwd)


def matmul(a: Tensor, w: Tensor) -> Tensor:
    if a.data.shape[-1] != w.data.shape[0]:
        raise ValueError(f"matmul: inner dims differ, {a.data.shape} @ {w.data.shape}")

    def bwd(out):
        g = out.grad
        if a.requires_grad:
            _accum(a, g @ w.data.T)
        if w.requires_grad:
            ad = a.data if a.data.ndim > 1 else a.data[None, :]
            gd = g if g.ndim > 1 else g[None, :]
            _accum(w, ad.T @ gd)

    return _make(a.data @ w.data, (a, w), bwd)


def relu(x: Tensor) -> Tensor:
    def bwd(out):
        if x.requires_grad:
            _accum(x, out.grad * (x.data > 0))

    return _make(np.maximum(x.data, 0), (x,), bwd)


def texp(x: Tensor) -> Tensor:
    y = np.exp(x.data)

    def bwd(out):
        if x.requires_grad:
            _accum(x, out.grad * y)

    return _make(y, (x,), bwd)


def reshape(x: Tensor, shape) -> Tensor:
    def bwd(out):
        if x.requires_grad:
            _accum(x, out.grad.reshape(x.data.shape))

    return _make(x.data.reshape(shape), (x,), bwd)


def tsum(x: Tensor, axis=None, keepdims=False) -> Tensor:
    def bwd(out):
        if not x.requires_grad:
            return
        g = out.grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(x, np.broadcast_to(g, x.data.shape).copy())

    return _make(x.data.sum(axis=axis, keepdims=keepdims), (x,), bwd)


def tmean(x: Tensor, axis=None, keepdims=False) -> Tensor:
    n = x.data.size if axis is None else x.data.shape[axis]
    return mul(tsum(x, axis, keepdims), 1.0 / n)


def square(x: Tensor) -> Tensor:
    return mul(x, x)


def log_softmax(x: Tensor) -> Tensor:
    """Numerically stable log-softmax over the last axis."""
    m = x.data.max(axis=-1, keepdims=True)
    z = x.data - m
    ls = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))

    def bwd(out):
        if x.requires_grad:
            g = out.grad
            _accum(x, g - np.exp(ls) * g.sum(axis=-1, keepdims=True))

    return _make(ls, (x,), bwd)


def gather_rows(x: Tensor, idx) -> Tensor:
    """y[i] = x[i, idx[i]] for a 2-D tensor."""
    idx = np.asarray(idx, dtype=np.int64)
    rows = np.arange(x.data.shape[0])

    def bwd(out):
        if x.requires_grad:
            g = np.zeros_like(x.data)
            np.add.at(g, (rows, idx), out.grad)
            _accum(x, g)

    return _make(x.data[rows, idx], (x,), bwd)


def _batched(x: Tensor):
    if x.data.ndim == 3:
        return reshape(x, (1,) + x.data.shape), True
    if x.data.ndim == 4:
        return x, False
    raise ValueError(f"conv2d expects a [H,W,C] or [B,H,W,C] input, got {x.data.shape}")


def conv2d_same(x: Tensor, w: Tensor, b: Tensor | None, stride: int) -> Tensor:
    """SAME-padded convolution; output spatial dims are ceil(in/stride)."""
    if stride < 1:
        raise ValueError(f"conv2d stride must be >= 1, got {stride}")
    xb, squeeze = _batched(x)
    kh, kw = w.data.shape[0], w.data.shape[1]
    _, h, wd, cin = xb.data.shape
    if w.data.ndim != 4 or w.data.shape[2] != cin:
        raise ValueError(f"conv2d: kernel {w.data.shape} does not match input {xb.data.shape}")
    if kh > h or kw > wd:
        raise ValueError(f"conv2d: kernel {w.data.shape} larger than input {xb.data.shape}")

    y = kernels.conv2d_fwd(xb.data, w.data, None if b is None else b.data, stride)
    parents = (xb, w) if b is None else (xb, w, b)

    def bwd(out):
        g = out.grad
        if xb.requires_grad:
            _accum(xb, kernels.conv2d_bwd_input(g, w.data, stride, h, wd))
        if w.requires_grad:
            _accum(w, kernels.conv2d_bwd_weights(xb.data, g, stride, kh, kw))
        if b is not None and b.requires_grad:
            _accum(b, g.sum(axis=(0, 1, 2)))

    out = _make(y, parents, bwd)
    return reshape(out, out.data.shape[1:]) if squeeze else out


def conv2d_transpose_same(x: Tensor, w: Tensor, b: Tensor | None, stride: int) -> Tensor:
    """Mirror of conv2d_same: maps [.., H, W, Cin] to [.., H*stride, W*stride, Cout].

    Weights are laid out [kh, kw, Cout, Cin], i.e. with the same shape as the
    forward convolution this layer mirrors.
    """
    if stride < 1:
        raise ValueError(f"conv2d_transpose stride must be >= 1, got {stride}")
    xb, squeeze = _batched(x)
    kh, kw = w.data.shape[0], w.data.shape[1]
    _, h, wd, cin = xb.data.shape
    if w.data.ndim != 4 or w.data.shape[3] != cin:
        raise ValueError(f"conv2d_transpose: kernel {w.data.shape} does not match input {xb.data.shape}")

    ho, wo = h * stride, wd * stride
    y = kernels.conv2d_bwd_input(xb.data, w.data, stride, ho, wo)
    if b is not None:
        y = y + b.data
    parents = (xb, w) if b is None else (xb, w, b)

    def bwd(out):
        g = np.ascontiguousarray(out.grad)
        if xb.requires_grad:
            _accum(xb, kernels.conv2d_fwd(g, w.data, None, stride))
        if w.requires_grad:
            _accum(w, kernels.conv2d_bwd_weights(g, xb.data, stride, kh, kw))
        if b is not None and b.requires_grad:
            _accum(b, g.sum(axis=(0, 1, 2)))

    out = _make(y, parents, bwd)
    return reshape(out, out.data.shape[1:]) if squeeze else out


def dense(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """x @ w + b, accepting 1-D or batched 2-D inputs."""
    y = matmul(x, w)
    return y if b is None else add(y, b)


def backward(loss: Tensor, seed: float = 1.0):
    """Populate .grad on every reachable tensor that requires a gradient."""
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in visited or not node.requires_grad:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))

    loss.grad = np.full_like(loss.data, seed)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node)


def softmax_and_entropy(logits: np.ndarray) -> tuple[np.ndarray, float]:
    """Stabilized softmax probabilities and their entropy (plain numpy)."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    p = np.exp(z)
    p /= p.sum()
    nz = p > 0
    entropy = float(-(p[nz] * np.log(p[nz])).sum())
    return p, entropy
