# app/autograd/ops.py
"""Differentiable operations on ``Tensor``. All arithmetic is float64."""
import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from app.autograd.tensor import Tensor, make_result
from app.core.exceptions import ContractError, DimensionError

ArrayLike = Union[Tensor, np.ndarray, float, int, Sequence]


def as_tensor(x: ArrayLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sums ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast(op: str, fn, a: Tensor, b: Tensor) -> np.ndarray:
    try:
        return fn(a.data, b.data)
    except ValueError:
        raise DimensionError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None


# --- elementwise arithmetic ---

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _broadcast("add", np.add, a, b)
    return make_result("add", out, (a, b),
                       lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _broadcast("sub", np.subtract, a, b)
    return make_result("sub", out, (a, b),
                       lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _broadcast("mul", np.multiply, a, b)
    return make_result("mul", out, (a, b),
                       lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def neg(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return make_result("neg", -a.data, (a,), lambda g: (-g,))


def scale(a: ArrayLike, factor: float) -> Tensor:
    a = as_tensor(a)
    factor = float(factor)
    return make_result("scale", a.data * factor, (a,), lambda g: (g * factor,))


# --- linear algebra ---

def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise DimensionError(f"matmul: batch shapes {a.shape} and {b.shape} do not broadcast") from None

    def _backward(g):
        grad_a = np.matmul(g, np.swapaxes(b.data, -1, -2))
        grad_b = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return make_result("matmul", out, (a, b), _backward)


def linear(x: ArrayLike, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """x @ weight (+ bias)."""
    out = matmul(x, weight)
    return add(out, bias) if bias is not None else out


# --- shape manipulation ---

def reshape(a: ArrayLike, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot reshape {a.shape} into {tuple(shape)}") from None
    return make_result("reshape", out, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: ArrayLike, axes: Optional[Sequence[int]] = None) -> Tensor:
    a = as_tensor(a)
    axes = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
    if sorted(axes) != list(range(a.ndim)):
        raise DimensionError(f"transpose: axes {axes} invalid for shape {a.shape}")
    inverse = tuple(np.argsort(axes))
    return make_result("transpose", np.transpose(a.data, axes), (a,),
                       lambda g: (np.transpose(g, inverse),))


def swap_last(a: ArrayLike) -> Tensor:
    """Swaps the last two axes."""
    a = as_tensor(a)
    axes = list(range(a.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(a, axes)


def getitem(a: ArrayLike, index) -> Tensor:
    a = as_tensor(a)
    out = np.array(a.data[index], dtype=np.float64)
    parts = index if isinstance(index, tuple) else (index,)
    basic = all(isinstance(p, (int, slice)) or p is Ellipsis or p is None for p in parts)

    def _backward(g):
        full = np.zeros_like(a.data)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)

    return make_result("getitem", out, (a,), _backward)


# --- reductions ---

def sum(a: ArrayLike, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def _backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_result("sum", out, (a,), _backward)


def mean(a: ArrayLike, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return scale(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


# --- nonlinearities ---

def relu(a: ArrayLike) -> Tensor:
    """max(0, x); the subgradient at 0 is 0."""
    a = as_tensor(a)
    mask = a.data > 0
    return make_result("relu", np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def sigmoid(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    s = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return make_result("sigmoid", s, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    t = np.tanh(a.data)
    return make_result("tanh", t, (a,), lambda g: (g * (1.0 - t * t),))


def exp(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    e = np.exp(a.data)
    return make_result("exp", e, (a,), lambda g: (g * e,))


def softmax(x: ArrayLike, axis: int = -1) -> Tensor:
    """Max-subtracted exponential normalization along ``axis``."""
    x = as_tensor(x)
    if x.ndim == 0 or not -x.ndim <= axis < x.ndim:
        raise DimensionError(f"softmax: axis {axis} invalid for shape {x.shape}")
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / np.sum(e, axis=axis, keepdims=True)
    return make_result("softmax", s, (x,),
                       lambda g: (s * (g - np.sum(g * s, axis=axis, keepdims=True)),))


# --- convolution ---

def conv2d(x: ArrayLike, kernels: ArrayLike, bias: Optional[ArrayLike] = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """
    2-D cross-correlation (no kernel flip) with zero padding.

    Args:
        x: input of shape (C_in, H, W) or batched (N, C_in, H, W).
        kernels: (C_out, C_in, kh, kw).
        bias: (C_out,) or None.

    Returns:
        (C_out, H', W') or (N, C_out, H', W') with H' = (H + 2p - kh) // stride + 1.
    """
    x, kernels = as_tensor(x), as_tensor(kernels)
    bias = as_tensor(bias) if bias is not None else None
    single = x.ndim == 3
    xd = x.data[None] if single else x.data
    if xd.ndim != 4 or kernels.ndim != 4:
        raise DimensionError(f"conv2d: expected (N,)C,H,W input and 4-D kernels, got {x.shape} and {kernels.shape}")
    if stride < 1 or padding < 0:
        raise ContractError(f"conv2d: stride must be >= 1 and padding >= 0 (got {stride}, {padding})")
    n, c_in, h, w = xd.shape
    c_out, k_cin, kh, kw = kernels.shape
    if k_cin != c_in:
        raise DimensionError(f"conv2d: kernels {kernels.shape} expect {k_cin} channels, input {x.shape} has {c_in}")
    if kh > h + 2 * padding or kw > w + 2 * padding:
        raise DimensionError(f"conv2d: kernel {kh}x{kw} larger than padded input {h + 2 * padding}x{w + 2 * padding}")
    if bias is not None and bias.shape != (c_out,):
        raise DimensionError(f"conv2d: bias shape {bias.shape} does not match {c_out} output channels")

    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1
    xp = np.pad(xd, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else xd
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    windows = windows[:, :, :h_out, :w_out]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * h_out * w_out, c_in * kh * kw)
    kmat = kernels.data.reshape(c_out, -1)
    out = (cols @ kmat.T).reshape(n, h_out, w_out, c_out).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    out = np.ascontiguousarray(out[0] if single else out)

    def _backward(g):
        g4 = g[None] if single else g
        gmat = g4.transpose(0, 2, 3, 1).reshape(-1, c_out)
        grad_k = (gmat.T @ cols).reshape(kernels.shape)
        gcols = (gmat @ kmat).reshape(n, h_out, w_out, c_in, kh, kw)
        grad_xp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                grad_xp[:, :, i:i + stride * h_out:stride, j:j + stride * w_out:stride] += \
                    gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        grad_x = grad_xp[:, :, padding:padding + h, padding:padding + w] if padding else grad_xp
        grad_x = grad_x[0] if single else grad_x
        grad_b = g4.sum(axis=(0, 2, 3)) if bias is not None else None
        return grad_x, grad_k, grad_b

    inputs = (x, kernels) if bias is None else (x, kernels, bias)
    return make_result("conv2d", out, inputs, _backward)


# --- attention ---

def scaled_dot_product_attention(query: ArrayLike, key: ArrayLike, value: ArrayLike,
                                 return_weights: bool = False):
    """
    softmax(query · keyᵀ / √d) · value over the last two axes.

    Shapes: query (..., T_q, d), key (..., T_k, d), value (..., T_k, d_v).
    """
    query, key, value = as_tensor(query), as_tensor(key), as_tensor(value)
    if query.ndim < 2 or key.ndim < 2 or value.ndim < 2:
        raise DimensionError("attention: query, key and value need at least 2 dimensions")
    d = query.shape[-1]
    if d == 0 or key.shape[-1] != d:
        raise DimensionError(f"attention: query {query.shape} and key {key.shape} must share a non-empty feature axis")
    if key.shape[-2] == 0 or key.shape[-2] != value.shape[-2]:
        raise DimensionError(f"attention: key {key.shape} and value {value.shape} must share a non-empty token axis")
    scores = scale(matmul(query, swap_last(key)), 1.0 / math.sqrt(d))
    weights = softmax(scores, axis=-1)
    out = matmul(weights, value)
    return (out, weights) if return_weights else out


# --- loss ---

def mse_loss(pred: ArrayLike, target: ArrayLike) -> Tensor:
    """Mean of squared differences over all elements."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"mse_loss: prediction {pred.shape} and target {target.shape} differ")
    diff = pred.data - target.data
    n = diff.size

    def _backward(g):
        grad = g * 2.0 * diff / n
        return grad, -grad

    return make_result("mse_loss", np.array(np.mean(diff * diff)), (pred, target), _backward)


# Operator overloads
Tensor.__add__ = lambda self, other: add(self, other)
Tensor.__radd__ = lambda self, other: add(other, self)
Tensor.__sub__ = lambda self, other: sub(self, other)
Tensor.__rsub__ = lambda self, other: sub(other, self)
Tensor.__mul__ = lambda self, other: mul(self, other)
Tensor.__rmul__ = lambda self, other: mul(other, self)
Tensor.__neg__ = lambda self: neg(self)
Tensor.__matmul__ = lambda self, other: matmul(self, other)
Tensor.__getitem__ = lambda self, index: getitem(self, index)
Tensor.reshape = lambda self, *shape: reshape(self, shape[0] if len(shape) == 1 and not isinstance(shape[0], int) else shape)
Tensor.sum = lambda self, axis=None, keepdims=False: sum(self, axis=axis, keepdims=keepdims)
Tensor.mean = lambda self, axis=None, keepdims=False: mean(self, axis=axis, keepdims=keepdims)
