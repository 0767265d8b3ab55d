"""Elementwise math, reductions and channel plumbing."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import DimensionError, Tensor, as_tensor


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(op, "shape", a.shape, b.shape)


def add(a: Tensor, b) -> Tensor:
    if isinstance(b, (int, float)):
        return Tensor.from_op(a.data + a.data.dtype.type(b), (a,), lambda g: (g,), "add_scalar")
    b = as_tensor(b)
    _same_shape("add", a, b)
    return Tensor.from_op(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b) -> Tensor:
    if isinstance(b, (int, float)):
        return add(a, -b)
    b = as_tensor(b)
    _same_shape("sub", a, b)
    return Tensor.from_op(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    b = as_tensor(b)
    _same_shape("mul", a, b)
    ad, bd = a.data, b.data
    return Tensor.from_op(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = a.data.dtype.type(c)
    return Tensor.from_op(a.data * c, (a,), lambda g: (g * c,), "scale")


def logistic(x: np.ndarray) -> np.ndarray:
    """Overflow-free 1 / (1 + exp(-x)) with full relative precision in both tails."""
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype, copy=False)


def sigmoid(a: Tensor) -> Tensor:
    s = logistic(a.data)
    return Tensor.from_op(s, (a,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    return Tensor.from_op(t, (a,), lambda g: (g * (1.0 - t * t),), "tanh")


def abs_(a: Tensor) -> Tensor:
    # subgradient at zero is zero
    sgn = np.sign(a.data)
    return Tensor.from_op(np.abs(a.data), (a,), lambda g: (g * sgn,), "abs")


_ELEMENTWISE = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "abs": abs_,
    "scale": scale,
}


def elementwise(kind: str, *operands):
    """Dispatch by name: ``elementwise("mul", a, b)``, ``elementwise("scale", a, 2.0)``."""
    try:
        fn = _ELEMENTWISE[kind]
    except KeyError:
        raise ValueError(f"unknown elementwise op {kind!r}") from None
    return fn(*operands)


def sum_all(a: Tensor) -> Tensor:
    shape, dtype = a.shape, a.dtype
    out = np.asarray(a.data.sum(dtype=np.float64), dtype=dtype)
    return Tensor.from_op(out, (a,), lambda g: (np.broadcast_to(g, shape).astype(dtype),), "sum")


def mean_all(a: Tensor) -> Tensor:
    shape, dtype, n = a.shape, a.dtype, a.size
    out = np.asarray(a.data.mean(dtype=np.float64), dtype=dtype)
    return Tensor.from_op(out, (a,), lambda g: (np.full(shape, g / n, dtype=dtype),), "mean")


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Join two (B, C, H, W) tensors along channels; ``a`` comes first."""
    if a.ndim != 4 or b.ndim != 4:
        raise DimensionError("concat_channels", "rank", 4, (a.ndim, b.ndim))
    for axis, name in ((0, "batch"), (2, "height"), (3, "width")):
        if a.shape[axis] != b.shape[axis]:
            raise DimensionError("concat_channels", name, a.shape[axis], b.shape[axis])
    ca = a.shape[1]
    out = np.concatenate([a.data, b.data], axis=1)
    return Tensor.from_op(out, (a, b), lambda g: (g[:, :ca], g[:, ca:]), "concat")


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    if not 0 <= start < stop <= a.shape[axis]:
        raise DimensionError("slice", f"axis {axis}", f"[0, {a.shape[axis]}]", (start, stop))
    shape, dtype = a.shape, a.dtype
    index = (slice(None),) * axis + (slice(start, stop),)

    def backward(g):
        full = np.zeros(shape, dtype=dtype)
        full[index] = g
        return (full,)

    return Tensor.from_op(a.data[index], (a,), backward, "slice")


def slice_channels(a: Tensor, start: int, stop: int) -> Tensor:
    return slice_axis(a, 1, start, stop)


def stack(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Stack equal-shape tensors along a new ``axis``."""
    if not tensors:
        raise ValueError("stack of an empty sequence")
    first = tensors[0].shape
    for t in tensors[1:]:
        if t.shape != first:
            raise DimensionError("stack", "shape", first, t.shape)
    out = np.stack([t.data for t in tensors], axis=axis)
    n = len(tensors)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(n))

    return Tensor.from_op(out, tuple(tensors), backward, "stack")
