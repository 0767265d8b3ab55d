"""Central finite differences, the independent route for gradient checks."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tensor, no_grad


def _scalar(v) -> float:
    if isinstance(v, Tensor):
        return float(v.data.reshape(()))
    return float(v)


def finite_diff_grad(f: Callable[[Tensor], Tensor | float], x: Tensor, eps: float = 1e-5) -> np.ndarray:
    """Per-element (f(x + eps e_i) - f(x - eps e_i)) / (2 eps), evaluating ``f`` on ``x`` in place."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    data = x.data
    grad = np.zeros(data.shape, dtype=np.float64)
    flat = data.reshape(-1)
    gflat = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = _scalar(f(x))
            flat[i] = orig - eps
            fm = _scalar(f(x))
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * eps)
    return grad


def directional_derivative(f: Callable[[], Tensor | float], params: list[Tensor], directions: list[np.ndarray],
                           eps: float = 1e-5) -> float:
    """Central difference of ``f`` along ``directions`` (one array per parameter)."""
    originals = [p.data.copy() for p in params]
    try:
        with no_grad():
            for p, o, v in zip(params, originals, directions):
                p.data[...] = o + eps * v
            fp = _scalar(f())
            for p, o, v in zip(params, originals, directions):
                p.data[...] = o - eps * v
            fm = _scalar(f())
    finally:
        for p, o in zip(params, originals):
            p.data[...] = o
    return (fp - fm) / (2.0 * eps)


def relative_error(a, b, floor: float = 1e-8) -> float:
    """max |a - b| / max(|a|, |b|, floor), elementwise then reduced."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))
