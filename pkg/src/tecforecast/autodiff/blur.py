"""Separable Gaussian blur for latitude x longitude maps.

Longitude (last axis) wraps around; latitude (second-to-last axis) replicates
its edge rows. Both 1-D passes are expressed as small banded matrices, so the
blur is ``A_lat @ X @ A_lon.T`` and its adjoint is the transposed product.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .tensor import Tensor


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Normalized taps exp(-d^2 / 2 sigma^2) for d in [-r, r], r = ceil(3 sigma)."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    r = math.ceil(3 * sigma)
    d = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(d * d) / (2.0 * sigma * sigma))
    return k / k.sum()


@lru_cache(maxsize=32)
def _blur_matrix(n: int, sigma: float, circular: bool) -> np.ndarray:
    k = gaussian_kernel1d(sigma)
    r = len(k) // 2
    m = np.zeros((n, n))
    for i in range(n):
        for o in range(-r, r + 1):
            j = (i + o) % n if circular else min(max(i + o, 0), n - 1)
            m[i, j] += k[o + r]
    m.setflags(write=False)
    return m


def blur_matrices(height: int, width: int, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    return _blur_matrix(height, float(sigma), False), _blur_matrix(width, float(sigma), True)


def gaussian_blur(x: Tensor, sigma: float) -> Tensor:
    """Blur the trailing (H, W) axes of ``x`` with a Gaussian of std ``sigma`` pixels."""
    h, w = x.shape[-2:]
    ah, aw = blur_matrices(h, w, sigma)
    ah = ah.astype(x.dtype)
    aw = aw.astype(x.dtype)
    out = ah @ x.data @ aw.T

    def backward(g):
        return (ah.T @ g @ aw,)

    return Tensor.from_op(out, (x,), backward, "gaussian_blur")
