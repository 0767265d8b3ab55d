"""2-D convolution and transposed convolution (cross-correlation, zero padding).

Both are lowered to a single matrix product over an unfolded ("im2col")
buffer laid out as (kh, kw, C, B, H', W') so every tap writes one contiguous
block. The unfolded buffer is rebuilt during the backward pass instead of
being kept alive, which keeps the memory of long recurrent graphs bounded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import DimensionError, Tensor


@dataclass(frozen=True)
class ConvSpec:
    stride: int = 1
    padding: int = 0
    dilation: int = 1
    output_padding: int = 0  # transposed convolution only

    def __post_init__(self):
        if self.stride < 1 or self.dilation < 1:
            raise ValueError(f"stride and dilation must be positive: {self}")
        if self.padding < 0 or self.output_padding < 0:
            raise ValueError(f"padding must be non-negative: {self}")

    def out_extent(self, n: int, k: int) -> int:
        return (n + 2 * self.padding - self.dilation * (k - 1) - 1) // self.stride + 1

    def transpose_extent(self, n: int, k: int) -> int:
        return (n - 1) * self.stride - 2 * self.padding + self.dilation * (k - 1) + 1 + self.output_padding


def _window(start: int, count: int, stride: int) -> slice:
    return slice(start, start + stride * (count - 1) + 1, stride)


def _im2col(xp: np.ndarray, kh: int, kw: int, s: int, d: int, ho: int, wo: int) -> np.ndarray:
    b, c = xp.shape[:2]
    cols = np.empty((kh, kw, c, b, ho, wo), dtype=xp.dtype)
    xt = xp.transpose(1, 0, 2, 3)
    for i in range(kh):
        hs = _window(i * d, ho, s)
        for j in range(kw):
            cols[i, j] = xt[:, :, hs, _window(j * d, wo, s)]
    return cols.reshape(kh * kw * c, b * ho * wo)


def _col2im(cols: np.ndarray, shape: tuple[int, int, int, int], kh: int, kw: int, s: int, d: int,
            ho: int, wo: int) -> np.ndarray:
    b, c = shape[:2]
    cols = cols.reshape(kh, kw, c, b, ho, wo)
    out = np.zeros(shape, dtype=cols.dtype)
    ot = out.transpose(1, 0, 2, 3)
    for i in range(kh):
        hs = _window(i * d, ho, s)
        for j in range(kw):
            ot[:, :, hs, _window(j * d, wo, s)] += cols[i, j]
    return out


def _pad(x: np.ndarray, p: int, extra: int = 0) -> np.ndarray:
    if p == 0 and extra == 0:
        return x
    b, c, h, w = x.shape
    out = np.zeros((b, c, h + 2 * p + extra, w + 2 * p + extra), dtype=x.dtype)
    out[:, :, p:p + h, p:p + w] = x
    return out


def _check_kernel(op: str, weight: Tensor, channels: int, channel_axis: int, bias: Tensor | None,
                  out_channels: int) -> tuple[int, int]:
    if weight.ndim != 4:
        raise DimensionError(op, "kernel rank", 4, weight.ndim)
    kh, kw = weight.shape[2:]
    if kh % 2 == 0 or kw % 2 == 0:
        raise DimensionError(op, "kernel size", "odd", (kh, kw))
    if weight.shape[channel_axis] != channels:
        raise DimensionError(op, "input channels", weight.shape[channel_axis], channels)
    if bias is not None and bias.shape != (out_channels,):
        raise DimensionError(op, "bias", (out_channels,), bias.shape)
    return kh, kw


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, spec: ConvSpec = ConvSpec()) -> Tensor:
    """Cross-correlate (B, Cin, H, W) with a (Cout, Cin, kh, kw) kernel."""
    if x.ndim != 4:
        raise DimensionError("conv2d", "input rank", 4, x.ndim)
    b, c, h, w = x.shape
    cout = weight.shape[0]
    kh, kw = _check_kernel("conv2d", weight, c, 1, bias, cout)
    s, p, d = spec.stride, spec.padding, spec.dilation
    ho, wo = spec.out_extent(h, kh), spec.out_extent(w, kw)
    if ho < 1:
        raise DimensionError("conv2d", "height", ">= 1 output row", ho)
    if wo < 1:
        raise DimensionError("conv2d", "width", ">= 1 output column", wo)

    xd, wd = x.data, weight.data
    wm = wd.transpose(0, 2, 3, 1).reshape(cout, kh * kw * c)
    out = wm @ _im2col(_pad(xd, p), kh, kw, s, d, ho, wo)
    out = out.reshape(cout, b, ho, wo).transpose(1, 0, 2, 3)
    if bias is not None:
        out = out + bias.data.reshape(1, cout, 1, 1)
    out = np.ascontiguousarray(out)

    def backward(g):
        gm = g.transpose(1, 0, 2, 3).reshape(cout, b * ho * wo)
        gx = gw = gb = None
        if weight.requires_grad:
            cols = _im2col(_pad(xd, p), kh, kw, s, d, ho, wo)
            gw = (gm @ cols.T).reshape(cout, kh, kw, c).transpose(0, 3, 1, 2)
        if x.requires_grad:
            gxp = _col2im(wm.T @ gm, (b, c, h + 2 * p, w + 2 * p), kh, kw, s, d, ho, wo)
            gx = gxp[:, :, p:p + h, p:p + w]
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op(out, parents, backward, "conv2d")


def conv2d_transpose(x: Tensor, weight: Tensor, bias: Tensor | None = None,
                     spec: ConvSpec = ConvSpec()) -> Tensor:
    """Adjoint of :func:`conv2d`; kernel is (Cin, Cout, kh, kw), Cin being this op's input."""
    if x.ndim != 4:
        raise DimensionError("conv2d_transpose", "input rank", 4, x.ndim)
    b, c, h, w = x.shape
    cout = weight.shape[1]
    kh, kw = _check_kernel("conv2d_transpose", weight, c, 0, bias, cout)
    s, p, d, op = spec.stride, spec.padding, spec.dilation, spec.output_padding
    ho, wo = spec.transpose_extent(h, kh), spec.transpose_extent(w, kw)
    if ho < 1 or wo < 1:
        raise DimensionError("conv2d_transpose", "output extent", ">= 1", (ho, wo))
    # full (uncropped) extent, plus output padding on the far side
    fh = (h - 1) * s + d * (kh - 1) + 1 + op
    fw = (w - 1) * s + d * (kw - 1) + 1 + op

    xd, wd = x.data, weight.data
    wm = wd.transpose(0, 2, 3, 1).reshape(c, kh * kw * cout)
    xm = xd.transpose(1, 0, 2, 3).reshape(c, b * h * w)
    full = _col2im(wm.T @ xm, (b, cout, fh, fw), kh, kw, s, d, h, w)
    out = full[:, :, p:p + ho, p:p + wo]
    if bias is not None:
        out = out + bias.data.reshape(1, cout, 1, 1)
    out = np.ascontiguousarray(out)

    def backward(g):
        gfull = np.zeros((b, cout, fh, fw), dtype=g.dtype)
        gfull[:, :, p:p + ho, p:p + wo] = g
        cols = _im2col(gfull, kh, kw, s, d, h, w)
        gx = gw = gb = None
        if x.requires_grad:
            gx = (wm @ cols).reshape(c, b, h, w).transpose(1, 0, 2, 3)
        if weight.requires_grad:
            gw = (xm @ cols.T).reshape(c, kh, kw, cout).transpose(0, 3, 1, 2)
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op(out, parents, backward, "conv2d_transpose")
