"""Convolutional recurrent cells with caller-held state.

ConvLSTM follows the fused-gate form: a single convolution of the
concatenated ``[x_t, y_{t-1}]`` yields the four pre-activations in the order
(forget, input, candidate, output); then

    f, i, o = sigmoid(.)      C_bar = tanh(candidate)
    C_t = f * C_{t-1} + i * C_bar
    y_t = o * tanh(C_t)

The pointwise half is one fused graph node whose backward recomputes the
activations from the stored pre-activations.

ConvGRU uses one (3*hidden)-row kernel: rows [0, 2h) produce the update and
reset gates from ``[x, y]``; rows [2h, 3h) produce the candidate from
``[x, r * y]``; ``y_t = (1 - z) * y + z * h_cand``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff.ops import logistic
from .autodiff import (ConvSpec, DimensionError, Tensor, concat_channels, conv2d, glorot_uniform, mul,
                       param_rng, sigmoid, slice_axis, slice_channels, tanh)

GATE_ORDER = ("forget", "input", "candidate", "output")


@dataclass
class CellState:
    y: Tensor
    C: Tensor | None = None

    def tensors(self) -> tuple[Tensor, ...]:
        return (self.y,) if self.C is None else (self.y, self.C)


def _lstm_pointwise(gates: Tensor, c_prev: Tensor) -> Tensor:
    """Fused gate math; returns ``[y_t, C_t]`` stacked on the channel axis."""
    h = c_prev.shape[1]
    gd, cp = gates.data, c_prev.data

    def activations():
        f = logistic(gd[:, :h])
        i = logistic(gd[:, h:2 * h])
        cbar = np.tanh(gd[:, 2 * h:3 * h])
        o = logistic(gd[:, 3 * h:])
        return f, i, cbar, o

    f, i, cbar, o = activations()
    c = f * cp + i * cbar
    out = np.concatenate([o * np.tanh(c), c], axis=1)

    def backward(g):
        f, i, cbar, o = activations()
        c = f * cp + i * cbar
        tc = np.tanh(c)
        dy, dc = g[:, :h], g[:, h:]
        dc = dc + dy * o * (1.0 - tc * tc)
        dgates = np.concatenate([
            dc * cp * f * (1.0 - f),
            dc * cbar * i * (1.0 - i),
            dc * i * (1.0 - cbar * cbar),
            dy * tc * o * (1.0 - o),
        ], axis=1)
        return dgates, dc * f

    return Tensor.from_op(out, (gates, c_prev), backward, "lstm_pointwise")


class _ConvCell:
    n_gates = 1

    def __init__(self, in_channels: int, hidden: int, kernel: int = 3, dilation: int = 1,
                 seed: int = 0, index: int = 0, dtype=np.float32):
        if kernel % 2 == 0:
            raise ValueError("kernel size must be odd")
        self.in_channels = in_channels
        self.hidden = hidden
        self.kernel = kernel
        # stride 1 and "same" padding keep the state's spatial extent
        self.spec = ConvSpec(stride=1, padding=dilation * (kernel - 1) // 2, dilation=dilation)
        rows = self.n_gates * hidden
        cols = in_channels + hidden
        w = glorot_uniform(param_rng(seed, index), (rows, cols, kernel, kernel),
                           fan_in=cols * kernel * kernel, fan_out=rows * kernel * kernel, dtype=dtype)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(rows, dtype=dtype), requires_grad=True)

    @property
    def dilation(self) -> int:
        return self.spec.dilation

    def parameters(self) -> dict[str, Tensor]:
        return {"weight": self.weight, "bias": self.bias}

    def _check(self, x: Tensor, state: CellState) -> None:
        if x.ndim != 4:
            raise DimensionError(type(self).__name__, "input rank", 4, x.ndim)
        if x.shape[1] != self.in_channels:
            raise DimensionError(type(self).__name__, "input channels", self.in_channels, x.shape[1])
        expect = (x.shape[0], self.hidden) + x.shape[2:]
        if state.y.shape != expect:
            raise DimensionError(type(self).__name__, "state extent", expect, state.y.shape)


class ConvLSTMCell(_ConvCell):
    n_gates = 4

    def init_state(self, batch: int, height: int, width: int) -> CellState:
        return init_state(self, batch, height, width)

    def step(self, x: Tensor, state: CellState) -> tuple[Tensor, CellState]:
        self._check(x, state)
        gates = conv2d(concat_channels(x, state.y), self.weight, self.bias, self.spec)
        both = _lstm_pointwise(gates, state.C)
        h = self.hidden
        y = slice_channels(both, 0, h)
        return y, CellState(y, slice_channels(both, h, 2 * h))


class ConvGRUCell(_ConvCell):
    n_gates = 3

    def init_state(self, batch: int, height: int, width: int) -> CellState:
        return init_state(self, batch, height, width)

    def step(self, x: Tensor, state: CellState) -> tuple[Tensor, CellState]:
        self._check(x, state)
        h = self.hidden
        y_prev = state.y
        w_zr = slice_axis(self.weight, 0, 0, 2 * h)
        b_zr = slice_axis(self.bias, 0, 0, 2 * h)
        zr = conv2d(concat_channels(x, y_prev), w_zr, b_zr, self.spec)
        z = sigmoid(slice_channels(zr, 0, h))
        r = sigmoid(slice_channels(zr, h, 2 * h))
        w_h = slice_axis(self.weight, 0, 2 * h, 3 * h)
        b_h = slice_axis(self.bias, 0, 2 * h, 3 * h)
        cand = tanh(conv2d(concat_channels(x, mul(r, y_prev)), w_h, b_h, self.spec))
        y = mul(1.0 - z, y_prev) + mul(z, cand)
        return y, CellState(y)


def init_state(cell: _ConvCell, batch: int, height: int, width: int) -> CellState:
    """Fresh zero state; every call allocates new buffers."""
    if min(batch, height, width) < 1:
        raise ValueError(f"state extents must be positive: {(batch, height, width)}")
    shape = (batch, cell.hidden, height, width)
    dtype = cell.weight.dtype
    y = Tensor(np.zeros(shape, dtype=dtype))
    if isinstance(cell, ConvLSTMCell):
        return CellState(y, Tensor(np.zeros(shape, dtype=dtype)))
    return CellState(y)


def convlstm_step(cell: ConvLSTMCell, x_t: Tensor, state: CellState) -> tuple[Tensor, CellState]:
    return cell.step(x_t, state)


def convgru_step(cell: ConvGRUCell, x_t: Tensor, state: CellState) -> tuple[Tensor, CellState]:
    return cell.step(x_t, state)


__all__ = ["GATE_ORDER", "CellState", "ConvGRUCell", "ConvLSTMCell", "convgru_step", "convlstm_step",
           "init_state"]
