"""The three map-forecasting networks, each as a single-frame step function.

Every model consumes one (B, 1, H, W) frame plus a list of recurrent states
(one per recurrent unit, in a fixed slot order) and returns a (B, 1, H, W)
map and the advanced states. Hidden layers use tanh; the output layer is
linear. All widths are 8 except the encoder-decoder's 4-channel code.
"""

from __future__ import annotations

import enum
from typing import Callable

import numpy as np

from .autodiff import (ConvSpec, DimensionError, Tensor, concat_channels, conv2d, conv2d_transpose,
                       glorot_uniform, param_rng, tanh)
from .cells import CellState, ConvGRUCell, ConvLSTMCell

WIDTH = 8
MAP_SIZE = 72


class ArchKind(enum.Enum):
    ENC_DEC = "encdec"
    RUNET = "runet"
    DCNN121 = "dcnn121"

    @property
    def code(self) -> int:
        return list(ArchKind).index(self)

    @classmethod
    def from_code(cls, code: int) -> "ArchKind":
        return list(cls)[code]

    @classmethod
    def parse(cls, text: str) -> "ArchKind":
        try:
            return cls(text.lower().replace("-", "").replace("_", ""))
        except ValueError:
            raise ValueError(f"unknown architecture {text!r}; choose from {[k.value for k in cls]}") from None


# Table 3 of the reference study; our decoders are reconstructed, so these are
# logged next to our counts rather than matched.
REFERENCE_PARAM_COUNTS = {ArchKind.ENC_DEC: 7273, ArchKind.RUNET: 28602, ArchKind.DCNN121: 7592}


class Conv:
    def __init__(self, model: "Model", name: str, cin: int, cout: int, kernel: int = 3, stride: int = 1,
                 dilation: int = 1):
        self.spec = ConvSpec(stride=stride, padding=dilation * (kernel - 1) // 2, dilation=dilation)
        self.kernel = kernel
        w = glorot_uniform(model.next_rng(), (cout, cin, kernel, kernel), cin * kernel * kernel,
                           cout * kernel * kernel, model.dtype)
        self.weight = model.register(f"{name}.weight", w)
        self.bias = model.register(f"{name}.bias", np.zeros(cout, dtype=model.dtype))
        model.next_rng()  # keep one stream index per tensor

    def out_extent(self, n: int) -> int:
        return self.spec.out_extent(n, self.kernel)

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, self.spec)


class ConvT:
    """Stride-2 upsampling; output padding is picked per call to land on ``target``."""

    def __init__(self, model: "Model", name: str, cin: int, cout: int, kernel: int = 3, stride: int = 2):
        self.kernel, self.stride, self.padding = kernel, stride, (kernel - 1) // 2
        w = glorot_uniform(model.next_rng(), (cin, cout, kernel, kernel), cout * kernel * kernel,
                           cin * kernel * kernel, model.dtype)
        self.weight = model.register(f"{name}.weight", w)
        self.bias = model.register(f"{name}.bias", np.zeros(cout, dtype=model.dtype))
        model.next_rng()

    def __call__(self, x: Tensor, target: tuple[int, int]) -> Tensor:
        base = ConvSpec(self.stride, self.padding).transpose_extent(x.shape[2], self.kernel)
        extra = target[0] - base
        if extra not in (0, 1) or target[1] - ConvSpec(self.stride, self.padding).transpose_extent(
                x.shape[3], self.kernel) != extra:
            raise DimensionError("ConvT", "target extent", f"{base} or {base + 1}", target)
        return conv2d_transpose(x, self.weight, self.bias, ConvSpec(self.stride, self.padding, 1, extra))


class Model:
    """Base class: named parameters, recurrent state slots, and ``step``."""

    kind: ArchKind

    def __init__(self, seed: int = 0, size: int = MAP_SIZE, dtype=np.float32, cell: str = "lstm"):
        if cell not in ("lstm", "gru"):
            raise ValueError(f"cell must be 'lstm' or 'gru', got {cell!r}")
        self.seed = seed
        self.size = size
        self.dtype = np.dtype(dtype)
        self.cell_type = cell
        self._params: dict[str, Tensor] = {}
        self._stream = 0
        self.slots: list[tuple[str, ConvLSTMCell | ConvGRUCell]] = []
        self.build()

    # -- construction helpers -----------------------------------------
    def next_rng(self) -> np.random.Generator:
        rng = param_rng(self.seed, self._stream)
        self._stream += 1
        return rng

    def register(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name}")
        t = Tensor(np.ascontiguousarray(value, dtype=self.dtype), requires_grad=True)
        self._params[name] = t
        return t

    def recurrent(self, name: str, cin: int, hidden: int = WIDTH, dilation: int = 1):
        cls = ConvLSTMCell if self.cell_type == "lstm" else ConvGRUCell
        cell = cls(cin, hidden, 3, dilation, seed=self.seed, index=self._stream, dtype=self.dtype)
        self._stream += 2
        for key, t in cell.parameters().items():
            if f"{name}.{key}" in self._params:
                raise ValueError(f"duplicate parameter name {name}.{key}")
            self._params[f"{name}.{key}"] = t
        self.slots.append((name, cell))
        return cell

    def build(self) -> None:
        raise NotImplementedError

    # -- public surface ------------------------------------------------
    def parameters(self) -> dict[str, Tensor]:
        return dict(self._params)

    def count_params(self) -> int:
        return count_params(self)

    def zero_parameters(self) -> None:
        for p in self._params.values():
            p.data[...] = 0

    def slot_extents(self, height: int, width: int) -> list[tuple[int, int]]:
        raise NotImplementedError

    def init_states(self, batch: int, height: int | None = None, width: int | None = None) -> list[CellState]:
        height = self.size if height is None else height
        width = self.size if width is None else width
        return [cell.init_state(batch, h, w)
                for (_, cell), (h, w) in zip(self.slots, self.slot_extents(height, width))]

    def step(self, frame: Tensor, states: list[CellState]) -> tuple[Tensor, list[CellState]]:
        if frame.ndim != 4 or frame.shape[1] != 1:
            raise DimensionError(self.kind.value, "frame shape", "(B, 1, H, W)", frame.shape)
        if frame.shape[2:] != (self.size, self.size):
            raise DimensionError(self.kind.value, "spatial extent", (self.size, self.size), frame.shape[2:])
        if len(states) != len(self.slots):
            raise DimensionError(self.kind.value, "state slots", len(self.slots), len(states))
        return self._forward(frame, list(states))

    def _forward(self, frame: Tensor, states: list[CellState]) -> tuple[Tensor, list[CellState]]:
        raise NotImplementedError


class EncDec(Model):
    """Strided conv encoder to a 4-channel code, one recurrent cell, transposed-conv decoder."""

    kind = ArchKind.ENC_DEC

    def build(self) -> None:
        self.enc = [Conv(self, "enc0", 1, WIDTH, stride=2), Conv(self, "enc1", WIDTH, WIDTH, stride=2),
                    Conv(self, "enc2", WIDTH, WIDTH, stride=2), Conv(self, "enc3", WIDTH, 4, stride=1)]
        self.cell = self.recurrent("lstm", 4, hidden=4)
        self.dec = [ConvT(self, "dec0", 4, WIDTH), ConvT(self, "dec1", WIDTH, WIDTH),
                    ConvT(self, "dec2", WIDTH, WIDTH)]
        self.head = Conv(self, "head", WIDTH, 1)

    def _sizes(self, h: int, w: int) -> list[tuple[int, int]]:
        sizes = [(h, w)]
        for layer in self.enc[:3]:
            h, w = layer.out_extent(h), layer.out_extent(w)
            sizes.append((h, w))
        return sizes

    def slot_extents(self, height, width):
        return [self._sizes(height, width)[-1]]

    def _forward(self, frame, states):
        sizes = self._sizes(*frame.shape[2:])
        x = frame
        for layer in self.enc:
            x = tanh(layer(x))
        x, states[0] = self.cell.step(x, states[0])
        for layer, target in zip(self.dec, reversed(sizes[:-1])):
            x = tanh(layer(x, target))
        return self.head(x), states


class RUnet(Model):
    """Three-level recurrent U-Net: five recurrent cells, skip concatenation at two scales."""

    kind = ArchKind.RUNET

    def build(self) -> None:
        self.inp = Conv(self, "inp", 1, WIDTH)
        self.lstm0 = self.recurrent("enc_lstm0", WIDTH)
        self.down1 = Conv(self, "down1", WIDTH, WIDTH, stride=2)
        self.lstm1 = self.recurrent("enc_lstm1", WIDTH)
        self.down2 = Conv(self, "down2", WIDTH, WIDTH, stride=2)
        self.lstm2 = self.recurrent("mid_lstm", WIDTH)
        self.up1 = ConvT(self, "up1", WIDTH, WIDTH)
        self.mix1 = Conv(self, "mix1", 2 * WIDTH, WIDTH)
        self.lstm3 = self.recurrent("dec_lstm1", WIDTH)
        self.up0 = ConvT(self, "up0", WIDTH, WIDTH)
        self.mix0 = Conv(self, "mix0", 2 * WIDTH, WIDTH)
        self.lstm4 = self.recurrent("dec_lstm0", WIDTH)
        self.head = Conv(self, "head", WIDTH, 1)

    def slot_extents(self, height, width):
        s0 = (height, width)
        s1 = (self.down1.out_extent(height), self.down1.out_extent(width))
        s2 = (self.down2.out_extent(s1[0]), self.down2.out_extent(s1[1]))
        return [s0, s1, s2, s1, s0]

    def _forward(self, frame, states):
        s0, s1, _, _, _ = self.slot_extents(*frame.shape[2:])
        y0, states[0] = self.lstm0.step(tanh(self.inp(frame)), states[0])
        y1, states[1] = self.lstm1.step(tanh(self.down1(y0)), states[1])
        y2, states[2] = self.lstm2.step(tanh(self.down2(y1)), states[2])
        u1 = tanh(self.up1(y2, s1))
        y3, states[3] = self.lstm3.step(tanh(self.mix1(concat_channels(u1, y1))), states[3])
        u0 = tanh(self.up0(y3, s0))
        y4, states[4] = self.lstm4.step(tanh(self.mix0(concat_channels(u0, y0))), states[4])
        return self.head(y4), states


class Dcnn121(Model):
    """Three full-resolution recurrent cells with dilations 1, 2, 1 and a linear 3x3 head."""

    kind = ArchKind.DCNN121

    def build(self) -> None:
        self.cells = [self.recurrent("rec0", 1, dilation=1), self.recurrent("rec1", WIDTH, dilation=2),
                      self.recurrent("rec2", WIDTH, dilation=1)]
        self.head = Conv(self, "head", WIDTH, 1)

    def slot_extents(self, height, width):
        return [(height, width)] * 3

    def _forward(self, frame, states):
        x = frame
        for i, cell in enumerate(self.cells):
            x, states[i] = cell.step(x, states[i])
        return self.head(x), states


_BUILDERS: dict[ArchKind, Callable[..., Model]] = {
    ArchKind.ENC_DEC: EncDec,
    ArchKind.RUNET: RUnet,
    ArchKind.DCNN121: Dcnn121,
}


def build_model(kind: ArchKind | str, seed: int = 0, size: int = MAP_SIZE, dtype=np.float32,
                cell: str = "lstm") -> Model:
    if isinstance(kind, str):
        kind = ArchKind.parse(kind)
    return _BUILDERS[kind](seed=seed, size=size, dtype=dtype, cell=cell)


def model_step(model: Model, frame: Tensor, states: list[CellState]) -> tuple[Tensor, list[CellState]]:
    return model.step(frame, states)


def count_params(model: Model) -> int:
    return sum(p.size for p in model.parameters().values())
