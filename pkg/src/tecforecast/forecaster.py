"""Roll a model over an observed window and emit a forecast sequence.

Inputs are the 36 normalized heliocentric frames covering t-70h .. t, indexed
0..35. The model is stepped over frames 0..34 to build up its recurrent state,
then fed frame 35 (time t); that step's output yields the forecast for t+2h,
which is fed back to produce t+4h, and so on.

Direct scheme: the network output is the forecast.
Residual scheme: the network output is a correction added to a Gaussian-blurred
(sigma = 3 px) copy of the most recent observed frame at the same solar time,
i.e. 24h before the target when that frame is inside the window, otherwise 48h.
"""

from __future__ import annotations

import enum

import numpy as np

from .architectures import Model
from .autodiff import Tensor, gaussian_blur, no_grad, stack

INPUT_LEN = 36
MAX_HORIZON = 24
BLUR_SIGMA = 3.0


class ForecastScheme(enum.Enum):
    DIRECT = "direct"
    RESIDUAL = "residual"

    @property
    def code(self) -> int:
        return list(ForecastScheme).index(self)

    @classmethod
    def from_code(cls, code: int) -> "ForecastScheme":
        return list(cls)[code]

    @classmethod
    def parse(cls, text: str) -> "ForecastScheme":
        try:
            return cls(text.lower())
        except ValueError:
            raise ValueError(f"unknown scheme {text!r}; choose direct or residual") from None


def reference_index(k: int) -> int:
    """0-based input index of the same-solar-time frame for forecast step ``k`` (1..24).

    k <= 12: 24h earlier, index 23 + k.  k >= 13: 48h earlier, index 11 + k.
    """
    if not 1 <= k <= MAX_HORIZON:
        raise ValueError(f"forecast step must be in 1..{MAX_HORIZON}, got {k}")
    return 23 + k if k <= 12 else 11 + k


def _as_array(inputs) -> np.ndarray:
    arr = inputs.data if isinstance(inputs, Tensor) else np.asarray(inputs)
    if arr.ndim != 5 or arr.shape[1] != INPUT_LEN or arr.shape[2] != 1:
        raise ValueError(f"inputs must be (B, {INPUT_LEN}, 1, H, W), got {arr.shape}")
    return arr


def reference_frame(inputs, k: int) -> np.ndarray:
    return _as_array(inputs)[:, reference_index(k)]


def blurred_references(inputs, horizon: int) -> np.ndarray:
    """(B, horizon, 1, H, W) blurred reference frames for steps 1..horizon."""
    arr = _as_array(inputs)
    return np.stack([gaussian_blur(Tensor(reference_frame(arr, k)), BLUR_SIGMA).data
                     for k in range(1, horizon + 1)], axis=1)


def periodic_baseline(inputs, horizon: int) -> np.ndarray:
    """Replay the observed window at 24h (then 48h) lag, unblurred."""
    _check_horizon(horizon)
    arr = _as_array(inputs)
    return arr[:, [reference_index(k) for k in range(1, horizon + 1)]].copy()


def _check_horizon(horizon: int) -> None:
    if not 1 <= horizon <= MAX_HORIZON:
        raise ValueError(f"horizon must be in 1..{MAX_HORIZON}, got {horizon}")


def predict(model: Model, scheme: ForecastScheme | str, inputs, horizon: int,
            warmup_grad: bool = True) -> Tensor:
    """Forecast ``horizon`` frames; returns a (B, horizon, 1, H, W) tensor.

    With ``warmup_grad=False`` the warm-up over frames 0..34 is not recorded,
    so gradients flow only through the forecast steps (truncated backprop).
    """
    if isinstance(scheme, str):
        scheme = ForecastScheme.parse(scheme)
    _check_horizon(horizon)
    arr = _as_array(inputs).astype(model.dtype, copy=False)
    b = arr.shape[0]
    if arr.shape[3:] != (model.size, model.size):
        raise ValueError(f"frames are {arr.shape[3:]}, model expects {(model.size, model.size)}")
    refs = blurred_references(arr, horizon) if scheme is ForecastScheme.RESIDUAL else None

    states = model.init_states(b)
    if warmup_grad:
        for i in range(INPUT_LEN - 1):
            _, states = model.step(Tensor(arr[:, i]), states)
    else:
        with no_grad():
            for i in range(INPUT_LEN - 1):
                _, states = model.step(Tensor(arr[:, i]), states)

    x = Tensor(arr[:, INPUT_LEN - 1])
    preds = []
    for k in range(1, horizon + 1):
        out, states = model.step(x, states)
        pred = out + Tensor(refs[:, k - 1]) if refs is not None else out
        preds.append(pred)
        x = pred
    return stack(preds, axis=1)


def forecast_array(model: Model, scheme: ForecastScheme | str, inputs, horizon: int,
                   batch_size: int = 16) -> np.ndarray:
    """Inference helper: no graph, batched, returns a numpy array."""
    arr = _as_array(inputs)
    outs = []
    with no_grad():
        for s in range(0, len(arr), batch_size):
            outs.append(predict(model, scheme, arr[s:s + batch_size], horizon).data)
    return np.concatenate(outs, axis=0)
