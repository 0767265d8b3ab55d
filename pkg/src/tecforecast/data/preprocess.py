"""Map geometry: 71x73 -> 72x72 resize, heliocentric shift, normalization."""

from __future__ import annotations

import calendar
from dataclasses import dataclass, replace

import numpy as np

from .ionex import N_LAT, N_LON, RawTecMap

SIZE = 72
FRAME_SECONDS = 7200
GEOGRAPHIC = "geographic"
HELIOCENTRIC = "heliocentric"
SPACE_CODES = {GEOGRAPHIC: 0, HELIOCENTRIC: 1}


class FrameSpaceError(ValueError):
    pass


@dataclass
class TecMap:
    grid: np.ndarray  # (72, 72) float32
    epoch: int  # Unix seconds, UTC
    space: str = GEOGRAPHIC
    normalized: bool = False

    def __post_init__(self):
        if self.grid.shape != (SIZE, SIZE):
            raise ValueError(f"TecMap must be {SIZE}x{SIZE}, got {self.grid.shape}")
        if self.space not in SPACE_CODES:
            raise ValueError(f"unknown frame space {self.space!r}")


def latitudes(height: int = SIZE) -> np.ndarray:
    """Row-center latitudes (deg) of a map whose rows span +87.5 .. -87.5 evenly."""
    return np.linspace(87.5, -87.5, height)


def longitudes(width: int = SIZE) -> np.ndarray:
    """Column longitudes (deg), west first, 360/width apart starting at -180."""
    return -180.0 + np.arange(width) * (360.0 / width)


def resize_to_72(raw: RawTecMap) -> TecMap:
    """Drop the duplicated +180 meridian and linearly resample 71 latitude rows onto 72."""
    g = np.asarray(raw.grid, dtype=np.float64)
    if g.shape != (N_LAT, N_LON):
        raise ValueError(f"expected a {N_LAT}x{N_LON} map, got {g.shape}")
    g = g[:, :SIZE]
    pos = np.arange(SIZE) * (N_LAT - 1) / (SIZE - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, N_LAT - 1)
    frac = (pos - lo)[:, None]
    out = (1.0 - frac) * g[lo] + frac * g[hi]
    epoch = calendar.timegm(raw.epoch.utctimetuple())
    return TecMap(out.astype(np.float32), epoch)


def helio_shift(epoch) -> np.ndarray | int:
    """Longitude roll (columns) for an epoch: 3 columns per hour of UT, 0 at midnight."""
    seconds = np.asarray(epoch, dtype=np.int64) % 86400
    shift = np.rint(seconds / 86400.0 * SIZE).astype(np.int64) % SIZE
    return int(shift) if shift.ndim == 0 else shift


def _roll_frames(frames: np.ndarray, shifts) -> np.ndarray:
    shifts = np.broadcast_to(np.asarray(shifts, dtype=np.int64), frames.shape[:-2])
    out = np.empty_like(frames)
    w = frames.shape[-1]
    cols = np.arange(w)
    for idx in np.ndindex(*frames.shape[:-2]):
        out[idx] = frames[idx][:, (cols - shifts[idx]) % w]
    return out


def roll_to_heliocentric(frames: np.ndarray, epochs) -> np.ndarray:
    """Array form: roll each (H, W) frame east by its epoch's shift."""
    return _roll_frames(frames, helio_shift(epochs))


def roll_to_geographic(frames: np.ndarray, epochs) -> np.ndarray:
    return _roll_frames(frames, -np.asarray(helio_shift(epochs)))


def to_heliocentric(m: TecMap) -> TecMap:
    if m.space != GEOGRAPHIC:
        raise FrameSpaceError("map is already heliocentric")
    return replace(m, grid=roll_to_heliocentric(m.grid, m.epoch), space=HELIOCENTRIC)


def from_heliocentric(m: TecMap) -> TecMap:
    if m.space != HELIOCENTRIC:
        raise FrameSpaceError("map is not heliocentric")
    return replace(m, grid=roll_to_geographic(m.grid, m.epoch), space=GEOGRAPHIC)


def normalize(maps: np.ndarray, max_train: float) -> np.ndarray:
    """Divide by the training maximum; values above it stay above 1."""
    if not max_train > 0:
        raise ValueError(f"max_train must be positive, got {max_train}")
    maps = np.asarray(maps)
    return maps / maps.dtype.type(max_train) if maps.dtype.kind == "f" else maps / max_train


def denormalize(maps: np.ndarray, max_train: float) -> np.ndarray:
    if not max_train > 0:
        raise ValueError(f"max_train must be positive, got {max_train}")
    maps = np.asarray(maps)
    return maps * maps.dtype.type(max_train) if maps.dtype.kind == "f" else maps * max_train
