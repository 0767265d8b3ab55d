"""Deterministic synthetic TEC frames for desk-scale experiments.

Each 72x72 geographic frame is

    base + diurnal * dayside(lon - subsolar_lon(t)) * crests(lat)
         + sum of drifting, slowly pulsing Gaussian anomalies
         + white noise

clamped to [0, max_value]. The dayside term depends only on UT hour, so with
no anomalies and no noise the sequence repeats every 12 frames exactly.
Anomalies ride with the Sun (their longitude is measured from the subsolar
point) and drift slowly away from it, so their position in geographic
coordinates is not 24-hour periodic.
"""

from __future__ import annotations

import calendar
import datetime as dt
from dataclasses import dataclass

import numpy as np

from .preprocess import FRAME_SECONDS, SIZE, TecMap, latitudes, longitudes

DEFAULT_START = calendar.timegm(dt.datetime(2014, 1, 1).utctimetuple())


@dataclass
class SynthConfig:
    frames: int = 600
    base: float = 4.0
    diurnal: float = 40.0
    crest_lat: float = 15.0
    crest_width: float = 12.0
    anomalies: int = 6
    anomaly_amplitude: float = 14.0
    anomaly_width: float = 14.0  # degrees
    drift: float = 1.5  # max drift speed, degrees per hour
    pulse_days: tuple[float, float] = (1.5, 4.0)  # range of amplitude-modulation periods
    noise: float = 0.5
    max_value: float = 120.0
    start_epoch: int = DEFAULT_START

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("frames must be positive")
        if self.anomalies < 0 or self.noise < 0:
            raise ValueError("anomaly count and noise must be non-negative")
        if self.max_value <= 0:
            raise ValueError("max_value must be positive")


def subsolar_longitude(epoch) -> np.ndarray:
    """Longitude (deg) under the Sun: 0 at 12:00 UT, moving west 15 deg per hour."""
    hours = (np.asarray(epoch, dtype=np.int64) % 86400) / 3600.0
    return 180.0 - 15.0 * hours


def _wrap(deg: np.ndarray) -> np.ndarray:
    return (deg + 180.0) % 360.0 - 180.0


def synth_arrays(config: SynthConfig, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Return (frames (N, 72, 72) float32 TECU, epochs (N,) int64)."""
    rng = np.random.default_rng(seed)
    n = config.frames
    epochs = config.start_epoch + FRAME_SECONDS * np.arange(n, dtype=np.int64)
    lat = latitudes(SIZE)[:, None]
    lon = longitudes(SIZE)[None, :]
    coslat = np.cos(np.radians(lat))

    crests = (np.exp(-0.5 * ((lat - config.crest_lat) / config.crest_width) ** 2)
              + np.exp(-0.5 * ((lat + config.crest_lat) / config.crest_width) ** 2))
    crests = 0.3 + 0.7 * crests / crests.max()
    k = config.anomalies
    lat0 = rng.uniform(-50.0, 50.0, k)
    lat_swing = rng.uniform(5.0, 15.0, k)
    lat_period = rng.uniform(3.0, 8.0, k) * 24.0
    offset0 = rng.uniform(-120.0, 120.0, k)  # longitude relative to the Sun
    speed = rng.uniform(-config.drift, config.drift, k)
    amp = config.anomaly_amplitude * rng.uniform(0.5, 1.0, k) * rng.choice([-0.6, 1.0], k)
    pulse = rng.uniform(*config.pulse_days, k) * 24.0
    phase = rng.uniform(0.0, 2 * np.pi, k)
    width = config.anomaly_width * rng.uniform(0.7, 1.3, k)

    frames = np.empty((n, SIZE, SIZE), dtype=np.float32)
    for t in range(n):
        hours = t * FRAME_SECONDS / 3600.0
        sun = subsolar_longitude(epochs[t])
        dayside = (0.5 * (1.0 + np.cos(np.radians(lon - sun)))) ** 2
        f = config.base + config.diurnal * dayside * crests
        for j in range(k):
            clat = lat0[j] + lat_swing[j] * np.sin(2 * np.pi * hours / lat_period[j])
            clon = sun + offset0[j] + speed[j] * hours
            dlat = lat - clat
            dlon = _wrap(lon - clon) * coslat
            a = amp[j] * (0.5 + 0.5 * np.sin(2 * np.pi * hours / pulse[j] + phase[j]))
            f = f + a * np.exp(-0.5 * (dlat * dlat + dlon * dlon) / width[j] ** 2)
        if config.noise > 0:
            f = f + config.noise * rng.standard_normal((SIZE, SIZE))
        frames[t] = np.clip(f, 0.0, config.max_value)
    return frames, epochs


def synth_generate(config: SynthConfig, seed: int = 0) -> list[TecMap]:
    frames, epochs = synth_arrays(config, seed)
    return [TecMap(frames[i], int(epochs[i])) for i in range(len(epochs))]
