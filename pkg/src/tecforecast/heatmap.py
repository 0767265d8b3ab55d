"""8-bit binary PGM export of single maps.

The file carries the linear scale in a comment so values can be recovered to
within 1/255 of the map's range::

    P5
    # min <float> max <float>
    <width> <height>
    255
    <width*height bytes, row-major>
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

_SCALE = re.compile(rb"# min (\S+) max (\S+)")


def pgm_bytes(grid) -> bytes:
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 2:
        raise ValueError(f"heatmaps take one 2-D map, got {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("map holds non-finite values")
    lo, hi = float(g.min()), float(g.max())
    span = hi - lo
    q = np.zeros(g.shape, dtype=np.uint8) if span == 0 else np.rint((g - lo) / span * 255).astype(np.uint8)
    head = f"P5\n# min {lo!r} max {hi!r}\n{g.shape[1]} {g.shape[0]}\n255\n".encode("ascii")
    return head + q.tobytes()


def export_heatmap(grid, path) -> None:
    Path(path).write_bytes(pgm_bytes(grid))


def read_heatmap(path) -> np.ndarray:
    """Decode a file written by ``export_heatmap`` back to (approximate) map values."""
    raw = Path(path).read_bytes()
    lines = raw.split(b"\n", 4)
    if lines[0] != b"P5" or len(lines) < 5:
        raise ValueError("not a binary PGM written by export_heatmap")
    m = _SCALE.fullmatch(lines[1])
    if not m:
        raise ValueError("missing min/max comment")
    lo, hi = float(m.group(1)), float(m.group(2))
    w, h = (int(v) for v in lines[2].split())
    q = np.frombuffer(lines[4], dtype=np.uint8, count=w * h).reshape(h, w)
    return lo + q.astype(np.float64) / 255.0 * (hi - lo)
