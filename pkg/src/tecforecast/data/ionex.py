"""IONEX 1.0 reader/writer for global TEC maps (71 latitudes x 73 longitudes)."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

N_LAT = 71
N_LON = 73
LAT1, LAT2, DLAT = 87.5, -87.5, -2.5
LON1, LON2, DLON = -180.0, 180.0, 5.0
MISSING = 9999


class IonexError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


@dataclass
class RawTecMap:
    grid: np.ndarray  # (71, 73) TECU, north first, west first
    epoch: dt.datetime

    def __post_init__(self):
        if self.grid.shape != (N_LAT, N_LON):
            raise IonexError(f"grid extent {self.grid.shape}, expected {(N_LAT, N_LON)}")


def _label(line: str) -> str:
    # a full row of 16 I5 values also reaches column 60; labels contain letters
    label = line[60:80].strip() if len(line) > 60 else ""
    return label if any(c.isalpha() for c in label) else ""


def _floats(text: str, lineno: int) -> list[float]:
    try:
        return [float(v) for v in text.split()]
    except ValueError:
        raise IonexError(f"unparseable numeric field {text.strip()!r}", lineno) from None


def _scale(raw: int, exponent: int) -> float:
    # division by an exact power of ten rounds once, so 325 / 10 == 32.5
    return raw / 10 ** (-exponent) if exponent < 0 else float(raw * 10 ** exponent)


def parse_ionex(text: str, source: str | None = None) -> list[RawTecMap]:
    """Parse every TEC map block of an IONEX file; RMS and height maps are skipped."""
    lines = text.splitlines()
    if not lines or _label(lines[0]) != "IONEX VERSION / TYPE":
        raise IonexError("malformed header: first record must be IONEX VERSION / TYPE", 1, source)
    exponent = -1
    header_done = False
    maps: list[RawTecMap] = []
    i = 0
    while i < len(lines):
        line = lines[i]
        label = _label(line)
        lineno = i + 1
        if not header_done:
            if label == "EXPONENT":
                exponent = int(_floats(line[:60], lineno)[0])
            elif label == "LAT1 / LAT2 / DLAT":
                vals = _floats(line[:60], lineno)
                if len(vals) != 3 or vals != [LAT1, LAT2, DLAT]:
                    raise IonexError(f"unsupported latitude grid {vals}", lineno, source)
            elif label == "LON1 / LON2 / DLON":
                vals = _floats(line[:60], lineno)
                if len(vals) != 3 or vals != [LON1, LON2, DLON]:
                    raise IonexError(f"unsupported longitude grid {vals}", lineno, source)
            elif label == "END OF HEADER":
                header_done = True
            i += 1
            continue
        if label == "START OF TEC MAP":
            m, i = _parse_block(lines, i + 1, exponent, source)
            maps.append(m)
            continue
        i += 1
    if not header_done:
        raise IonexError("missing END OF HEADER", len(lines), source)
    return maps


def _parse_block(lines: list[str], i: int, exponent: int, source: str | None) -> tuple[RawTecMap, int]:
    epoch = None
    rows: list[list[float]] = []
    current: list[float] | None = None
    start = i
    while i < len(lines):
        line = lines[i]
        label = _label(line)
        lineno = i + 1
        if label == "EPOCH OF CURRENT MAP":
            parts = _floats(line[:60], lineno)
            if len(parts) < 6:
                raise IonexError("short epoch record", lineno, source)
            y, mo, d, h, mi, s = (int(v) for v in parts[:6])
            epoch = dt.datetime(y, mo, d, h, mi, s, tzinfo=dt.timezone.utc)
        elif label == "EXPONENT":
            exponent = int(_floats(line[:60], lineno)[0])
        elif label == "LAT/LON1/LON2/DLON/H":
            if current is not None:
                _close_row(current, rows, lineno, source)
            current = []
        elif label == "END OF TEC MAP":
            if current is not None:
                _close_row(current, rows, lineno, source)
            if epoch is None:
                raise IonexError("TEC map without epoch", lineno, source)
            if len(rows) != N_LAT:
                raise IonexError(f"map has {len(rows)} latitude rows, expected {N_LAT}", lineno, source)
            return RawTecMap(np.array(rows, dtype=np.float64), epoch), i + 1
        elif label == "":
            if current is None:
                raise IonexError("data values outside a latitude record", lineno, source)
            body = line.rstrip("\n")
            for k in range(0, len(body.rstrip()), 5):
                field = body[k:k + 5]
                try:
                    raw = int(field)
                except ValueError:
                    raise IonexError(f"unparseable value {field!r}", lineno, source) from None
                if raw == MISSING:
                    raise IonexError("missing-value code 9999 in TEC map", lineno, source)
                if raw < 0:
                    raise IonexError(f"negative TEC value {raw}", lineno, source)
                current.append(_scale(raw, exponent))
        i += 1
    raise IonexError("unterminated TEC map", start, source)


def _close_row(values: list[float], rows: list[list[float]], lineno: int, source: str | None) -> None:
    if len(values) != N_LON:
        raise IonexError(f"latitude row has {len(values)} values, expected {N_LON}", lineno, source)
    rows.append(values)


def serialize_ionex(maps: list[RawTecMap], exponent: int = -1) -> str:
    """Write maps as a minimal IONEX 1.0 file (TEC maps only, 2-hour interval)."""

    def rec(content: str, label: str) -> str:
        return f"{content:<60}{label:<20}".rstrip()

    out = [
        rec("     1.0            IONOSPHERE MAPS     GNSS", "IONEX VERSION / TYPE"),
    ]
    if maps:
        e = maps[0].epoch
        out.append(rec(f"{e.year:6d}{e.month:6d}{e.day:6d}{e.hour:6d}{e.minute:6d}{e.second:6d}",
                       "EPOCH OF FIRST MAP"))
    out += [
        rec(f"{7200:6d}", "INTERVAL"),
        rec(f"{len(maps):6d}", "# OF MAPS IN FILE"),
        rec(f"  {450.0:6.1f}{450.0:6.1f}{0.0:6.1f}", "HGT1 / HGT2 / DHGT"),
        rec(f"  {LAT1:6.1f}{LAT2:6.1f}{DLAT:6.1f}", "LAT1 / LAT2 / DLAT"),
        rec(f"  {LON1:6.1f}{LON2:6.1f}{DLON:6.1f}", "LON1 / LON2 / DLON"),
        rec(f"{exponent:6d}", "EXPONENT"),
        rec("", "END OF HEADER"),
    ]
    factor = 10.0 ** exponent
    for n, m in enumerate(maps, start=1):
        e = m.epoch
        out.append(rec(f"{n:6d}", "START OF TEC MAP"))
        out.append(rec(f"{e.year:6d}{e.month:6d}{e.day:6d}{e.hour:6d}{e.minute:6d}{e.second:6d}",
                       "EPOCH OF CURRENT MAP"))
        for r in range(N_LAT):
            lat = LAT1 + r * DLAT
            out.append(rec(f"  {lat:6.1f}{LON1:6.1f}{LON2:6.1f}{DLON:6.1f}{450.0:6.1f}", "LAT/LON1/LON2/DLON/H"))
            ints = [int(round(v / factor)) for v in m.grid[r]]
            for k in range(0, N_LON, 16):
                out.append("".join(f"{v:5d}" for v in ints[k:k + 16]))
        out.append(rec(f"{n:6d}", "END OF TEC MAP"))
    out.append(rec("", "END OF FILE"))
    return "\n".join(out) + "\n"
