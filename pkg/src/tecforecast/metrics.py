"""RMS error family for TEC map forecasts, all in TECU.

Arrays of forecasts are shaped (S, P, H, W) or (S, P, 1, H, W): S sequences,
P forecast steps. Reductions run in float64 with a fixed order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data.preprocess import latitudes


def _maps(a, squeeze_rank: int = 5) -> np.ndarray:
    # drop the singleton channel axis of (..., 1, H, W) inputs of the given rank
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == squeeze_rank and a.shape[-3] == 1:
        a = a[..., 0, :, :]
    return a


def _pair(pred, target, squeeze_rank: int = 5) -> tuple[np.ndarray, np.ndarray]:
    p, t = _maps(pred, squeeze_rank), _maps(target, squeeze_rank)
    if p.shape != t.shape:
        raise ValueError(f"prediction {p.shape} and target {t.shape} extents differ")
    return p, t


def frame_rms(pred, target) -> np.ndarray:
    """RMS over the last two axes; one value per map."""
    p, t = _pair(pred, target)
    d = p - t
    return np.sqrt(np.mean(d * d, axis=(-2, -1)))


def rms_map(pred, target) -> float:
    p, t = _pair(pred, target, squeeze_rank=3)
    if p.ndim != 2:
        raise ValueError(f"rms_map takes single maps, got {p.shape}")
    return float(frame_rms(p, t))


def mean_rms_sequence(pred_seq, target_seq) -> float:
    """Mean over the frames of one sequence of the per-map RMS."""
    p, t = _pair(pred_seq, target_seq, squeeze_rank=4)
    if p.ndim != 3:
        raise ValueError(f"expected (frames, H, W), got {p.shape}")
    return float(np.mean(frame_rms(p, t)))


def mean_rms_per_horizon(preds, targets, k: int) -> float:
    """Mean over sequences of the RMS of forecast step ``k`` (1-based)."""
    p, t = _pair(preds, targets)
    if not 1 <= k <= p.shape[1]:
        raise ValueError(f"step {k} outside 1..{p.shape[1]}")
    return float(np.mean(frame_rms(p[:, k - 1], t[:, k - 1])))


def horizon_curve(preds, targets) -> np.ndarray:
    return np.mean(frame_rms(preds, targets), axis=0)


def global_mean_rms(preds, targets) -> float:
    """Mean per-map RMS over every frame of every sequence."""
    p, t = _pair(preds, targets)
    if p.shape[0] == 0:
        raise ValueError("empty test set")
    return float(np.mean(frame_rms(p, t)))


def mean_sequence_rms_sum(preds, targets) -> float:
    """Per-map RMS summed over frames, then averaged over sequences only.

    This is the normalization as literally written for the global score; it
    equals ``global_mean_rms`` times the number of forecast steps.
    """
    p, t = _pair(preds, targets)
    if p.shape[0] == 0:
        raise ValueError("empty test set")
    return float(np.sum(frame_rms(p, t)) / p.shape[0])


def latitude_row(latitude_deg: float, height: int = 72) -> int:
    lats = latitudes(height)
    if not lats[-1] <= latitude_deg <= lats[0]:
        raise ValueError(f"latitude {latitude_deg} outside grid range [{lats[-1]}, {lats[0]}]")
    return int(np.argmin(np.abs(lats - latitude_deg)))


def latitude_slice_rms(preds, targets, latitude_deg: float) -> float:
    """Global mean RMS with every map reduced to the pixel row nearest ``latitude_deg``."""
    p, t = _pair(preds, targets)
    if p.shape[-2] == 1:
        row = 0
    else:
        row = latitude_row(latitude_deg, p.shape[-2])
    return global_mean_rms(p[..., row:row + 1, :], t[..., row:row + 1, :])


def cosine_weights(height: int = 72) -> np.ndarray:
    """Per-row area weights proportional to cos(latitude), summing to 1 over rows."""
    w = np.cos(np.radians(latitudes(height)))
    return w / w.sum()


def weighted_mean_tec(maps) -> np.ndarray:
    """Area-weighted mean of each map (cos-latitude rows, equal columns)."""
    m = _maps(maps)
    w = cosine_weights(m.shape[-2])
    return np.einsum("...hw,h->...", m, w) / m.shape[-1]


def global_mean_tec_rms(preds, targets) -> float:
    """RMS over all frames of the difference between area-weighted map means."""
    p, t = _pair(preds, targets)
    if p.shape[0] == 0:
        raise ValueError("empty test set")
    d = weighted_mean_tec(p) - weighted_mean_tec(t)
    n_seq, n_frames = d.shape[:2]
    return float(np.sqrt(np.sum(d * d / (n_seq * n_frames))))


def smooth_curve(values, window: int) -> np.ndarray:
    """Centered moving average; the window is truncated at both ends."""
    if window < 1:
        raise ValueError("window must be >= 1")
    v = np.asarray(values, dtype=np.float64)
    left, right = (window - 1) // 2, window // 2
    kernel = np.ones(window)
    sums = np.convolve(np.pad(v, (left, right)), kernel, mode="valid")
    counts = np.convolve(np.pad(np.ones(len(v)), (left, right)), kernel, mode="valid")
    return sums / counts


def relative_to_baseline(model_series, baseline_series) -> np.ndarray:
    """model / baseline - 1; negative means better than the baseline."""
    m = np.asarray(model_series, dtype=np.float64)
    b = np.asarray(baseline_series, dtype=np.float64)
    if m.shape != b.shape:
        raise ValueError(f"series lengths differ: {m.shape} vs {b.shape}")
    if np.any(b <= 0):
        raise ValueError("baseline series has a non-positive point")
    return m / b - 1.0


@dataclass
class MetricsReport:
    sequence_rms: np.ndarray  # per-sequence mean RMS
    horizon_rms: np.ndarray  # per forecast step
    global_rms: float
    global_rms_sum: float  # literal per-sequence normalization
    baseline_sequence_rms: np.ndarray
    baseline_horizon_rms: np.ndarray
    baseline_global_rms: float
    relative_sequence: np.ndarray
    relative_horizon: np.ndarray
    frame_rms: np.ndarray = field(repr=False)  # (S, P)
    baseline_frame_rms: np.ndarray = field(repr=False)
    latitude_rms: dict[float, float] = field(default_factory=dict)
    global_tec_rms: float | None = None
    baseline_global_tec_rms: float | None = None


def evaluate(preds, targets, baseline, latitudes_deg=()) -> MetricsReport:
    """Score forecasts and a baseline against the same targets (TECU arrays)."""
    p, t = _pair(preds, targets)
    b, _ = _pair(baseline, targets)
    fr, bfr = frame_rms(p, t), frame_rms(b, t)
    seq, bseq = fr.mean(axis=1), bfr.mean(axis=1)
    hor, bhor = fr.mean(axis=0), bfr.mean(axis=0)
    return MetricsReport(
        sequence_rms=seq, horizon_rms=hor, global_rms=float(fr.mean()),
        global_rms_sum=mean_sequence_rms_sum(p, t),
        baseline_sequence_rms=bseq, baseline_horizon_rms=bhor, baseline_global_rms=float(bfr.mean()),
        relative_sequence=relative_to_baseline(seq, bseq), relative_horizon=relative_to_baseline(hor, bhor),
        frame_rms=fr, baseline_frame_rms=bfr,
        latitude_rms={float(lat): latitude_slice_rms(p, t, lat) for lat in latitudes_deg},
        global_tec_rms=global_mean_tec_rms(p, t), baseline_global_tec_rms=global_mean_tec_rms(b, t),
    )


FRAME_COLUMNS = ("sequence_id", "horizon_k", "rms", "baseline_rms")
SUMMARY_COLUMNS = ("metric", "value")


def write_frame_csv(report: MetricsReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FRAME_COLUMNS)
        s, p = report.frame_rms.shape
        for i in range(s):
            for k in range(p):
                w.writerow([i, k + 1, f"{report.frame_rms[i, k]:.9g}", f"{report.baseline_frame_rms[i, k]:.9g}"])


def summary_rows(report: MetricsReport) -> list[tuple[str, float]]:
    rows = [
        ("global_mean_rms", report.global_rms),
        ("global_mean_rms_sum_per_sequence", report.global_rms_sum),
        ("baseline_global_mean_rms", report.baseline_global_rms),
        ("relative_global", report.global_rms / report.baseline_global_rms - 1.0),
        ("mean_sequence_rms", float(np.mean(report.sequence_rms))),
    ]
    if report.global_tec_rms is not None:
        rows.append(("global_mean_tec_rms", report.global_tec_rms))
        rows.append(("baseline_global_mean_tec_rms", report.baseline_global_tec_rms))
    for lat, v in sorted(report.latitude_rms.items()):
        rows.append((f"latitude_rms_{lat:g}", v))
    for k, v in enumerate(report.horizon_rms, start=1):
        rows.append((f"horizon_rms_k{k}", float(v)))
    return rows


def write_summary_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for name, value in rows:
            w.writerow([name, value if isinstance(value, str) else f"{value:.9g}"])


def write_horizon_csv(report: MetricsReport, path, smooth_window: int | None = None) -> None:
    rel = report.relative_horizon
    smooth = smooth_curve(rel, smooth_window) if smooth_window else rel
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("horizon_k", "rms", "baseline_rms", "relative", "relative_smoothed"))
        for k in range(len(rel)):
            w.writerow([k + 1, f"{report.horizon_rms[k]:.9g}", f"{report.baseline_horizon_rms[k]:.9g}",
                        f"{rel[k]:.9g}", f"{smooth[k]:.9g}"])


def write_sequence_csv(report: MetricsReport, path, smooth_window: int = 12) -> None:
    rel = report.relative_sequence
    smooth = smooth_curve(rel, smooth_window)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("sequence_id", "rms", "baseline_rms", "relative", "relative_smoothed"))
        for i in range(len(rel)):
            w.writerow([i, f"{report.sequence_rms[i]:.9g}", f"{report.baseline_sequence_rms[i]:.9g}",
                        f"{rel[i]:.9g}", f"{smooth[i]:.9g}"])


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
