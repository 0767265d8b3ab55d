"""Command-line entry point: synth, ingest, train, eval.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import calendar
import csv
import datetime as dt
import glob
import sys
import typing
from dataclasses import fields
from pathlib import Path

import numpy as np

from .architectures import REFERENCE_PARAM_COUNTS, ArchKind
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .data.dataset import DatasetFormatError, TecDataset, load_dataset, prepare, save_dataset
from .data.ionex import IonexError, parse_ionex
from .data.preprocess import HELIOCENTRIC, resize_to_72, roll_to_geographic
from .data.synth import SynthConfig, synth_arrays
from .forecaster import ForecastScheme
from .heatmap import export_heatmap
from .metrics import (ensure_dir, evaluate, summary_rows, write_frame_csv, write_horizon_csv, write_sequence_csv,
                      write_summary_csv)
from .trainer import HeldOut, TrainConfig, TrainingDiverged, eval_indices, held_out, multi_run, prepared_splits


class UsageError(Exception):
    pass


# -- config files ------------------------------------------------------

# keys a config file may carry besides the TrainConfig fields
EXTRA_KEYS = {"dataset": str, "out": str, "workers": int}


def _field_types() -> dict[str, type]:
    hints = typing.get_type_hints(TrainConfig)
    out = {}
    for f in fields(TrainConfig):
        t = hints[f.name]
        args = [a for a in typing.get_args(t) if a is not type(None)]
        out[f.name] = args[0] if args else t
    return {**out, **EXTRA_KEYS}


def _coerce(key: str, text: str, kind: type):
    text = text.strip()
    if text.lower() in ("none", ""):
        return None
    try:
        if kind is bool:
            if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return text.lower() in ("true", "1", "yes")
        if key == "train_until":
            return parse_when(text, end_of_day=True)
        return kind(text)
    except ValueError:
        raise UsageError(f"bad value for {key}: {text!r}") from None


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment; unknown keys are rejected."""
    types = _field_types()
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e.strerror}") from None
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise UsageError(f"{path}:{n}: unknown key {key!r}")
        values[key] = _coerce(key, value, types[key])
    return values


def write_config_echo(values: dict, path) -> None:
    with open(path, "w") as fh:
        for k, v in values.items():
            fh.write(f"{k} = {v}\n")


def parse_when(text: str, end_of_day: bool = False) -> int:
    """Unix seconds from an integer or an ISO date/datetime (UTC).

    A bare date with ``end_of_day`` means the last second of that day.
    """
    text = text.strip()
    if text.lstrip("-").isdigit():
        return int(text)
    try:
        when = dt.datetime.fromisoformat(text)
    except ValueError:
        raise UsageError(f"cannot parse date {text!r}") from None
    secs = calendar.timegm(when.utctimetuple()) if when.tzinfo else calendar.timegm(when.timetuple())
    if end_of_day and len(text) <= 10:
        secs += 86400 - 1
    return secs


# -- commands ----------------------------------------------------------

def cmd_synth(args) -> int:
    if args.frames < 60:
        raise UsageError(f"--frames must be at least 60 (one sequence), got {args.frames}")
    cfg = SynthConfig(frames=args.frames)
    if args.anomalies is not None:
        cfg.anomalies = args.anomalies
    if args.noise is not None:
        cfg.noise = args.noise
    if args.drift is not None:
        cfg.drift = args.drift
    cfg.__post_init__()
    frames, epochs = synth_arrays(cfg, args.seed)
    save_dataset(TecDataset(frames, epochs), args.out)
    print(f"wrote {len(frames)} frames to {args.out}; values {frames.min():.4f} .. {frames.max():.4f} TECU")
    return 0


def cmd_ingest(args) -> int:
    train_until = parse_when(args.train_until, end_of_day=True)
    test_from = parse_when(args.test_from) if args.test_from else None
    if test_from is not None and test_from <= train_until:
        raise UsageError("--test-from must come after --train-until")
    paths = sorted({p for pattern in args.ionex for p in glob.glob(pattern)})
    if not paths:
        raise UsageError(f"no files match {args.ionex}")
    maps = []
    for p in paths:
        maps.extend(resize_to_72(r) for r in parse_ionex(Path(p).read_text(), source=p))
    maps.sort(key=lambda m: m.epoch)
    epochs = [m.epoch for m in maps]
    if len(set(epochs)) != len(epochs):
        raise RuntimeError("duplicate epochs across input files")
    if test_from is not None:
        maps = [m for m in maps if m.epoch <= train_until or m.epoch >= test_from]
    ds = prepare(TecDataset.from_maps(maps), train_until)
    save_dataset(ds, args.out)
    n_train = int(np.sum(ds.epochs <= train_until))
    print(f"wrote {ds.n_frames} frames ({n_train} train, {ds.n_frames - n_train} test) to {args.out}; "
          f"max_train {ds.max_train:.4f} TECU; {len(ds)} sequences")
    return 0


_TRAIN_FLAGS = {
    "arch": "arch", "scheme": "scheme", "horizon": "horizon", "loss": "loss", "lr": "learning_rate",
    "batch_size": "batch_size", "epochs": "epochs", "seed": "seed", "runs": "runs", "cell": "cell",
    "train_until": "train_until", "train_fraction": "train_fraction", "train_stride": "train_stride",
    "eval_sequences": "eval_sequences", "eval_every": "eval_every", "warmup_grad": "warmup_grad",
    "clip_norm": "clip_norm", "dataset": "dataset", "out": "out", "workers": "workers",
}


def _load(path) -> TecDataset:
    if not path:
        raise UsageError("--dataset is required")
    if not Path(path).is_file():
        raise UsageError(f"dataset {path} does not exist")
    return load_dataset(path)


def cmd_train(args) -> int:
    values = read_config(args.config) if args.config else {}
    for flag, key in _TRAIN_FLAGS.items():
        v = getattr(args, flag)
        if v is not None:
            values[key] = parse_when(v, end_of_day=True) if key == "train_until" else v
    dataset = _load(values.get("dataset"))
    out = ensure_dir(values.get("out") or "run")
    workers = values.get("workers") or 1
    cfg = TrainConfig(**{k: v for k, v in values.items() if k not in EXTRA_KEYS and v is not None})
    write_config_echo({**cfg.as_dict(), "dataset": values["dataset"], "out": str(out), "workers": workers},
                      out / "config.txt")
    print(f"training {cfg.arch} / {cfg.scheme}, horizon {cfg.horizon}, {cfg.runs} run(s)")
    try:
        stats, models, hists = multi_run(cfg, dataset, workers=workers)
    except TrainingDiverged as e:
        print(f"error: training diverged: {e}", file=sys.stderr)
        return 1
    for r, (m, h) in enumerate(zip(models, hists)):
        save_checkpoint(m, out / f"model_run{r}.ckpt", cfg.scheme, cfg.horizon)
        h.write_csv(out / f"history_run{r}.csv")
    with open(out / "runs.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("run", "seed", "test_rms", "baseline_rms", "blurred_rms"))
        for r, h in enumerate(hists):
            w.writerow([r, cfg.seed + r, f"{h.final_test_rms:.9g}", f"{h.baseline_rms:.9g}", f"{h.blurred_rms:.9g}"])
    write_summary_csv([("runs", float(cfg.runs)), ("mean_test_rms", stats.mean), ("std_test_rms", stats.std),
                       ("best_run", float(stats.best)), ("best_test_rms", stats.per_run[stats.best]),
                       ("baseline_rms", hists[0].baseline_rms), ("blurred_rms", hists[0].blurred_rms)],
                      out / "summary.csv")
    print(f"test RMS {stats.mean:.4f} +/- {stats.std:.4f} TECU (best run {stats.best}: "
          f"{stats.per_run[stats.best]:.4f}); periodic baseline {hists[0].baseline_rms:.4f}")
    return 0


def _geo(frame: np.ndarray, epoch: int, space: str) -> np.ndarray:
    return roll_to_geographic(frame, epoch) if space == HELIOCENTRIC else frame


def _write_samples(ho: HeldOut, test_ds: TecDataset, idx: np.ndarray, out: Path, n: int) -> None:
    horizon = ho.preds.shape[1]
    for j in range(min(n, len(idx))):
        start = int(test_ds.starts[idx[j]])
        for k in sorted({1, horizon}):
            epoch = int(test_ds.epochs[start + test_ds.input_len + k - 1])
            p = _geo(ho.preds[j, k - 1, 0], epoch, test_ds.space)
            t = _geo(ho.targets[j, k - 1, 0], epoch, test_ds.space)
            export_heatmap(p, out / f"seq{j}_k{k}_pred.pgm")
            export_heatmap(t, out / f"seq{j}_k{k}_target.pgm")
            export_heatmap(p - t, out / f"seq{j}_k{k}_diff.pgm")


def cmd_eval(args) -> int:
    if not args.baseline and not args.checkpoint:
        raise UsageError("give --checkpoint PATH or --baseline")
    dataset = _load(args.dataset)
    if args.checkpoint and not Path(args.checkpoint).is_file():
        raise UsageError(f"checkpoint {args.checkpoint} does not exist")
    model = meta = None
    if args.checkpoint:
        model, meta = load_checkpoint(args.checkpoint, expected=args.arch)
    horizon = args.horizon or (meta.horizon if meta else 12)
    until = parse_when(args.train_until, end_of_day=True) if args.train_until else None
    cfg = TrainConfig(horizon=horizon, train_until=until, train_fraction=args.train_fraction)
    _, test_ds = prepared_splits(cfg, dataset)
    if len(test_ds) == 0:
        raise RuntimeError("no held-out sequences after the split epoch")
    idx = np.arange(len(test_ds))
    if args.sequences:
        idx = eval_indices(len(test_ds), args.sequences)
    sub_ds = test_ds.subset(idx)
    ho = held_out(model, meta.scheme if meta else None, sub_ds, horizon)
    report = evaluate(ho.preds, ho.targets, ho.baseline, args.latitude or ())
    blurred = evaluate(ho.blurred, ho.targets, ho.baseline)
    out = ensure_dir(args.out)
    rows = summary_rows(report)
    rows.append(("blurred_baseline_global_mean_rms", blurred.global_rms))
    rows.append(("sequences", float(len(idx))))
    if model is not None:
        n = model.count_params()
        ref = REFERENCE_PARAM_COUNTS[model.kind]
        rows += [("param_count", float(n)), ("param_count_reference", float(ref)),
                 ("param_count_mismatch", float(n - ref))]
        if n != ref:
            print(f"note: {model.kind.value} has {n} parameters; the reference architecture has {ref}")
    write_summary_csv(rows, out / "summary.csv")
    write_frame_csv(report, out / "frames.csv")
    write_horizon_csv(report, out / "horizon.csv", smooth_window=args.smooth)
    write_sequence_csv(report, out / "sequences.csv", smooth_window=args.smooth)
    _write_samples(ho, sub_ds, np.arange(len(idx)), out, args.samples)
    label = "periodic baseline" if model is None else f"{meta.kind.value}/{meta.scheme.value}"
    print(f"{label}: global mean RMS {report.global_rms:.4f} TECU over {len(idx)} sequences, "
          f"periodic baseline {report.baseline_global_rms:.4f}, horizon {horizon}")
    return 0


# -- parser ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tecforecast", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic TECSEQ1 dataset")
    s.add_argument("--frames", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--anomalies", type=int)
    s.add_argument("--noise", type=float)
    s.add_argument("--drift", type=float)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("ingest", help="convert IONEX files into a prepared TECSEQ1 dataset")
    s.add_argument("--ionex", action="append", required=True, help="glob; may repeat")
    s.add_argument("--train-until", required=True, help="last training date (ISO date or Unix seconds)")
    s.add_argument("--test-from", help="first test date; frames in between are dropped")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("train", help="train one or more models")
    s.add_argument("--config", help="key = value file; flags override it")
    s.add_argument("--dataset")
    s.add_argument("--out")
    s.add_argument("--arch", choices=[k.value for k in ArchKind])
    s.add_argument("--scheme", choices=[k.value for k in ForecastScheme])
    s.add_argument("--horizon", type=int)
    s.add_argument("--loss", choices=["l1", "l2"])
    s.add_argument("--lr", type=float)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--runs", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--cell", choices=["lstm", "gru"])
    s.add_argument("--train-until")
    s.add_argument("--train-fraction", type=float)
    s.add_argument("--train-stride", type=int)
    s.add_argument("--eval-sequences", type=int)
    s.add_argument("--eval-every", type=int)
    s.add_argument("--warmup-grad", action="store_const", const=True)
    s.add_argument("--clip-norm", type=float)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="score a checkpoint (or the periodic baseline) on held-out sequences")
    s.add_argument("--checkpoint")
    s.add_argument("--baseline", action="store_true", help="score the periodic baseline itself")
    s.add_argument("--dataset", required=True)
    s.add_argument("--out", default="eval")
    s.add_argument("--arch", choices=[k.value for k in ArchKind], help="reject checkpoints of another kind")
    s.add_argument("--horizon", type=int)
    s.add_argument("--latitude", type=float, action="append")
    s.add_argument("--train-until")
    s.add_argument("--train-fraction", type=float, default=0.75)
    s.add_argument("--sequences", type=int, help="cap on evenly spaced held-out sequences")
    s.add_argument("--smooth", type=int, default=12, help="sliding-window length for smoothed curves")
    s.add_argument("--samples", type=int, default=2, help="sequences exported as PGM heatmaps")
    s.set_defaults(func=cmd_eval)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"{ap.prog} {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (IonexError, DatasetFormatError, CheckpointError, ValueError, RuntimeError, OSError) as e:
        print(f"{ap.prog} {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
