"""Training loop, held-out scoring and multi-run statistics."""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .architectures import ArchKind, Model, build_model
from .autodiff import AdamState, Tensor, abs_, adam_step, clip_grad_norm, mean_all, mul, sub
from .data.dataset import TecDataset, prepare, split, split_epoch
from .data.preprocess import denormalize
from .forecaster import MAX_HORIZON, ForecastScheme, blurred_references, forecast_array, periodic_baseline, predict
from .metrics import frame_rms


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, epoch: int, loss: float):
        super().__init__(f"non-finite loss {loss} at step {step} (epoch {epoch})")
        self.step, self.epoch, self.loss = step, epoch, loss


@dataclass
class TrainConfig:
    arch: str = "dcnn121"
    scheme: str = "residual"
    horizon: int = 12
    loss: str = "l1"
    learning_rate: float = 1e-3
    batch_size: int = 16
    epochs: int = 50
    seed: int = 0
    runs: int = 10
    cell: str = "lstm"
    train_until: int | None = None  # last training epoch (Unix seconds)
    train_fraction: float = 0.75  # used when train_until is unset
    train_stride: int = 1  # keep every n-th training window
    eval_sequences: int = 64  # cap on held-out windows scored per epoch
    eval_every: int = 1  # epochs between held-out scores; 0 scores only at the end
    warmup_grad: bool = False  # backprop through the 35 warm-up steps too
    clip_norm: float | None = None

    def __post_init__(self):
        self.arch = ArchKind.parse(self.arch).value if isinstance(self.arch, str) else self.arch.value
        self.scheme = ForecastScheme.parse(self.scheme).value if isinstance(self.scheme, str) else self.scheme.value
        if not 1 <= self.horizon <= MAX_HORIZON:
            raise ValueError(f"horizon must be in 1..{MAX_HORIZON}")
        if self.loss not in ("l1", "l2"):
            raise ValueError(f"loss must be l1 or l2, got {self.loss!r}")
        if self.cell not in ("lstm", "gru"):
            raise ValueError(f"cell must be lstm or gru, got {self.cell!r}")
        for name in ("batch_size", "epochs", "runs", "train_stride", "eval_sequences"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.eval_every < 0:
            raise ValueError("eval_every must be >= 0")

    @property
    def kind(self) -> ArchKind:
        return ArchKind.parse(self.arch)

    @property
    def forecast_scheme(self) -> ForecastScheme:
        return ForecastScheme.parse(self.scheme)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class History:
    step_loss: list[float] = field(default_factory=list)
    epoch_loss: list[float] = field(default_factory=list)
    test_rms: list[float] = field(default_factory=list)  # NaN on epochs that were not scored
    baseline_rms: float = float("nan")
    blurred_rms: float = float("nan")
    max_train: float = float("nan")

    @property
    def final_test_rms(self) -> float:
        return self.test_rms[-1]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("epoch", "train_loss", "test_rms", "baseline_rms", "blurred_rms"))
            for e, (lo, te) in enumerate(zip(self.epoch_loss, self.test_rms), start=1):
                w.writerow([e, f"{lo:.9g}", f"{te:.9g}", f"{self.baseline_rms:.9g}", f"{self.blurred_rms:.9g}"])


def sequence_loss(pred: Tensor, target, kind: str = "l1") -> Tensor:
    """Mean absolute (l1) or squared (l2) error over every element of the prediction frames."""
    if not isinstance(target, Tensor):
        target = Tensor(np.asarray(target, dtype=pred.dtype))
    if pred.shape != target.shape:
        raise ValueError(f"prediction {pred.shape} and target {target.shape} extents differ")
    d = sub(pred, target)
    if kind == "l1":
        return mean_all(abs_(d))
    if kind == "l2":
        return mean_all(mul(d, d))
    raise ValueError(f"unknown loss {kind!r}")


def prepared_splits(config: TrainConfig, dataset: TecDataset) -> tuple[TecDataset, TecDataset]:
    """Normalize (when needed) and split into training and held-out windows."""
    cut = split_epoch(dataset, config.train_until, config.train_fraction)
    ds = dataset if dataset.normalized else prepare(dataset, cut)
    train_ds, test_ds = split(ds, cut)
    if len(train_ds) == 0:
        raise ValueError("no training sequences before the split epoch")
    return train_ds, test_ds


def eval_indices(n: int, cap: int) -> np.ndarray:
    """At most ``cap`` evenly spaced window indices out of ``n``."""
    if n <= cap:
        return np.arange(n)
    return np.unique(np.rint(np.linspace(0, n - 1, cap)).astype(np.int64))


@dataclass
class HeldOut:
    preds: np.ndarray  # (S, P, 1, H, W) TECU
    targets: np.ndarray
    baseline: np.ndarray  # periodic baseline
    blurred: np.ndarray  # blurred periodic baseline (zero-correction residual forecast)


def held_out(model: Model | None, scheme: ForecastScheme | str | None, test_ds: TecDataset, horizon: int,
             cap: int | None = None, batch_size: int = 16) -> HeldOut:
    """Forecast the held-out windows and de-normalize everything to TECU.

    With ``model=None`` the periodic baseline stands in for the forecast.
    """
    if len(test_ds) == 0:
        raise ValueError("empty test set")
    idx = eval_indices(len(test_ds), cap) if cap else np.arange(len(test_ds))
    inputs, targets = test_ds.batch(idx, horizon)
    if targets.shape[1] < horizon:
        raise ValueError(f"windows hold {targets.shape[1]} target frames, horizon {horizon} requested")
    m = test_ds.max_train if test_ds.normalized else None

    def tecu(a):
        return denormalize(a, m) if m else np.asarray(a)

    baseline = periodic_baseline(inputs, horizon)
    preds = baseline if model is None else forecast_array(model, scheme, inputs, horizon, batch_size)
    return HeldOut(tecu(preds), tecu(targets), tecu(baseline),
                   tecu(blurred_references(inputs, horizon)))


def train(config: TrainConfig, dataset: TecDataset, log=None) -> tuple[Model, History]:
    """Optimize a fresh model; deterministic given ``config.seed``."""
    train_ds, test_ds = prepared_splits(config, dataset)
    windows = np.arange(0, len(train_ds), config.train_stride)
    model = build_model(config.kind, seed=config.seed, size=train_ds.frames.shape[-1], cell=config.cell)
    params = list(model.parameters().values())
    opt = AdamState.for_params(params, learning_rate=config.learning_rate)
    hist = History(max_train=train_ds.max_train)
    scheme = config.forecast_scheme
    step = 0
    for epoch in range(config.epochs):
        rng = np.random.default_rng([config.seed, epoch, 0x5EED])
        order = windows[rng.permutation(len(windows))]
        losses = []
        for s in range(0, len(order), config.batch_size):
            inputs, targets = train_ds.batch(order[s:s + config.batch_size], config.horizon)
            for p in params:
                p.grad = None
            pred = predict(model, scheme, inputs, config.horizon, warmup_grad=config.warmup_grad)
            loss = sequence_loss(pred, targets, config.loss)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDiverged(step, epoch, value)
            loss.backward()
            grads = [p.grad for p in params]
            if config.clip_norm:
                clip_grad_norm(grads, config.clip_norm)
            adam_step(params, grads, opt)
            hist.step_loss.append(value)
            losses.append(value)
            step += 1
        hist.epoch_loss.append(float(np.mean(losses)))
        last = epoch == config.epochs - 1
        scored = len(test_ds) and (last or (config.eval_every and (epoch + 1) % config.eval_every == 0))
        if scored:
            ho = held_out(model, scheme, test_ds, config.horizon, config.eval_sequences)
            hist.test_rms.append(float(np.mean(frame_rms(ho.preds, ho.targets))))
            if np.isnan(hist.baseline_rms):
                hist.baseline_rms = float(np.mean(frame_rms(ho.baseline, ho.targets)))
                hist.blurred_rms = float(np.mean(frame_rms(ho.blurred, ho.targets)))
        else:
            hist.test_rms.append(float("nan"))
        if log:
            log(f"epoch {epoch + 1}/{config.epochs} loss {hist.epoch_loss[-1]:.6f} "
                f"test_rms {hist.test_rms[-1]:.4f} baseline {hist.baseline_rms:.4f}")
    return model, hist


@dataclass
class RunStats:
    per_run: list[float]
    mean: float
    std: float  # population standard deviation (divides by n)
    best: int  # index of the run with the lowest metric

    @classmethod
    def from_values(cls, values) -> "RunStats":
        v = np.asarray(values, dtype=np.float64)
        if v.size == 0:
            raise ValueError("no runs")
        return cls([float(x) for x in v], float(v.mean()), float(v.std()), int(np.argmin(v)))


def _one_run(args):
    config, dataset = args
    model, hist = train(config, dataset)
    return {k: t.data for k, t in model.parameters().items()}, hist


def multi_run(config: TrainConfig, dataset: TecDataset, workers: int = 1,
              ) -> tuple[RunStats, list[Model], list[History]]:
    """Train ``config.runs`` models with seeds seed+0 .. seed+runs-1 and aggregate final test RMS."""
    configs = [TrainConfig(**{**config.as_dict(), "seed": config.seed + r}) for r in range(config.runs)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_one_run, [(c, dataset) for c in configs]))
        models = []
        for c, (params, _) in zip(configs, results):
            m = build_model(c.kind, seed=c.seed, size=dataset.frames.shape[-1], cell=c.cell)
            for name, t in m.parameters().items():
                t.data[...] = params[name]
            models.append(m)
        hists = [h for _, h in results]
    else:
        runs = [train(c, dataset) for c in configs]
        models, hists = [m for m, _ in runs], [h for _, h in runs]
    return RunStats.from_values([h.final_test_rms for h in hists]), models, hists
