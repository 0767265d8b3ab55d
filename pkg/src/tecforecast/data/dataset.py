"""Frame store, 60-frame sequence windows, train/test split and the TECSEQ1 file format.

TECSEQ1 layout (little-endian)::

    8s   magic  b"TECSEQ1\\0"
    u32  version (1)
    u32  n_frames
    u32  height (72)
    u32  width (72)
    f32  max_train (0 when not normalized)
    u8   frame_space (0 geographic, 1 heliocentric)
    u8   normalized (0/1)
    per frame: i64 epoch (Unix seconds) + height*width f32, row-major,
               north row first, west column first
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .preprocess import (FRAME_SECONDS, GEOGRAPHIC, HELIOCENTRIC, SPACE_CODES, FrameSpaceError, TecMap,
                         normalize, roll_to_heliocentric)

SEQ_LEN = 60
INPUT_LEN = 36
MAGIC = b"TECSEQ1\0"
VERSION = 1
_HEADER = struct.Struct("<8sIIIIfBB")


class DatasetFormatError(ValueError):
    pass


@dataclass
class TecDataset:
    frames: np.ndarray  # (N, H, W) float32
    epochs: np.ndarray  # (N,) int64
    space: str = GEOGRAPHIC
    normalized: bool = False
    max_train: float = 0.0
    starts: np.ndarray = field(default=None)  # window start offsets
    seq_len: int = SEQ_LEN
    input_len: int = INPUT_LEN

    def __post_init__(self):
        self.frames = np.ascontiguousarray(self.frames, dtype=np.float32)
        self.epochs = np.asarray(self.epochs, dtype=np.int64)
        if self.frames.ndim != 3 or len(self.frames) != len(self.epochs):
            raise ValueError(f"frames {self.frames.shape} and epochs {self.epochs.shape} disagree")
        if self.space not in SPACE_CODES:
            raise ValueError(f"unknown frame space {self.space!r}")
        if self.starts is None:
            self.starts = contiguous_starts(self.epochs, self.seq_len)
        self.frames.setflags(write=False)

    @classmethod
    def from_maps(cls, maps: list[TecMap], **kw) -> "TecDataset":
        if not maps:
            raise ValueError("no maps")
        spaces = {m.space for m in maps}
        norms = {m.normalized for m in maps}
        if len(spaces) != 1 or len(norms) != 1:
            raise ValueError("maps mix frame spaces or normalization states")
        return cls(np.stack([m.grid for m in maps]), np.array([m.epoch for m in maps]), spaces.pop(),
                   norms.pop(), **kw)

    def __len__(self) -> int:
        return len(self.starts)

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def maps(self) -> list[TecMap]:
        return [TecMap(self.frames[i], int(self.epochs[i]), self.space, self.normalized)
                for i in range(self.n_frames)]

    def window(self, i: int) -> np.ndarray:
        """View (no copy) of the i-th sequence, shape (seq_len, H, W)."""
        s = int(self.starts[i])
        return self.frames[s:s + self.seq_len]

    def batch(self, indices, horizon: int) -> tuple[np.ndarray, np.ndarray]:
        """Stack windows as (inputs (B, 36, 1, H, W), targets (B, horizon, 1, H, W))."""
        w = np.stack([self.window(i) for i in indices])[:, :, None]
        return w[:, :self.input_len], w[:, self.input_len:self.input_len + horizon]

    def subset(self, windows) -> "TecDataset":
        """Same frames, restricted window list."""
        return TecDataset(self.frames, self.epochs, self.space, self.normalized, self.max_train,
                          np.asarray(self.starts)[np.asarray(windows, dtype=np.int64)], self.seq_len,
                          self.input_len)


def contiguous_starts(epochs: np.ndarray, seq_len: int = SEQ_LEN) -> np.ndarray:
    """Offsets of every stride-1 window whose frames are consecutive 2-hour epochs."""
    n = len(epochs)
    if n < seq_len:
        return np.zeros(0, dtype=np.int64)
    step_ok = np.diff(epochs) == FRAME_SECONDS
    # a window [s, s + seq_len) needs seq_len - 1 good steps
    bad = np.concatenate([[0], np.cumsum(~step_ok)])
    s = np.arange(n - seq_len + 1)
    return s[bad[s + seq_len - 1] - bad[s] == 0].astype(np.int64)


def build_sequences(frames, epochs=None, seq_len: int = SEQ_LEN, input_len: int = INPUT_LEN) -> TecDataset:
    """Wrap frames into a dataset of sliding windows (stride 1) that share frame storage."""
    if isinstance(frames, list):
        ds = TecDataset.from_maps(frames, seq_len=seq_len, input_len=input_len)
    else:
        frames = np.asarray(frames, dtype=np.float32)
        if epochs is None:
            epochs = FRAME_SECONDS * np.arange(len(frames), dtype=np.int64)
        ds = TecDataset(frames, epochs, seq_len=seq_len, input_len=input_len)
    if len(ds.frames) < seq_len:
        raise ValueError(f"need at least {seq_len} frames, got {len(ds.frames)}")
    if len(ds) == 0:
        raise ValueError(f"no run of {seq_len} contiguous 2-hour frames")
    return ds


def split_epoch(dataset: TecDataset, train_until: int | None = None, train_fraction: float = 0.75) -> int:
    """Last training epoch: ``train_until`` if given, else the epoch at ``train_fraction`` of the frames."""
    if train_until is not None:
        return int(train_until)
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    k = max(int(round(train_fraction * dataset.n_frames)) - 1, 0)
    return int(dataset.epochs[k])


def split(dataset: TecDataset, train_until: int, test_from: int | None = None) -> tuple[TecDataset, TecDataset]:
    """Windows lying wholly at or before ``train_until`` vs windows starting after it (and at/after ``test_from``)."""
    if test_from is not None and test_from <= train_until:
        raise ValueError("test period must start after the training period ends")
    starts = dataset.starts
    first = dataset.epochs[starts]
    last = dataset.epochs[starts + dataset.seq_len - 1]
    train = np.flatnonzero(last <= train_until)
    lower = train_until if test_from is None else test_from - 1
    test = np.flatnonzero(first > lower)
    return dataset.subset(train), dataset.subset(test)


def prepare(dataset: TecDataset, train_until: int) -> TecDataset:
    """Heliocentric transform plus normalization by the maximum over frames up to ``train_until``."""
    if dataset.normalized:
        raise FrameSpaceError("dataset is already normalized")
    frames = dataset.frames
    if dataset.space == GEOGRAPHIC:
        frames = roll_to_heliocentric(frames, dataset.epochs)
    train_mask = dataset.epochs <= train_until
    if not train_mask.any():
        raise ValueError("no training frames before the split epoch")
    max_train = float(frames[train_mask].max())
    return TecDataset(normalize(frames, max_train), dataset.epochs, HELIOCENTRIC, True, max_train,
                      seq_len=dataset.seq_len, input_len=dataset.input_len)


def dataset_bytes(dataset: TecDataset) -> bytes:
    n, h, w = dataset.frames.shape
    head = _HEADER.pack(MAGIC, VERSION, n, h, w, float(dataset.max_train), SPACE_CODES[dataset.space],
                        int(dataset.normalized))
    rec = np.dtype([("epoch", "<i8"), ("grid", "<f4", (h, w))])
    body = np.empty(n, dtype=rec)
    body["epoch"] = dataset.epochs
    body["grid"] = dataset.frames
    return head + body.tobytes()


def save_dataset(dataset: TecDataset, path) -> None:
    Path(path).write_bytes(dataset_bytes(dataset))


def load_dataset(path) -> TecDataset:
    return dataset_from_bytes(Path(path).read_bytes())


def dataset_from_bytes(raw: bytes) -> TecDataset:
    if len(raw) < _HEADER.size:
        raise DatasetFormatError("truncated header")
    magic, version, n, h, w, max_train, space, normalized = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise DatasetFormatError(f"unsupported version {version}")
    if space not in (0, 1) or normalized not in (0, 1):
        raise DatasetFormatError("bad flag byte")
    rec = np.dtype([("epoch", "<i8"), ("grid", "<f4", (h, w))])
    expected = _HEADER.size + n * rec.itemsize
    if len(raw) != expected:
        raise DatasetFormatError(f"truncated or oversized body: {len(raw)} bytes, expected {expected}")
    body = np.frombuffer(raw, dtype=rec, count=n, offset=_HEADER.size)
    return TecDataset(body["grid"].astype(np.float32), body["epoch"].astype(np.int64),
                      GEOGRAPHIC if space == 0 else HELIOCENTRIC, bool(normalized), float(max_train))
