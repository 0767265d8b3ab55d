"""TECCKPT1 checkpoint files.

Layout (little-endian)::

    8s   magic  b"TECCKPT1"
    u32  version (1)
    u8   arch kind code
    u8   scheme code
    u32  horizon
    u32  n_entries
    per entry: u32 name length, UTF-8 name, u32 rank, rank * u32 extents, f32 data
    u64  checksum: first 8 bytes of blake2b over everything between magic and checksum

Parameters are written in the model's registration order, so names and
state-slot assignment survive a round trip.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .architectures import MAP_SIZE, ArchKind, Model, build_model
from .forecaster import ForecastScheme

MAGIC = b"TECCKPT1"
VERSION = 1
_HEAD = struct.Struct("<IBBII")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


class CheckpointError(ValueError):
    pass


@dataclass
class CheckpointMeta:
    kind: ArchKind
    scheme: ForecastScheme
    horizon: int


def _checksum(payload: bytes) -> int:
    return _U64.unpack(hashlib.blake2b(payload, digest_size=8).digest())[0]


def checkpoint_bytes(model: Model, scheme: ForecastScheme | str, horizon: int) -> bytes:
    if isinstance(scheme, str):
        scheme = ForecastScheme.parse(scheme)
    params = model.parameters()
    parts = [_HEAD.pack(VERSION, model.kind.code, scheme.code, horizon, len(params))]
    for name, t in params.items():
        raw = name.encode("utf-8")
        parts.append(_U32.pack(len(raw)) + raw)
        parts.append(struct.pack(f"<I{t.ndim}I", t.ndim, *t.shape))
        parts.append(np.ascontiguousarray(t.data, dtype="<f4").tobytes())
    payload = b"".join(parts)
    return MAGIC + payload + _U64.pack(_checksum(payload))


def save_checkpoint(model: Model, path, scheme: ForecastScheme | str, horizon: int) -> None:
    Path(path).write_bytes(checkpoint_bytes(model, scheme, horizon))


def read_entries(raw: bytes) -> tuple[CheckpointMeta, dict[str, np.ndarray]]:
    """Validate a checkpoint image and return its header plus the named float32 arrays."""
    if len(raw) < len(MAGIC) + _HEAD.size + _U64.size:
        raise CheckpointError("file too short for a checkpoint")
    if raw[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"bad magic {raw[:len(MAGIC)]!r}")
    payload, tail = raw[len(MAGIC):-_U64.size], raw[-_U64.size:]
    if _U64.unpack(tail)[0] != _checksum(payload):
        raise CheckpointError("checksum mismatch; file is corrupted")
    version, arch, scheme, horizon, n = _HEAD.unpack_from(payload)
    if version != VERSION:
        raise CheckpointError(f"unsupported version {version}")
    try:
        meta = CheckpointMeta(ArchKind.from_code(arch), ForecastScheme.from_code(scheme), horizon)
    except IndexError:
        raise CheckpointError(f"unknown arch/scheme codes {arch}/{scheme}") from None
    off = _HEAD.size
    entries: dict[str, np.ndarray] = {}
    try:
        for _ in range(n):
            (ln,) = _U32.unpack_from(payload, off)
            off += 4
            name = payload[off:off + ln].decode("utf-8")
            off += ln
            (rank,) = _U32.unpack_from(payload, off)
            shape = struct.unpack_from(f"<{rank}I", payload, off + 4)
            off += 4 + 4 * rank
            count = int(np.prod(shape, dtype=np.int64))
            if off + 4 * count > len(payload):
                raise CheckpointError(f"entry {name!r} runs past the end of the file")
            entries[name] = np.frombuffer(payload, dtype="<f4", count=count, offset=off).reshape(shape).copy()
            off += 4 * count
    except struct.error:
        raise CheckpointError("truncated entry table") from None
    if off != len(payload):
        raise CheckpointError(f"{len(payload) - off} trailing bytes after the entry table")
    return meta, entries


def _matches(model: Model, entries: dict[str, np.ndarray]) -> bool:
    params = model.parameters()
    return list(params) == list(entries) and all(params[k].shape == entries[k].shape for k in params)


def load_checkpoint(path, expected: ArchKind | str | None = None, size: int = MAP_SIZE) -> tuple[Model, CheckpointMeta]:
    """Rebuild the model stored at ``path``; the recurrent cell type is inferred from kernel shapes."""
    meta, entries = read_entries(Path(path).read_bytes())
    if isinstance(expected, str):
        expected = ArchKind.parse(expected)
    if expected is not None and expected is not meta.kind:
        raise CheckpointError(f"checkpoint holds a {meta.kind.value} model, expected {expected.value}")
    for cell in ("lstm", "gru"):
        model = build_model(meta.kind, seed=0, size=size, cell=cell)
        if _matches(model, entries):
            for name, t in model.parameters().items():
                t.data[...] = entries[name]
            return model, meta
    raise CheckpointError(f"parameter table does not match any {meta.kind.value} layout")
