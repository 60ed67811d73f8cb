"""Versioned binary checkpoints.

Layout (little-endian)::

    b"TGAECKPT"                     8-byte magic
    u32 version
    u32 len, utf-8 header           key=value lines: hyperparameters and flags
    repeated until EOF:
        u32 len, utf-8 tensor name
        u32 rank
        u64 dim * rank
        f64 * prod(dims)            raw values, row-major
"""

from __future__ import annotations

import dataclasses
import os
import struct
import tempfile

import numpy as np
import torch

from .model import TgaeConfig, TgaeModel

__all__ = [
    "MAGIC",
    "VERSION",
    "CheckpointError",
    "NotACheckpointError",
    "CheckpointVersionError",
    "TruncatedCheckpointError",
    "CheckpointShapeError",
    "save_checkpoint",
    "load_checkpoint",
    "read_checkpoint",
]

MAGIC = b"TGAECKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


class NotACheckpointError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


def _encode_header(cfg: TgaeConfig, extra: dict) -> bytes:
    items = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)}
    items.update(extra)
    return "".join(f"{k}={v}\n" for k, v in items.items()).encode("utf-8")


def _parse_value(field: dataclasses.Field, raw: str):
    if field.type in ("bool", bool):
        return raw == "True"
    if field.type in ("int", int):
        return int(raw)
    return raw


def save_checkpoint(m: TgaeModel, path, extra: dict | None = None) -> None:
    """Write ``m`` to ``path`` atomically (temp file in the same directory, then rename)."""
    header = _encode_header(m.cfg, extra or {})
    chunks = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(header)), header]
    for name, t in m.named_tensors().items():
        arr = np.ascontiguousarray(t.detach().cpu().numpy(), dtype="<f8")
        bname = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(bname)) + bname)
        chunks.append(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(arr.tobytes())
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".ckpt-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(b"".join(chunks))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedCheckpointError(f"checkpoint truncated while reading {what}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    @property
    def done(self) -> bool:
        return self.pos >= len(self.data)


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Raw header dict and named arrays of a checkpoint file."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise NotACheckpointError(f"{path} is not a checkpoint (bad magic)")
    r = _Reader(data)
    r.take(8, "magic")
    version = r.u32("version")
    if version != VERSION:
        raise CheckpointVersionError(f"checkpoint version {version} is not supported (expected {VERSION})")
    header_text = r.take(r.u32("header length"), "header").decode("utf-8")
    header = dict(line.split("=", 1) for line in header_text.splitlines() if line)
    tensors = {}
    while not r.done:
        name = r.take(r.u32("tensor name length"), "tensor name").decode("utf-8")
        rank = r.u32(f"rank of {name}")
        dims = struct.unpack(f"<{rank}Q", r.take(8 * rank, f"dims of {name}"))
        count = int(np.prod(dims)) if rank else 1
        raw = r.take(8 * count, f"values of {name}")
        tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(dims).copy()
    return header, tensors


def config_from_header(header: dict) -> TgaeConfig:
    kw = {}
    for f in dataclasses.fields(TgaeConfig):
        if f.name in header:
            kw[f.name] = _parse_value(f, header[f.name])
    return TgaeConfig(**kw)


def load_checkpoint(path, expected: TgaeConfig | None = None) -> TgaeModel:
    """Rebuild a model from ``path``.

    With ``expected``, the model is built from that configuration and every
    stored tensor must match its shape; otherwise the stored header decides.
    """
    header, tensors = read_checkpoint(path)
    cfg = expected if expected is not None else config_from_header(header)
    m = TgaeModel(cfg)
    state = m.state_dict()
    missing = set(state) - set(tensors)
    if missing:
        raise CheckpointShapeError(f"checkpoint lacks tensors: {sorted(missing)}")
    for name, arr in tensors.items():
        if name not in state:
            raise CheckpointShapeError(f"unexpected tensor {name!r} in checkpoint")
        if tuple(state[name].shape) != arr.shape:
            raise CheckpointShapeError(
                f"tensor {name!r} has shape {arr.shape} in checkpoint but {tuple(state[name].shape)} is expected"
            )
        state[name] = torch.from_numpy(arr)
    m.load_state_dict(state)
    return m
