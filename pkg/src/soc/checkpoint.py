"""Versioned binary checkpoint container.

Layout (all integers little-endian)::

    b"SOCM"  u32 version
    u32 header_len  header_len bytes of UTF-8 JSON {config, vocab_digest, step}
    u32 n_tensors
    per tensor: u16 name_len, name, u8 itemsize (4 or 8), u8 ndim, ndim x u32 dims,
                prod(dims) little-endian IEEE floats
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadMagicError, ShapeError, UnsupportedVersionError
from .model import ModelConfig

MAGIC = b"SOCM"
VERSION = 1
_FLOAT_BY_SIZE = {4: np.dtype("<f4"), 8: np.dtype("<f8")}


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict
    vocab_digest: str = ""
    step: int = 0
    version: int = VERSION


def to_bytes(ckpt):
    header = json.dumps(
        {"config": ckpt.config.to_dict(), "vocab_digest": ckpt.vocab_digest, "step": ckpt.step},
        sort_keys=True,
    ).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(header)), header]
    parts.append(struct.pack("<I", len(ckpt.params)))
    for name in ckpt.config.shapes():
        value = ckpt.params[name]
        dt = _FLOAT_BY_SIZE[value.dtype.itemsize]
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<BB", dt.itemsize, value.ndim))
        parts.append(struct.pack(f"<{value.ndim}I", *value.shape))
        parts.append(np.ascontiguousarray(value, dtype=dt).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise ShapeError(f"file truncated while reading {what} (need {n} bytes at offset {self.pos})")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def from_bytes(data):
    r = _Reader(data)
    magic = r.take(4, "magic") if len(data) >= 4 else data
    if magic != MAGIC:
        raise BadMagicError(f"not a checkpoint: magic {magic!r} != {MAGIC!r}")
    (version,) = r.unpack("<I", "version")
    if version != VERSION:
        raise UnsupportedVersionError(f"checkpoint format version {version} is not supported (this build reads {VERSION})")
    (header_len,) = r.unpack("<I", "header length")
    try:
        header = json.loads(r.take(header_len, "header").decode("utf-8"))
        config = ModelConfig.from_dict(header["config"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ShapeError(f"version {version} checkpoint has an unreadable header: {exc}") from None
    expected = config.shapes()
    (count,) = r.unpack("<I", "tensor count")
    if count != len(expected):
        raise ShapeError(f"expected {len(expected)} tensors for this config, file declares {count}")
    params = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H", "tensor name length")
        name = r.take(name_len, "tensor name").decode("utf-8", errors="replace")
        itemsize, ndim = r.unpack("<BB", f"{name} header")
        if itemsize not in _FLOAT_BY_SIZE:
            raise ShapeError(f"{name}: unsupported element size {itemsize}")
        shape = r.unpack(f"<{ndim}I", f"{name} shape")
        if name not in expected or tuple(shape) != expected[name]:
            raise ShapeError(f"tensor {name} with shape {tuple(shape)} does not match config {expected.get(name)}")
        dt = _FLOAT_BY_SIZE[itemsize]
        n = int(np.prod(shape, dtype=np.int64))
        raw = r.take(n * itemsize, f"{name} data")
        params[name] = np.frombuffer(raw, dtype=dt).reshape(shape).astype(dt.newbyteorder("="), copy=True)
    if r.pos != len(data):
        raise ShapeError(f"{len(data) - r.pos} trailing bytes after last tensor")
    return Checkpoint(config, params, header.get("vocab_digest", ""), int(header.get("step", 0)), version)


def save(ckpt, path):
    with open(path, "wb") as fh:
        fh.write(to_bytes(ckpt))


def load(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
