"""FSRW weight archives and the transfer-learning workflow.

Archive layout, all integers little-endian::

    b"FSRW"  u16 version(=1)  u32 tensor_count
    per tensor:
        u16 name_len  name (UTF-8)  u8 dtype  u8 rank  u32 dims[rank]  payload
    u32 CRC-32 of every preceding byte

dtype codes: 1 = float32, 2 = float64. Payload is raw row-major data.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IntegrityError, StructuralError, TransferError
from .params import NetworkParams
from .tensor import Tensor

MAGIC = b"FSRW"
VERSION = 1
DTYPE_CODES = {np.dtype("<f4"): 1, np.dtype("<f8"): 2}
CODE_DTYPES = {v: k for k, v in DTYPE_CODES.items()}


def encode_weights(params):
    names = params.names()
    if len(set(names)) != len(names):
        raise StructuralError("duplicate tensor names")
    parts = [MAGIC, struct.pack("<HI", VERSION, len(names))]
    for name, t in params.items():
        raw_name = name.encode("utf-8")
        arr = np.ascontiguousarray(t.data)
        dt = arr.dtype.newbyteorder("<")
        if dt not in DTYPE_CODES:
            raise StructuralError(f"{name}: unsupported dtype {arr.dtype}")
        parts.append(struct.pack("<H", len(raw_name)))
        parts.append(raw_name)
        parts.append(struct.pack("<BB", DTYPE_CODES[dt], arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.astype(dt, copy=False).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def save_weights(params, path):
    Path(path).write_bytes(encode_weights(params))


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise IntegrityError(f"truncated archive while reading {what}", self.pos)
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_weights(buf, dtype=None, allow_narrowing=False):
    """Parse archive bytes into :class:`NetworkParams` (all tensors trainable).

    ``dtype`` converts every tensor on load. Converting float64 to float32
    loses precision and must be requested with ``allow_narrowing=True``.
    """
    if len(buf) < len(MAGIC) + 10:
        raise IntegrityError("archive too short", len(buf))
    crc_stored = struct.unpack("<I", buf[-4:])[0]
    if zlib.crc32(buf[:-4]) != crc_stored:
        raise IntegrityError("checksum mismatch", len(buf) - 4)
    body = buf[:-4]
    r = _Reader(body)
    if r.take(4, "magic") != MAGIC:
        raise IntegrityError("bad magic", 0)
    (version,) = r.unpack("<H", "version")
    if version != VERSION:
        raise IntegrityError(f"unknown format version {version}", 4)
    (count,) = r.unpack("<I", "tensor count")
    target = np.dtype(dtype) if dtype is not None else None
    params = NetworkParams()
    for _ in range(count):
        start = r.pos
        (nlen,) = r.unpack("<H", "name length")
        try:
            name = r.take(nlen, "name").decode("utf-8")
        except UnicodeDecodeError:
            raise IntegrityError("tensor name is not UTF-8", start + 2) from None
        if name in params:
            raise IntegrityError(f"duplicate tensor name {name!r}", start)
        code, rank = r.unpack("<BB", "dtype/rank")
        if code not in CODE_DTYPES:
            raise IntegrityError(f"unknown dtype code {code}", r.pos - 2)
        dims = r.unpack(f"<{rank}I", "dims")
        dt = CODE_DTYPES[code]
        nbytes = int(np.prod(dims, dtype=np.int64)) * dt.itemsize
        arr = np.frombuffer(r.take(nbytes, f"payload of {name!r}"), dtype=dt).reshape(dims)
        arr = arr.astype(dt.newbyteorder("="))  # owned, native-order copy
        if target is not None and target != arr.dtype:
            if target.itemsize < arr.dtype.itemsize and not allow_narrowing:
                raise StructuralError(f"{name}: loading {arr.dtype} as {target} is lossy; pass allow_narrowing=True")
            arr = arr.astype(target)
        params[name] = Tensor(arr, requires_grad=True)
    if r.pos != len(body):
        raise IntegrityError("trailing bytes after last tensor", r.pos)
    return params


def load_weights(path, dtype=None, allow_narrowing=False):
    return decode_weights(Path(path).read_bytes(), dtype, allow_narrowing)


def tensor_checksums(params):
    return {name: zlib.crc32(np.ascontiguousarray(t.data).tobytes()) for name, t in params.items()}


# -- transfer -------------------------------------------------------------------------
@dataclass
class FreezePlan:
    """Ordered ``(prefix, trainable)`` rules; the last matching rule wins, default trainable."""

    rules: list = field(default_factory=list)

    @classmethod
    def freezing(cls, prefixes):
        return cls([(p, False) for p in prefixes])

    def trainable(self, name):
        flag = True
        for prefix, t in self.rules:
            if name.startswith(prefix):
                flag = t
        return flag

    def apply(self, params):
        for name in params:
            params.set_trainable(name, self.trainable(name))


@dataclass
class TransferReport:
    copied: list
    skipped: list
    frozen: list
    unused_source: list

    def summary(self):
        return (f"copied {len(self.copied)}, skipped {len(self.skipped)}, frozen {len(self.frozen)}, "
                f"unused source tensors {len(self.unused_source)}")


def apply_transfer(target, source, plan=None, allow_narrowing=False):
    """Copy name-matched source tensors into ``target`` and set freeze flags.

    ``source`` may be :class:`NetworkParams` or a path to an FSRW archive.
    """
    if not isinstance(source, NetworkParams):
        source = load_weights(source)
    plan = plan or FreezePlan()
    matched = [n for n in target if n in source]
    if not matched:
        raise TransferError("no tensor names in common with the source archive; wrong architecture?")
    bad = [f"{n}: target {target[n].shape} vs source {source[n].shape}"
           for n in matched if target[n].shape != source[n].shape]
    if bad:
        raise StructuralError("shape mismatch for " + "; ".join(bad))
    for n in matched:
        src, dst = source[n].data, target[n].data
        if src.dtype != dst.dtype and src.dtype.itemsize > dst.dtype.itemsize and not allow_narrowing:
            raise StructuralError(f"{n}: copying {src.dtype} into {dst.dtype} is lossy; pass allow_narrowing=True")
    for n in matched:
        target[n].data = source[n].data.astype(target[n].dtype, copy=True)
        target.optim_state.pop(n, None)
    plan.apply(target)
    return TransferReport(
        copied=matched,
        skipped=[n for n in target if n not in source],
        frozen=[n for n in target if not target.is_trainable(n)],
        unused_source=[n for n in source if n not in target],
    )
