"""Checkpoint container.

Layout (little-endian)::

    b"ATMC"  u16 version
    u32 n   n bytes of UTF-8 JSON {"model": <ModelConfig>, "stage": ...}
    u32 count
    count x { u16 n  n bytes name  u8 ndim  ndim x u32  float32 data row-major }
    u32 CRC-32 of every byte between the header and the checksum

Values are stored as float32 like ATMF features.
"""
from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from ..data.atmf import FormatError
from ..tensorcore import Tensor
from .network import ModelConfig, ModelParams

MAGIC = b"ATMC"
VERSION = 1


def encode_checkpoint(params: ModelParams) -> bytes:
    meta = json.dumps({"model": params.config.to_dict(), "stage": params.stage}, sort_keys=True).encode()
    body = bytearray(struct.pack("<I", len(meta)) + meta + struct.pack("<I", len(params.tensors)))
    for name in sorted(params.tensors):
        arr = params.tensors[name].data
        raw = name.encode()
        body += struct.pack("<H", len(raw)) + raw + struct.pack("<B", arr.ndim)
        body += struct.pack(f"<{arr.ndim}I", *arr.shape)
        body += arr.astype("<f4").tobytes()
    crc = zlib.crc32(body) & 0xFFFFFFFF
    return MAGIC + struct.pack("<H", VERSION) + bytes(body) + struct.pack("<I", crc)


def decode_checkpoint(raw: bytes) -> ModelParams:
    if raw[:4] != MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}", 0)
    if len(raw) < 10:
        raise FormatError("truncated checkpoint", len(raw))
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", 4)
    (stored,) = struct.unpack_from("<I", raw, len(raw) - 4)
    body = raw[6:-4]
    if zlib.crc32(body) & 0xFFFFFFFF != stored:
        raise FormatError("CRC mismatch", len(raw) - 4)
    pos = 6
    try:
        (n,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        meta = json.loads(raw[pos:pos + n].decode())
        pos += n
        (count,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        tensors = {}
        for _ in range(count):
            (ln,) = struct.unpack_from("<H", raw, pos)
            pos += 2
            name = raw[pos:pos + ln].decode()
            pos += ln
            (ndim,) = struct.unpack_from("<B", raw, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", raw, pos)
            pos += 4 * ndim
            size = int(np.prod(shape))
            arr = np.frombuffer(raw, dtype="<f4", count=size, offset=pos).reshape(shape)
            pos += 4 * size
            tensors[name] = Tensor(arr.astype(np.float64), requires_grad=True, name=name)
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise FormatError(f"corrupt checkpoint body: {exc}", pos) from None
    if pos != len(raw) - 4:
        raise FormatError("unexpected trailing bytes", pos)
    return ModelParams(ModelConfig.from_dict(meta["model"]), tensors, stage=meta["stage"])


def save_checkpoint(params: ModelParams, path) -> None:
    Path(path).write_bytes(encode_checkpoint(params))


def load_checkpoint(path) -> ModelParams:
    return decode_checkpoint(Path(path).read_bytes())
