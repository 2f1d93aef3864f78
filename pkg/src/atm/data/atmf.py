"""ATMF feature container.

Layout (all little-endian)::

    b"ATMF"  u16 version
    3 x { u8 stream tag (0=object, 1=frame, 2=motion)  u32 T  u32 D  T*D float32 row-major }
    u32 CRC-32 of every byte between the header and the checksum
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"ATMF"
VERSION = 1
STREAM_TAGS = {"object": 0, "frame": 1, "motion": 2}
_HEADER = struct.Struct("<4sH")
_SECTION = struct.Struct("<BII")


class FormatError(ValueError):
    """Malformed binary container; ``offset`` is the byte where parsing failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class FeatureBundle:
    """Per-video clip features for the three input streams, each ``(T, D)``."""

    video_id: str
    f_o: np.ndarray
    f_r: np.ndarray
    f_m: np.ndarray

    def __post_init__(self):
        arrays = []
        for name in ("f_o", "f_r", "f_m"):
            a = np.array(getattr(self, name), dtype=np.float64)
            if a.ndim != 2:
                raise ValueError(f"{name} must be 2-D (T, D), got shape {a.shape}")
            if not np.isfinite(a).all():
                raise ValueError(f"{name} of {self.video_id!r} contains non-finite values")
            a.flags.writeable = False
            object.__setattr__(self, name, a)
            arrays.append(a)
        ts = {a.shape[0] for a in arrays}
        if len(ts) != 1:
            raise ValueError(f"streams of {self.video_id!r} disagree on clip count: {sorted(ts)}")
        if arrays[0].shape[0] < 1:
            raise ValueError(f"{self.video_id!r} has no clips")

    @property
    def T(self) -> int:
        return self.f_o.shape[0]

    def streams(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.f_o, self.f_r, self.f_m

    def select(self, index) -> "FeatureBundle":
        """Rows ``index`` of every stream (same selection for all three)."""
        return FeatureBundle(self.video_id, self.f_o[index], self.f_r[index], self.f_m[index])


def encode_bundle(bundle: FeatureBundle) -> bytes:
    payload = bytearray()
    for tag, arr in zip(STREAM_TAGS.values(), bundle.streams()):
        f32 = arr.astype("<f4")
        if not np.array_equal(f32.astype(np.float64), arr):
            raise ValueError(f"{bundle.video_id!r}: values are not exactly representable as float32")
        payload += _SECTION.pack(tag, *arr.shape)
        payload += f32.tobytes()
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    return _HEADER.pack(MAGIC, VERSION) + bytes(payload) + struct.pack("<I", crc)


def decode_bundle(raw: bytes, video_id: str) -> FeatureBundle:
    if len(raw) < _HEADER.size:
        raise FormatError("file shorter than header", len(raw))
    magic, version = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    pos = _HEADER.size
    streams: dict[int, np.ndarray] = {}
    for expected_tag in STREAM_TAGS.values():
        if pos + _SECTION.size > len(raw):
            raise FormatError("truncated stream header", pos)
        tag, t, d = _SECTION.unpack_from(raw, pos)
        if tag != expected_tag:
            raise FormatError(f"expected stream tag {expected_tag}, found {tag}", pos)
        if t < 1 or d < 1:
            raise FormatError(f"empty stream dimensions T={t} D={d}", pos + 1)
        pos += _SECTION.size
        nbytes = 4 * t * d
        if pos + nbytes > len(raw):
            raise FormatError(f"truncated stream data: need {nbytes} bytes, {len(raw) - pos} remain", pos)
        arr = np.frombuffer(raw, dtype="<f4", count=t * d, offset=pos).reshape(t, d)
        if not np.isfinite(arr).all():
            bad = int(np.flatnonzero(~np.isfinite(arr.reshape(-1)))[0])
            raise FormatError("non-finite feature value", pos + 4 * bad)
        streams[tag] = arr.astype(np.float64)
        pos += nbytes
    if pos + 4 > len(raw):
        raise FormatError("missing CRC-32 trailer", pos)
    (stored,) = struct.unpack_from("<I", raw, pos)
    actual = zlib.crc32(raw[_HEADER.size:pos]) & 0xFFFFFFFF
    if stored != actual:
        raise FormatError(f"CRC mismatch: stored {stored:08x}, computed {actual:08x}", pos)
    if pos + 4 != len(raw):
        raise FormatError(f"{len(raw) - pos - 4} trailing bytes after CRC", pos + 4)
    ts = {a.shape[0] for a in streams.values()}
    if len(ts) != 1:
        raise FormatError(f"streams disagree on clip count {sorted(ts)}", _HEADER.size)
    return FeatureBundle(video_id, streams[0], streams[1], streams[2])


def save_feature_bundle(bundle: FeatureBundle, path) -> None:
    Path(path).write_bytes(encode_bundle(bundle))


def load_feature_bundle(path, video_id: str | None = None) -> FeatureBundle:
    path = Path(path)
    return decode_bundle(path.read_bytes(), video_id or path.stem)
