"""Batch payload framing and optional block compression.

Frame layout (little-endian): [count u32][len u32 x count][payload bytes...].
Codec 0 stores the frame raw; codec 1 deflates the whole frame as one unit
so the compressor sees the full batch at once.
"""
from __future__ import annotations

import struct
import zlib

from .errors import CorruptionError, UsageError

CODEC_RAW = 0
CODEC_DEFLATE = 1

_CODECS = (CODEC_RAW, CODEC_DEFLATE)


def encode_batch(payloads: list[bytes], codec: int) -> tuple[bytes, list[int]]:
    """Frame ``payloads`` and apply the codec.

    Returns the stored bytes and each item's offset within the decoded
    (framed) stream.
    """
    if codec not in _CODECS:
        raise UsageError(f"unknown codec id {codec}")
    head = struct.pack("<I", len(payloads))
    lens = struct.pack(f"<{len(payloads)}I", *(len(p) for p in payloads))
    frame = b"".join((head, lens) + tuple(payloads))
    offsets = []
    off = len(head) + len(lens)
    for p in payloads:
        offsets.append(off)
        off += len(p)
    if codec == CODEC_DEFLATE:
        return zlib.compress(frame, 6), offsets
    return frame, offsets


def decode_batch(data: bytes, codec: int) -> list[bytes]:
    """Exact inverse of encode_batch."""
    if codec not in _CODECS:
        raise CorruptionError(f"unknown codec id {codec}")
    if codec == CODEC_DEFLATE:
        try:
            data = zlib.decompress(data)
        except zlib.error as exc:
            raise CorruptionError(f"deflate stream corrupt: {exc}") from exc
    if len(data) < 4:
        raise CorruptionError("batch frame truncated before count")
    (count,) = struct.unpack_from("<I", data, 0)
    head = 4 + 4 * count
    if len(data) < head:
        raise CorruptionError("batch frame truncated in length table")
    lens = struct.unpack_from(f"<{count}I", data, 4)
    out = []
    off = head
    for n in lens:
        if off + n > len(data):
            raise CorruptionError("batch frame truncated in payloads")
        out.append(data[off : off + n])
        off += n
    if off != len(data):
        raise CorruptionError("trailing garbage after batch frame")
    return out
