"""Token chunking and prefix-order-preserving key encoding.

A token sequence is chunked into fixed-size blocks; each block gets a
64-bit FNV-1a digest over the big-endian 4-byte encodings of its tokens.
The key for a chain of ``d`` blocks is the concatenation of the first
``d`` digests, big-endian. Because a longer chain's key extends the
shorter chain's key byte-for-byte, lexicographic byte order on keys
coincides with prefix order on token sequences (modulo digest collisions,
which payload checksums catch downstream).
"""
from __future__ import annotations

import struct
from typing import Sequence

import numpy as np

from . import kernels
from .errors import CorruptionError, UsageError

DIGEST_BYTES = 8
MAX_DEPTH = 0xFFFF


def token_bytes(tokens: Sequence[int] | np.ndarray) -> bytes:
    """Big-endian 4-byte encoding of each token id, concatenated."""
    arr = np.asarray(tokens, dtype=np.uint32)
    return arr.astype(">u4").tobytes()


def chunk_tokens(tokens: Sequence[int] | np.ndarray, block_tokens: int) -> list[np.ndarray]:
    """Split into full blocks of exactly ``block_tokens`` tokens; the
    trailing partial block is discarded (never cached)."""
    if block_tokens < 1:
        raise UsageError("block_tokens must be >= 1")
    arr = np.asarray(tokens, dtype=np.uint32)
    full = len(arr) // block_tokens
    return [arr[i * block_tokens : (i + 1) * block_tokens] for i in range(full)]


def block_digest(block: Sequence[int] | np.ndarray, block_tokens: int) -> int:
    """FNV-1a 64 digest of one full block."""
    arr = np.asarray(block, dtype=np.uint32)
    if len(arr) != block_tokens:
        raise UsageError(
            f"block has {len(arr)} tokens, expected exactly {block_tokens}"
        )
    return kernels.fnv1a64(token_bytes(arr))


def digest_chain(tokens: Sequence[int] | np.ndarray, block_tokens: int) -> list[int]:
    """Per-block digests for every full block of ``tokens``, in order."""
    if block_tokens < 1:
        raise UsageError("block_tokens must be >= 1")
    buf = token_bytes(tokens)
    block_bytes = 4 * block_tokens
    full = len(buf) // block_bytes
    return kernels.fnv1a64_blocks(buf[: full * block_bytes], block_bytes)


def encode_key(chain: Sequence[int]) -> bytes:
    """Concatenated big-endian digests; the stored PrefixKey bytes."""
    depth = len(chain)
    if depth < 1:
        raise UsageError("empty digest chain")
    if depth > MAX_DEPTH:
        raise UsageError(f"chain depth {depth} exceeds {MAX_DEPTH}")
    return struct.pack(f">{depth}Q", *chain)


def key_depth(key: bytes) -> int:
    if len(key) % DIGEST_BYTES or len(key) == 0:
        raise CorruptionError(f"malformed key length {len(key)}")
    return len(key) // DIGEST_BYTES


def chain_keys(tokens: Sequence[int] | np.ndarray, block_tokens: int) -> list[bytes]:
    """Keys for every prefix depth 1..D of the chunked sequence.

    chain_keys(t)[i] is the key of the chain covering blocks 0..i; each
    entry is a byte-prefix of the next.
    """
    chain = digest_chain(tokens, block_tokens)
    out = []
    prev = b""
    for d in chain:
        prev = prev + struct.pack(">Q", d)
        out.append(prev)
    return out


def chain_digest(key: bytes) -> int:
    """Single 64-bit digest of a whole chain key (file-per-object names)."""
    return kernels.fnv1a64(key)
