"""Checksum/digest kernels with compiled-or-pure selection at import.

Prefers the Cython extension (_ckernels); falls back to _kernels_py when it
is not built. Set PREFIXKV_PURE=1 to force the fallback, e.g. for the
kernel benchmark or to reproduce pure-Python behavior.
"""
from __future__ import annotations

import os

from . import _kernels_py

IMPL = "py"
crc32c = _kernels_py.crc32c
fnv1a64 = _kernels_py.fnv1a64
fnv1a64_blocks = _kernels_py.fnv1a64_blocks

if os.environ.get("PREFIXKV_PURE") != "1":
    try:
        from . import _ckernels

        crc32c = _ckernels.crc32c
        fnv1a64 = _ckernels.fnv1a64
        fnv1a64_blocks = _ckernels.fnv1a64_blocks
        IMPL = "c"
    except ImportError:
        pass

FNV_OFFSET = _kernels_py.FNV_OFFSET
FNV_PRIME = _kernels_py.FNV_PRIME
