"""Stable keyed hashing for reproducible randomness.

Every random quantity in the package is a deterministic function of a
64-bit master seed and a tuple of context parts (stream tag, canonical
vertex label, trial index, ...).  This makes sampled configurations
independent of window size for shared vertices and byte-reproducible
across runs and worker pools.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

MASK64 = (1 << 64) - 1
_INV_U64 = 1.0 / float(1 << 64)


def _hasher(seed: int, digest_size: int) -> "hashlib._Hash":
    key = (seed & MASK64).to_bytes(8, "little")
    return hashlib.blake2b(key=key, digest_size=digest_size)


def _feed(h, parts) -> None:
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")


def hash_u64(seed: int, *parts) -> int:
    """A 64-bit hash of (seed, parts), stable across runs and platforms."""
    h = _hasher(seed, 8)
    _feed(h, parts)
    return int.from_bytes(h.digest(), "little")


def derive_seed(seed: int, *parts) -> int:
    """Derive a child seed, e.g. per trial or per worker task."""
    return hash_u64(seed, "derive", *parts)


def unit_uniform(seed: int, *parts) -> float:
    """One uniform in [0, 1) keyed by (seed, parts)."""
    return hash_u64(seed, *parts) * _INV_U64


def uniform_stream(seed: int, count: int, *parts) -> np.ndarray:
    """`count` uniforms in [0, 1) keyed by (seed, parts), block-generated.

    Element i of the stream depends only on (seed, parts, i), so a prefix
    of a longer stream equals the shorter stream.
    """
    if count <= 0:
        return np.empty(0, dtype=np.float64)
    blocks = math.ceil(count / 8)
    buf = bytearray()
    for b in range(blocks):
        h = _hasher(seed, 64)
        _feed(h, parts)
        h.update(b"#%d" % b)
        buf += h.digest()
    arr = np.frombuffer(bytes(buf), dtype="<u8")[:count]
    return arr * _INV_U64
