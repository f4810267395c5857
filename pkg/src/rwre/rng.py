"""Counter-based deterministic random streams.

Every random quantity in this package is a pure function of a 64-bit key
and a draw index.  Keys are built by chaining a SplitMix64-style avalanche
finalizer over the master seed, a law/purpose tag and the signed lattice
coordinates, so the same (seed, site) pair always yields the same variates
without storing any environment state.  A scalar (python int) and a
vectorized (numpy uint64) implementation are provided; they agree bit for
bit and are cross-checked in the tests.

Note: numpy uint64 *array* arithmetic wraps silently, which is exactly
what we want; only scalar numpy ops would warn, and the scalar paths here
use plain python ints instead.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

_U64_GOLDEN = np.uint64(GOLDEN)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_ONE = np.uint64(1)
_INV_2_53 = 2.0 ** -53


def mix64(z: int) -> int:
    """SplitMix64 finalizer (scalar, exact 64-bit arithmetic)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix64_np(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = z.astype(np.uint64, copy=True)
    z ^= z >> _S30
    z *= _M1
    z ^= z >> _S27
    z *= _M2
    z ^= z >> _S31
    return z


def fold(h: int, word: int) -> int:
    """Absorb one 64-bit word into a running key (order-sensitive)."""
    return mix64(((h ^ (word & MASK64)) + GOLDEN) & MASK64)


def _fold_np(h: np.ndarray, w: np.ndarray) -> np.ndarray:
    return mix64_np((h ^ w) + _U64_GOLDEN)


def string_tag(s: str) -> int:
    """FNV-1a 64-bit hash of a string; stable across runs and platforms."""
    h = 0xCBF29CE484222325
    for b in s.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & MASK64
    return h


def derive_key(master: int, *words: int | str) -> int:
    """Derive a sub-key from a master seed and a sequence of words/tags."""
    h = mix64(master & MASK64)
    for w in words:
        h = fold(h, string_tag(w) if isinstance(w, str) else int(w))
    return h


def base_key(master: int, tag: int) -> int:
    """Master seed and law tag folded once; site keys chain coordinates on."""
    return fold(mix64(master & MASK64), tag)


def site_key(master: int, tag: int, coords) -> int:
    """Key for one lattice site: chain the tag then each signed coordinate."""
    h = base_key(master, tag)
    for c in coords:
        h = fold(h, int(c) & MASK64)
    return h


def site_keys_from_base(base: int, coords: np.ndarray) -> np.ndarray:
    """Vectorized site keys for an (N, d) int array, given a folded base."""
    coords = np.asarray(coords)
    if coords.ndim == 1:
        coords = coords[None, :]
    signed = coords.astype(np.int64, copy=False)
    h = np.full(coords.shape[0], base & MASK64, dtype=np.uint64)
    for j in range(coords.shape[1]):
        h = _fold_np(h, signed[:, j].astype(np.uint64))
    return h


def site_keys(master: int, tag: int, coords: np.ndarray) -> np.ndarray:
    """Vectorized :func:`site_key` for an (N, d) int array of sites."""
    return site_keys_from_base(base_key(master, tag), coords)


def stream_uniform(key: int, index: int) -> float:
    """The ``index``-th uniform in (0, 1] of the stream with the given key."""
    v = mix64((key + (index + 1) * GOLDEN) & MASK64)
    return ((v >> 11) + 1) * _INV_2_53


def stream_uniforms(keys: np.ndarray, index: int) -> np.ndarray:
    """Draw ``index`` of many streams at once; uniforms in (0, 1]."""
    v = mix64_np(keys + np.uint64(((index + 1) * GOLDEN) & MASK64))
    v >>= _S11
    v += _ONE
    return v.astype(np.float64) * _INV_2_53


def stream_uniform_block(key: int, n: int, start: int = 0) -> np.ndarray:
    """First ``n`` uniforms (from ``start``) of a single stream, as an array."""
    idx = np.arange(start, start + n, dtype=np.uint64)
    v = mix64_np(np.uint64(key & MASK64) + (idx + _ONE) * _U64_GOLDEN)
    v >>= _S11
    v += _ONE
    return v.astype(np.float64) * _INV_2_53
