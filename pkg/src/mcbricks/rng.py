"""Deterministic, splittable random numbers.

Every stochastic operation in the library consumes an explicit
:class:`RngKey`.  Keys are immutable values, never mutable generator
objects: drawing numbers and deriving child keys are pure functions of the
key, so any computation that receives a key is bitwise reproducible on any
platform and in any execution order.

The construction is counter-based.  A key holds 128 bits of state (two
64-bit words).  Each consumer first derives a 64-bit stream seed by
avalanche-mixing the key words with a small domain tag (one tag per kind of
operation, so e.g. child keys and uniform draws can never collide), then
reads the i-th word of that stream as ``mix64(seed + i * GOLDEN)``.  The
mixing function is the SplitMix64 finalizer, whose output is
equidistributed and passes standard statistical batteries.  Uniform doubles
take the top 53 bits of a word; normal draws pair two uniforms through the
Box-Muller transform.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

__all__ = [
    "RngKey",
    "make_key",
    "split_key",
    "fold_in",
    "uniform",
    "uniform_vector",
    "normal_vector",
    "normal_matrix",
    "permutation",
]

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15

# Domain tags. Distinct tags give unrelated streams for the same key, so a
# key can be used for exactly one operation without draws overlapping.
_TAG_SPLIT = 1
_TAG_UNIFORM = 2
_TAG_NORMAL = 3
_TAG_PERMUTATION = 4

_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53, exact in binary64


class RngKey(NamedTuple):
    """128-bit key for the counter-based generator.

    Treat keys as opaque: obtain the root key from :func:`make_key` and
    child keys from :func:`split_key` or :func:`fold_in`.  Reusing one key
    for two different draws produces correlated output; split instead.
    """

    hi: int
    lo: int


def _mix64(z: int) -> int:
    # SplitMix64 finalizer (Steele et al.), pure-Python 64-bit arithmetic.
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def _mix64_np(z: np.ndarray) -> np.ndarray:
    # Same finalizer on a uint64 array; relies on numpy wrapping mod 2**64.
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _stream_seed(key: RngKey, tag: int) -> int:
    # Fold (hi, lo, tag) into a single well-mixed 64-bit stream seed.
    z = _mix64((key.hi + _GOLDEN) & _MASK64)
    z = _mix64(z ^ key.lo)
    return _mix64(z ^ (tag * _GOLDEN & _MASK64))


def _word(seed: int, index: int) -> int:
    return _mix64((seed + index * _GOLDEN) & _MASK64)


def _words_np(seed: int, count: int) -> np.ndarray:
    idx = np.arange(count, dtype=np.uint64)
    z = np.uint64(seed) + idx * np.uint64(_GOLDEN)
    return _mix64_np(z)


def make_key(seed: int) -> RngKey:
    """Build the root key for a run from a user-supplied integer seed."""
    s = int(seed) & _MASK64
    return RngKey(_mix64(s), _mix64((s + _GOLDEN) & _MASK64))


def fold_in(key: RngKey, index: int) -> RngKey:
    """Derive the ``index``-th child key.

    ``fold_in(key, i) == split_key(key, n)[i]`` for any ``n > i``; use it
    to derive per-iteration keys lazily instead of materialising a long
    list up front.
    """
    if index < 0:
        raise ValueError("child index must be non-negative")
    seed = _stream_seed(key, _TAG_SPLIT)
    return RngKey(_word(seed, 2 * index), _word(seed, 2 * index + 1))


def split_key(key: RngKey, num: int) -> list[RngKey]:
    """Split ``key`` into ``num`` statistically independent child keys.

    A pure function of ``(key, num)``: children are pairwise distinct and
    distinct from the parent, and the same call always returns the same
    children.
    """
    if num < 1:
        raise ValueError("cannot split into fewer than one key")
    if num <= 8:
        seed = _stream_seed(key, _TAG_SPLIT)
        return [
            RngKey(_word(seed, 2 * i), _word(seed, 2 * i + 1))
            for i in range(num)
        ]
    words = _words_np(_stream_seed(key, _TAG_SPLIT), 2 * num)
    return [RngKey(int(words[2 * i]), int(words[2 * i + 1])) for i in range(num)]


def uniform(key: RngKey) -> float:
    """One double, uniform on [0, 1): the top 53 bits of one stream word."""
    return (_word(_stream_seed(key, _TAG_UNIFORM), 0) >> 11) * _INV_2_53


def uniform_vector(key: RngKey, num: int) -> np.ndarray:
    """``num`` uniform doubles on [0, 1).

    ``uniform_vector(key, 1)[0] == uniform(key)`` exactly: scalar and
    vector reads consume the same stream.
    """
    if num < 0:
        raise ValueError("draw count must be non-negative")
    words = _words_np(_stream_seed(key, _TAG_UNIFORM), num)
    return (words >> np.uint64(11)).astype(np.float64) * _INV_2_53


def normal_vector(key: RngKey, num: int) -> np.ndarray:
    """``num`` independent standard normal doubles.

    Pairs of stream words go through Box-Muller.  The first uniform is
    shifted onto (0, 1] so the logarithm is always finite.  The stream seed
    folds in ``num``, so requests of different lengths from the same key do
    not share a prefix.
    """
    if num < 0:
        raise ValueError("draw count must be non-negative")
    if num == 0:
        return np.zeros(0)
    pairs = (num + 1) // 2
    seed = _stream_seed(key, _TAG_NORMAL)
    seed = _mix64((seed + num * _GOLDEN) & _MASK64)
    words = _words_np(seed, 2 * pairs)
    u1 = ((words[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
    u2 = (words[1::2] >> np.uint64(11)).astype(np.float64) * _INV_2_53
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = (2.0 * math.pi) * u2
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:num]


def normal_matrix(key: RngKey, rows: int, cols: int) -> np.ndarray:
    """Standard normal draws shaped ``(rows, cols)``."""
    return normal_vector(key, rows * cols).reshape(rows, cols)


def permutation(key: RngKey, num: int) -> np.ndarray:
    """A uniform random permutation of ``arange(num)``.

    Sorts ``num`` stream words; ties (probability ~ num**2 / 2**65) are
    broken by index via the stable sort, keeping the result deterministic.
    """
    if num < 0:
        raise ValueError("permutation size must be non-negative")
    words = _words_np(_stream_seed(key, _TAG_PERMUTATION), num)
    return np.argsort(words, kind="stable")
