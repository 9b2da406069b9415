"""Deterministic, platform-independent randomness.

Everything random in this package flows through splitmix64: a 64-bit
counter-based generator whose i-th output can be computed directly from
(seed, i). That gives two useful access patterns with identical streams:

* sequential draws through the ``SplitMix64`` class, and
* random access to the same stream via ``stream_uniforms(seed, keys)``,
  which is how per-row prediction draws stay reproducible regardless of
  the order (or parallelism) in which rows are processed.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_U53_INV = 2.0 ** -53


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    z &= _MASK64
    z ^= z >> 30
    z = (z * _MIX1) & _MASK64
    z ^= z >> 27
    z = (z * _MIX2) & _MASK64
    return z ^ (z >> 31)


def stream_u64(seed: int, keys: np.ndarray) -> np.ndarray:
    """Outputs keys[i] of the splitmix64 stream started at `seed`, vectorized."""
    k = np.asarray(keys, dtype=np.uint64)
    z = np.uint64(seed & _MASK64) + (k + np.uint64(1)) * np.uint64(_GOLDEN)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MIX1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MIX2)
    z ^= z >> np.uint64(31)
    return z


def stream_uniforms(seed: int, keys: np.ndarray) -> np.ndarray:
    """Uniform [0, 1) doubles at the given stream positions (53-bit mantissa)."""
    return (stream_u64(seed, keys) >> np.uint64(11)).astype(np.float64) * _U53_INV


def derive_seed(seed: int, *codes: int) -> int:
    """Fold integer codes into `seed` to get a stable sub-stream seed.

    Used to give grid cells, folds, etc. independent streams that do not
    depend on enumeration order.
    """
    h = mix64(seed)
    for c in codes:
        h = mix64(h ^ mix64((c + _GOLDEN) & _MASK64))
    return h


class SplitMix64:
    """Sequential view of the splitmix64 stream for a seed.

    The n-th call to `next_u64` equals ``stream_u64(seed, [n])``.
    """

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return mix64(self._state)

    def next_uniform(self) -> float:
        return (self.next_u64() >> 11) * _U53_INV

    def next_below(self, n: int) -> int:
        # modulo bias is ~n/2^64, irrelevant at our sizes
        return self.next_u64() % n


def shuffled(indices: np.ndarray, seed: int) -> np.ndarray:
    """Fisher-Yates shuffle driven by splitmix64; stable across platforms."""
    out = np.array(indices, dtype=np.int64, copy=True)
    rng = SplitMix64(seed)
    for i in range(len(out) - 1, 0, -1):
        j = rng.next_below(i + 1)
        out[i], out[j] = out[j], out[i]
    return out
