"""Counter-based SplitMix64 random streams.

Every random decision in the package flows through these streams so that a
dataset is a pure function of its master seed: sub-streams are derived by
hashing key paths (e.g. seed -> stage -> frame), never by consuming parent
state, which makes frame-parallel generation order-invariant.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_GOLDEN_U64 = np.uint64(_GOLDEN)
_MIX1_U64 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2_U64 = np.uint64(0x94D049BB133111EB)
# 2**-53: uniform doubles keep the full 53-bit mantissa
_INV_2_53 = float(2.0**-53)


def _finalize_int(z: int) -> int:
    """SplitMix64 output mix on a Python int (64-bit wrapping)."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive(seed: int, *keys: int) -> int:
    """Fold integer keys into a seed, yielding an independent stream key."""
    s = seed & _MASK64
    for k in keys:
        s = _finalize_int(s ^ _finalize_int((int(k) + _GOLDEN) & _MASK64))
    return s


def _finalize_u64(z: np.ndarray) -> np.ndarray:
    """Output mix over an owned uint64 array; mutates and returns it."""
    z ^= z >> np.uint64(30)
    z *= _MIX1_U64
    z ^= z >> np.uint64(27)
    z *= _MIX2_U64
    z ^= z >> np.uint64(31)
    return z


class Stream:
    """Deterministic random stream over a SplitMix64 counter.

    Output i of a stream with key s is finalize(s + (i+1)*golden); bulk
    draws vectorize the counter with numpy uint64 arithmetic.
    """

    def __init__(self, seed: int):
        self._key = int(seed) & _MASK64
        self._counter = 0

    @property
    def key(self) -> int:
        return self._key

    def child(self, *keys: int) -> "Stream":
        """Derive an independent sub-stream; does not consume parent state."""
        return Stream(derive(self._key, *keys))

    def bits(self, size: int | None = None):
        """Raw 64-bit outputs as uint64 (scalar when size is None)."""
        n = 1 if size is None else int(size)
        state = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        state *= _GOLDEN_U64
        state += np.uint64(self._key)
        out = _finalize_u64(state)
        return out[0] if size is None else out

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        """Uniform doubles in [low, high) with 53-bit mantissas."""
        scalar = size is None
        n = 1 if scalar else int(np.prod(size))
        b = self.bits(n)
        b >>= np.uint64(11)
        out = b.astype(np.float64)
        out *= _INV_2_53
        if low != 0.0 or high != 1.0:
            out *= high - low
            out += low
        if scalar:
            return float(out[0])
        return out.reshape(size)

    def integers(self, n: int, size=None):
        """Uniform integers in [0, n)."""
        if n <= 0:
            raise ValueError("integers() needs n >= 1")
        u = self.uniform(size=size)
        out = np.minimum(np.floor(np.asarray(u) * n), n - 1).astype(np.int64)
        return int(out) if size is None else out.reshape(size)

    def normal(self, size=None):
        """Standard normals via Box-Muller."""
        scalar = size is None
        n = 1 if scalar else int(np.prod(size))
        m = (n + 1) // 2
        # u1 in (0, 1] so the log never sees zero
        u1 = ((self.bits(m) >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
        u2 = (self.bits(m) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        if scalar:
            return float(out[0])
        return out.reshape(size)
