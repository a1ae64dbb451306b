"""Vectorized deterministic hashing of covariate rows.

Used by the noisy-oracle teacher: the per-point noise must be a pure
function of (covariate bytes, seed), so repeated predictions on the same
point are bit-identical without any stored state.  The mixer is the
splitmix64 finalizer applied to the raw float64 bit patterns.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(h: np.ndarray) -> np.ndarray:
    h = h.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        h += _GOLDEN
        h ^= h >> np.uint64(30)
        h *= _MIX1
        h ^= h >> np.uint64(27)
        h *= _MIX2
        h ^= h >> np.uint64(31)
    return h


def hash_rows(x: np.ndarray, seed: int) -> np.ndarray:
    """Return one uint64 hash per row of the (k, d) float64 matrix ``x``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    bits = x.view(np.uint64)
    h = np.full(bits.shape[0], np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    with np.errstate(over="ignore"):
        for j in range(bits.shape[1]):
            h = _splitmix64(h ^ bits[:, j])
    return h


def gaussian_from_rows(x: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic standard-normal draw per row via Box-Muller on hashes."""
    h1 = hash_rows(x, seed)
    h2 = _splitmix64(h1)
    # 53-bit uniforms; u1 shifted away from 0 so the log is finite.
    u1 = ((h1 >> np.uint64(11)).astype(np.float64) + 1.0) / 9007199254740993.0
    u2 = (h2 >> np.uint64(11)).astype(np.float64) / 9007199254740992.0
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
