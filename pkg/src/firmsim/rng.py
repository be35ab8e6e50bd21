"""Counter-based random stream.

Every draw is a pure function of ``(seed, purpose, step, index)``: a SplitMix64
finaliser applied to a keyed counter. Both kernel backends evaluate the same
integer arithmetic, so a run is reproducible bit for bit whichever backend
executes it, and the draw a division receives never depends on how many
other draws were consumed before it.
"""
from __future__ import annotations

import numpy as np

RNG_VERSION = 1

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_TO_UNIT = 2.0 ** -53

# stream purposes
INIT_SIZE = 0
SPINOFF = 1
CLASSIFY = 2
PICK = 3
SWEEP_SEED = 4


def fmix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, purpose: int, step: int) -> int:
    h = fmix64((seed & MASK64) + GAMMA * (purpose + 1))
    return fmix64(h + GAMMA * (step + 1))


def uniform(key: int, index: int) -> float:
    """Scalar draw in [0, 1) for one counter value."""
    return (fmix64(key + GAMMA * (index + 1)) >> 11) * _TO_UNIT


def uniforms(key: int, index) -> np.ndarray:
    """Vectorised :func:`uniform` over an integer array of counters."""
    z = np.asarray(index, dtype=np.uint64) + np.uint64(1)
    z *= np.uint64(GAMMA)
    z += np.uint64(key)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_M1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_M2)
    z ^= z >> np.uint64(31)
    z >>= np.uint64(11)
    return z.astype(np.float64) * _TO_UNIT


def uniform_range(key: int, start: int, stop: int) -> np.ndarray:
    return uniforms(key, np.arange(start, stop, dtype=np.uint64))


def derive_seed(base_seed: int, *coords: int) -> int:
    """Child seed for a sweep cell; a pure function of its coordinates.

    The result is kept below 2**63 so it round-trips through JSON and CSV
    as an ordinary signed integer.
    """
    h = stream_key(base_seed, SWEEP_SEED, 0)
    for c in coords:
        h = fmix64(h + GAMMA * (c + 1))
    return h >> 1
