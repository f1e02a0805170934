"""Counter-based random streams.

Every draw is a pure function of (key, counter, channel), so a particle's
randomness depends only on its genealogy label and the step index, never on
evaluation order or worker count. Keys are derived by folding integers through
the SplitMix64 finalizer.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31 = np.uint64(30), np.uint64(27), np.uint64(31)

# channel ids
CLOCK = 1
INIT = 2
GAUSS = 16  # GAUSS + axis


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _C1
    z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


def mix_int(x: int) -> int:
    """Scalar SplitMix64 finalizer on a Python int."""
    z = x & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive(key: int, *parts: int) -> int:
    """Fold integers into a 64-bit key."""
    for p in parts:
        key = mix_int((key + _GOLDEN * (mix_int(int(p) & _MASK) + 1)) & _MASK)
    return key


def derive_many(keys: np.ndarray, part: int) -> np.ndarray:
    """Vectorised ``derive(k, part)`` over an array of keys."""
    offset = np.uint64((_GOLDEN * (mix_int(int(part) & _MASK) + 1)) & _MASK)
    return _mix(np.asarray(keys, dtype=np.uint64) + offset)


def derive_each(key: int, parts: np.ndarray) -> np.ndarray:
    """Vectorised ``derive(key, p)`` over an array of parts."""
    z = (_mix(np.asarray(parts).astype(np.uint64)) + np.uint64(1)) * np.uint64(_GOLDEN)
    return _mix(np.uint64(key & _MASK) + z)


def uniforms(keys: np.ndarray, counter: int, channel: int) -> np.ndarray:
    """One U(0,1) per key, open at both ends."""
    salt = np.uint64(derive(0x5EED, counter, channel))
    z = _mix(_mix(np.asarray(keys, dtype=np.uint64) ^ salt) + np.uint64(_GOLDEN))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normals(keys: np.ndarray, counter: int, channel: int) -> np.ndarray:
    return ndtri(uniforms(keys, counter, channel))


def exponentials(keys: np.ndarray, counter: int, channel: int) -> np.ndarray:
    return -np.log(uniforms(keys, counter, channel))
