"""Counter-based deterministic random numbers.

Every component that needs randomness (initial noise tensors, the synthetic
text encoder, layout initialisation, negative sampling) draws from the
stateless mixing functions below instead of a stateful generator. The scheme
is fully specified so the same seed reproduces the same stream bit-for-bit
across runs, and can be re-implemented exactly in another language:

- ``mix64`` is the splitmix64 finalizer (xor-shift-multiply chain).
- value ``i`` of the stream for ``seed`` is ``mix64(seed + (i + 1) * GOLDEN)``
  with all arithmetic modulo 2**64.
- a uniform in (0, 1] is ``((h >> 11) + 1) * 2**-53``.
- a standard normal uses the Box-Muller cosine branch on two consecutive
  stream values: ``sqrt(-2 ln u1) * cos(2 pi u2)``.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_MULT_1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_MULT_2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = (1 << 64) - 1


def _as_u64(x: int | np.ndarray) -> np.ndarray:
    if isinstance(x, np.ndarray):
        return x.astype(np.uint64, copy=False)
    return np.uint64(int(x) & _U64_MASK)


def mix64(x: int | np.ndarray) -> np.ndarray:
    """splitmix64 finalizer; accepts a scalar or a uint64 array."""
    z = _as_u64(x)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX_MULT_1
        z = (z ^ (z >> np.uint64(27))) * _MIX_MULT_2
        return z ^ (z >> np.uint64(31))


def stream(seed: int, index: int | np.ndarray) -> np.ndarray:
    """Value(s) at position ``index`` of the 64-bit stream for ``seed``."""
    idx = _as_u64(index)
    with np.errstate(over="ignore"):
        return mix64(_as_u64(seed) + (idx + np.uint64(1)) * GOLDEN)


def substream(seed: int, key: int) -> int:
    """Derive an independent stream seed from (seed, key)."""
    return int(stream(seed, key))


def uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """``count`` uniforms in (0, 1] from stream positions start..start+count-1."""
    idx = np.arange(start, start + count, dtype=np.uint64)
    h = stream(seed, idx)
    return ((h >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def normals(seed: int, start: int, count: int) -> np.ndarray:
    """``count`` standard normals; consumes stream positions
    start..start+2*count-1 (two uniforms per sample)."""
    u = uniforms(seed, start, 2 * count)
    u1 = u[0::2]
    u2 = u[1::2]
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
