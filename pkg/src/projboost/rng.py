"""Counter-based random number generation.

All randomness in the library flows through this module so that every
artifact (projection banks, synthetic data, Monte-Carlo trials) can be
regenerated bit-for-bit from a 64-bit seed.  The generator is SplitMix64
used in counter mode: output j of stream `key` is ``mix64(key + (j+1)*GAMMA)``
where ``mix64`` is the SplitMix64 finalizer.  Substreams are derived by
hashing (key, index) with a fixed salt, so distinct substreams are
statistically independent and a stream never depends on how many sibling
streams exist.

Gaussians come from the Box-Muller transform applied to consecutive
uniform pairs, which keeps the mapping from counter index to sample value
fixed forever.
"""

from __future__ import annotations

import numpy as np

# Identifies the sampling scheme in serialized bank descriptors.  Bump only
# if the counter layout or the uniform->normal mapping changes.
GENERATOR_ID = "splitmix64-boxmuller-v1"

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_DERIVE_SALT = np.uint64(0xD1B54A32D192ED03)

_U53_INV = float(2.0 ** -53)


def _mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= _MIX1
    z ^= z >> np.uint64(27)
    z *= _MIX2
    z ^= z >> np.uint64(31)
    return z


def mask64(value: int) -> np.uint64:
    """Reduce a Python integer (possibly negative) to a uint64 key."""
    return np.uint64(value & 0xFFFFFFFFFFFFFFFF)


def derive(key: int | np.uint64, index: int) -> np.uint64:
    """Derive substream `index` of stream `key`.

    The salt separates the derivation domain from the output domain, so
    substream keys never collide with stream outputs by construction of
    the inputs alone.
    """
    # Python-int arithmetic wraps explicitly; numpy scalar uint64 ops warn.
    base = ((int(key) ^ int(_DERIVE_SALT))
            + int(_GAMMA) * ((index + 1) & 0xFFFFFFFFFFFFFFFF)) & 0xFFFFFFFFFFFFFFFF
    return _mix64(np.asarray([base], dtype=np.uint64))[0]


def raw(key: int | np.uint64, start: int, count: int) -> np.ndarray:
    """Outputs start..start+count-1 of stream `key` as uint64."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    return _mix64(mask64(int(key)) + _GAMMA * idx)


def uniforms(key: int | np.uint64, count: int, start: int = 0) -> np.ndarray:
    """`count` doubles in (0, 1], one per counter position."""
    bits = raw(key, start, count)
    # 53 high bits, shifted into (0,1] so log() below is always finite.
    return ((bits >> np.uint64(11)).astype(np.float64) + 1.0) * _U53_INV


def normals(key: int | np.uint64, count: int, start: int = 0) -> np.ndarray:
    """`count` standard normals via Box-Muller.

    Counter position 2i feeds the radius and 2i+1 the angle of the i-th
    pair; asking for a prefix of a longer stream returns the same values.
    `start` must be even so the pairing is stable.
    """
    if start % 2 != 0:
        raise ValueError("start must be even for stable Box-Muller pairing")
    pairs = (count + 1) // 2
    u = uniforms(key, 2 * pairs, start=start)
    r = np.sqrt(-2.0 * np.log(u[0::2]))
    theta = (2.0 * np.pi) * u[1::2]
    out = np.empty(2 * pairs, dtype=np.float64)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out[:count]


def integers(key: int | np.uint64, count: int, bound: int, start: int = 0) -> np.ndarray:
    """`count` integers uniform on [0, bound) via fixed-point multiply."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    bits = raw(key, start, count)
    # Lemire-style multiply-shift; bias is < 2^-64 * bound, irrelevant here.
    return ((bits >> np.uint64(11)) * np.uint64(bound)) >> np.uint64(53)


def permutation(key: int | np.uint64, size: int) -> np.ndarray:
    """Deterministic uniform permutation of range(size).

    Sorting one 64-bit counter output per position gives a uniform order
    up to the ~2^-64 chance of a key collision (broken stably).
    """
    if size <= 1:
        return np.arange(size, dtype=np.int64)
    return np.argsort(raw(key, 0, size), kind="stable").astype(np.int64)
