"""Counter-based normal variates: Philox4x32-10 keyed by the seed.

The variate for (seed, path, step, stream) is a pure function of those
integers, so paths can be simulated in any order or batch layout and still
see identical noise.
"""

from __future__ import annotations

import numpy as np

_MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_S32 = np.uint64(32)


def philox4x32(ctr, key, rounds: int = 10):
    """Philox4x32 block function on arrays.

    ``ctr`` is a sequence of four uint32-valued arrays (held as uint64),
    ``key`` a pair of Python ints below 2**32. Returns four uint64 arrays with
    values below 2**32.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in ctr)
    k0, k1 = int(key[0]), int(key[1])
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _S32, p0 & _MASK32
        hi1, lo1 = p1 >> _S32, p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ np.uint64(k0), lo1, hi0 ^ c3 ^ np.uint64(k1), lo0
    return c0, c1, c2, c3


def _split64(v) -> tuple:
    v = np.asarray(v, dtype=np.uint64)
    return v & _MASK32, v >> _S32


def normals(seed: int, path, step, stream: int = 0) -> np.ndarray:
    """Standard normals indexed by (path, step); arrays broadcast.

    Counter words: (step lo, step hi | stream << 24, path lo, path hi); key is
    the 64-bit seed. Box-Muller on two 53-bit uniforms.
    """
    if not 0 <= stream < 256:
        raise ValueError("stream must be in [0, 256)")
    seed = int(seed) % (1 << 64)
    path, step = np.broadcast_arrays(np.asarray(path, dtype=np.int64), np.asarray(step, dtype=np.int64))
    s_lo, s_hi = _split64(step.astype(np.uint64))
    p_lo, p_hi = _split64(path.astype(np.uint64))
    s_hi = (s_hi & np.uint64(0xFFFFFF)) | np.uint64(stream << 24)
    w0, w1, w2, w3 = philox4x32((s_lo, s_hi, p_lo, p_hi), (seed & 0xFFFFFFFF, seed >> 32))
    u1 = ((w0 >> np.uint64(5)) * np.uint64(1 << 26) + (w1 >> np.uint64(6))).astype(np.float64) * 2.0**-53
    u2 = ((w2 >> np.uint64(5)) * np.uint64(1 << 26) + (w3 >> np.uint64(6))).astype(np.float64) * 2.0**-53
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
