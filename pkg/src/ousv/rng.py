"""Counter-based random number streams.

Monte Carlo reproducibility here rests on a keyed, counter-based generator
(Philox4x32-10): draw ``d`` of path ``p`` is a pure function of
``(seed, p, d)``, so path streams can be generated independently, in any
chunking, on any number of workers, and still be bit-identical. Normal
variates are obtained by applying the inverse normal CDF to the uniform
stream, which keeps the uniform-to-normal map monotone (antithetic draws
are exact mirror images).
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange, uint64, float64
from scipy.special import ndtri

__all__ = ["uniform_stream", "normal_stream"]

_MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)


def philox4x32(counter, key, rounds: int = 10):
    """Apply Philox4x32 to an array of counters.

    Reference implementation used by tests; the hot path is the numba
    kernel below. ``counter`` is (n, 4) and ``key`` (2,), both holding
    32-bit values in uint64 arrays. Returns the (n, 4) output block.
    """
    counter = np.asarray(counter, dtype=np.uint64)
    x0, x1, x2, x3 = (counter[:, i].copy() for i in range(4))
    k0 = np.uint64(key[0])
    k1 = np.uint64(key[1])
    for r in range(rounds):
        if r > 0:
            k0 = (k0 + _W0) & _MASK32
            k1 = (k1 + _W1) & _MASK32
        p0 = _M0 * x0
        p1 = _M1 * x2
        x0, x1, x2, x3 = (
            (p1 >> np.uint64(32)) ^ x1 ^ k0,
            p1 & _MASK32,
            (p0 >> np.uint64(32)) ^ x3 ^ k1,
            p0 & _MASK32,
        )
    return np.stack([x0, x1, x2, x3], axis=1)


@njit(parallel=True, cache=True)
def _philox_uniforms(seed, path_lo, n_paths, offset, n_draws, out):  # pragma: no cover
    M0 = uint64(0xD2511F53)
    M1 = uint64(0xCD9E8D57)
    W0 = uint64(0x9E3779B9)
    W1 = uint64(0xBB67AE85)
    MASK = uint64(0xFFFFFFFF)
    k0b = uint64(seed) & MASK
    k1b = (uint64(seed) >> uint64(32)) & MASK
    n_blocks = (n_draws + 1) // 2
    b0 = offset // 2
    for p in prange(n_paths):
        pid = uint64(path_lo + p)
        c2 = pid & MASK
        c3 = (pid >> uint64(32)) & MASK
        for b in range(n_blocks):
            blk = uint64(b0 + b)
            x0 = blk & MASK
            x1 = (blk >> uint64(32)) & MASK
            x2 = c2
            x3 = c3
            k0 = k0b
            k1 = k1b
            for r in range(10):
                if r > 0:
                    k0 = (k0 + W0) & MASK
                    k1 = (k1 + W1) & MASK
                p0 = M0 * x0
                p1 = M1 * x2
                hi0 = p0 >> uint64(32)
                lo0 = p0 & MASK
                hi1 = p1 >> uint64(32)
                lo1 = p1 & MASK
                x0 = hi1 ^ x1 ^ k0
                x1 = lo1
                x2 = hi0 ^ x3 ^ k1
                x3 = lo0
            # one counter block yields two 53-bit uniforms in (0, 1)
            u0 = (float64(((x0 >> uint64(5)) << uint64(26)) | (x1 >> uint64(6))) + 0.5) * (2.0 ** -53)
            u1 = (float64(((x2 >> uint64(5)) << uint64(26)) | (x3 >> uint64(6))) + 0.5) * (2.0 ** -53)
            j = 2 * b
            out[p, j] = u0
            if j + 1 < n_draws:
                out[p, j + 1] = u1


def uniform_stream(seed: int, path_lo: int, n_paths: int, n_draws: int,
                   offset: int = 0) -> np.ndarray:
    """Uniforms in (0,1): row p holds draws [offset, offset+n_draws) of path path_lo+p.

    ``offset`` must be even so segments stay aligned to counter blocks.
    """
    if offset % 2 != 0:
        raise ValueError("draw offset must be even")
    out = np.empty((n_paths, n_draws))
    _philox_uniforms(seed, path_lo, n_paths, offset, n_draws, out)
    return out


def normal_stream(seed: int, path_lo: int, n_paths: int, n_draws: int,
                  offset: int = 0) -> np.ndarray:
    """Standard normals via inverse-CDF transform of the uniform stream."""
    return ndtri(uniform_stream(seed, path_lo, n_paths, n_draws, offset))


def block_offset(n_draws: int) -> int:
    """Smallest even offset at or above n_draws (start of the next segment)."""
    return 2 * ((n_draws + 1) // 2)
