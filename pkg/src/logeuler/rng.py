"""Counter-based random numbers (Philox4x32-10).

Each draw is a pure function of ``(key, counter)``, so any partition of the
work across threads or processes reproduces the serial stream bit for bit.
The numpy version serves bulk setup work (random phases); the numba kernel
``philox_normal_pair`` is inlined into the stochastic-flow integrator.
"""

import math

import numba
import numpy as np

PHILOX_M0 = 0xD2511F53
PHILOX_M1 = 0xCD9E8D57
PHILOX_W0 = 0x9E3779B9
PHILOX_W1 = 0xBB67AE85
_MASK32 = 0xFFFFFFFF
ROUNDS = 10


def seed_to_key(seed):
    """Split a non-negative integer seed into the two 32-bit key words."""
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return seed & _MASK32, (seed >> 32) & _MASK32


def philox4x32(counters, key):
    """Vectorised Philox4x32-10.

    Parameters
    ----------
    counters : array_like of shape (n, 4)
        Counter words, interpreted modulo 2**32.
    key : tuple of two ints

    Returns
    -------
    ndarray of shape (n, 4), dtype uint32
    """
    c = np.asarray(counters, dtype=np.uint64) & np.uint64(_MASK32)
    c0, c1, c2, c3 = (c[..., i].copy() for i in range(4))
    k0 = np.uint64(key[0] & _MASK32)
    k1 = np.uint64(key[1] & _MASK32)
    m0, m1 = np.uint64(PHILOX_M0), np.uint64(PHILOX_M1)
    mask, shift = np.uint64(_MASK32), np.uint64(32)
    for _ in range(ROUNDS):
        p0 = c0 * m0
        p1 = c2 * m1
        c0, c1, c2, c3 = ((p1 >> shift) ^ c1 ^ k0, p1 & mask,
                          (p0 >> shift) ^ c3 ^ k1, p0 & mask)
        k0 = (k0 + np.uint64(PHILOX_W0)) & mask
        k1 = (k1 + np.uint64(PHILOX_W1)) & mask
    return np.stack([c0, c1, c2, c3], axis=-1).astype(np.uint32)


def uniform_open(hi, lo):
    """Two 32-bit words -> float64 uniform on the open interval (0, 1).

    Uses 52 random bits so that ``x + 1/2`` is exact and the result never
    rounds to 0 or 1.
    """
    hi = np.asarray(hi, dtype=np.uint64) >> np.uint64(6)
    lo = np.asarray(lo, dtype=np.uint64) >> np.uint64(6)
    return ((hi * np.uint64(67108864) + lo).astype(np.float64) + 0.5) / 4503599627370496.0


def normal_pairs(counters, key):
    """Two independent standard normals per counter (Box-Muller)."""
    w = philox4x32(counters, key)
    u1 = uniform_open(w[..., 0], w[..., 1])
    u2 = uniform_open(w[..., 2], w[..., 3])
    r = np.sqrt(-2.0 * np.log(u1))
    return r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)


@numba.njit(cache=True, inline="always")
def _mulhilo(a, b):
    p = a * b
    return p >> 32, p & 0xFFFFFFFF


@numba.njit(cache=True)
def philox_words(c0, c1, c2, c3, k0, k1):
    c0 = np.uint64(c0) & np.uint64(0xFFFFFFFF)
    c1 = np.uint64(c1) & np.uint64(0xFFFFFFFF)
    c2 = np.uint64(c2) & np.uint64(0xFFFFFFFF)
    c3 = np.uint64(c3) & np.uint64(0xFFFFFFFF)
    k0 = np.uint64(k0)
    k1 = np.uint64(k1)
    mask = np.uint64(0xFFFFFFFF)
    for _ in range(10):
        p0 = c0 * np.uint64(0xD2511F53)
        p1 = c2 * np.uint64(0xCD9E8D57)
        n0 = (p1 >> np.uint64(32)) ^ c1 ^ k0
        n2 = (p0 >> np.uint64(32)) ^ c3 ^ k1
        c1 = p1 & mask
        c3 = p0 & mask
        c0 = n0
        c2 = n2
        k0 = (k0 + np.uint64(0x9E3779B9)) & mask
        k1 = (k1 + np.uint64(0xBB67AE85)) & mask
    return c0, c1, c2, c3


@numba.njit(cache=True)
def philox_normal_pair(c0, c1, c2, c3, k0, k1):
    w0, w1, w2, w3 = philox_words(c0, c1, c2, c3, k0, k1)
    u1 = (float((w0 >> np.uint64(6)) * np.uint64(67108864) + (w1 >> np.uint64(6))) + 0.5) \
        / 4503599627370496.0
    u2 = (float((w2 >> np.uint64(6)) * np.uint64(67108864) + (w3 >> np.uint64(6))) + 0.5) \
        / 4503599627370496.0
    r = math.sqrt(-2.0 * math.log(u1))
    return r * math.cos(2.0 * math.pi * u2), r * math.sin(2.0 * math.pi * u2)
