"""Counter-based random numbers usable inside numba-compiled loops.

Every draw is a pure function of ``(seed, stream, path, counter)``: a path
key is derived by SplitMix64-style finalisation and the k-th uniform of
that path is the finalised value of ``key + (k + 1) * golden``.  Results
therefore do not depend on how paths are distributed over threads.
"""
from __future__ import annotations

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 2.0 ** -53


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def path_key(seed, stream, path):
    """Key of one path; ``seed``, ``stream`` and ``path`` are uint64."""
    k = mix64(seed + GOLDEN)
    k = mix64(k ^ (stream * GOLDEN + _ONE))
    return mix64(k + path * GOLDEN)


@njit(cache=True, inline="always")
def uniform(key, counter):
    """The ``counter``-th uniform in (0, 1) of a path; never returns 0 or 1."""
    x = mix64(key + (counter + _ONE) * GOLDEN)
    return (np.float64(x >> _S11) + 0.5) * _INV53


def seed_to_uint(seed: int) -> np.uint64:
    """Reduce an arbitrary Python integer seed to 64 bits."""
    return np.uint64(int(seed) % (1 << 64))


def key_of(seed: int, stream: int, path: int) -> np.uint64:
    """Path key for use from Python code.

    Compiled functions hand back plain ints; a key below 2**63 would then be
    typed as int64 on the next compiled call and mixed in floating point.
    """
    return np.uint64(path_key(seed_to_uint(seed), np.uint64(stream), np.uint64(path)))


@njit(cache=True)
def uniforms(seed, stream, path, n):
    """First ``n`` uniforms of a path (for testing the generator)."""
    key = path_key(seed, stream, path)
    out = np.empty(n)
    for i in range(n):
        out[i] = uniform(key, np.uint64(i))
    return out
