"""Keyed xoshiro256** streams.

A stream is identified by ``(seed, replica, stream)``.  The key is hashed with
splitmix64 into the 256-bit xoshiro state, so every replica owns an
independent, reproducible sequence no matter which worker thread runs it.
The generator functions are kernels: they operate on a ``uint64[4]`` state
array in place and can be called from compiled and interpreted code alike.
"""

import numpy as np

from ._jit import kernel_context, njit

MASK64 = (1 << 64) - 1

# stream ids
STREAM_INIT = 0
STREAM_DYNAMICS = 1
STREAM_COUPLED = 2


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return x, z ^ (z >> 31)


def make_state(seed, replica=0, stream=0):
    """Return the xoshiro state for ``(seed, replica, stream)``."""
    seed = int(seed) & MASK64
    key = seed
    for part in (int(replica) & MASK64, int(stream) & MASK64):
        _, h = _splitmix64(key)
        key = h ^ ((part * 0xD1342543DE82EF95) & MASK64)
    words = []
    x = key
    for _ in range(4):
        x, z = _splitmix64(x)
        words.append(z)
    if not any(words):  # all-zero state is a fixed point of xoshiro
        words[0] = 1
    return np.array(words, dtype=np.uint64)


@njit
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit
def next_u64(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit
def next_double(s):
    """Uniform on [0, 1) with 53 random bits."""
    return float(next_u64(s) >> np.uint64(11)) * 1.1102230246251565e-16


@njit
def next_exp(s, rate):
    """Exponential variate with the given rate (rate > 0)."""
    return -np.log(1.0 - next_double(s)) / rate


@njit
def fill_uniform(s, out):
    for i in range(out.shape[0]):
        out[i] = next_double(s)


class Stream:
    """Thin Python handle around a keyed state, for non-kernel callers."""

    def __init__(self, seed, replica=0, stream=0):
        self.state = make_state(seed, replica, stream)

    def random(self, size=None):
        with kernel_context():
            if size is None:
                return next_double(self.state)
            out = np.empty(int(np.prod(size)), dtype=np.float64)
            fill_uniform(self.state, out)
        return out.reshape(size)

    def exponential(self, rate):
        with kernel_context():
            return next_exp(self.state, float(rate))
