"""Counter-based noise and sample streams.

Every random quantity is addressed by ``(seed, *keys, index)``: the keys pick
an independent Philox stream and ``index`` picks the counter block, so a
chunked or parallel computation draws exactly the samples a serial one does.
"""
from __future__ import annotations

import numpy as np

_U53 = 2.0 ** -53


def _fold(key):
    # spawn keys must be nonnegative
    key = int(key)
    return 2 * key if key >= 0 else -2 * key - 1


def stream_key(seed, *keys):
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=tuple(_fold(k) for k in keys))
    return ss.generate_state(2, dtype=np.uint64)


def raw_blocks(seed, keys, start, n):
    """``(n, 4)`` raw 64-bit words for counter blocks ``start .. start+n-1``."""
    bg = np.random.Philox(key=stream_key(seed, *keys), counter=int(start))
    return bg.random_raw(4 * int(n)).reshape(int(n), 4)


def uniforms(raw):
    """Map raw words to doubles in the open interval (0, 1)."""
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _U53


def cscg(seed, keys, n, variance, start=0):
    """``n`` circularly-symmetric complex Gaussian samples of the given variance.

    Box-Muller on the first two words of each counter block, so sample ``j``
    depends only on ``(seed, keys, start + j)``.
    """
    u = uniforms(raw_blocks(seed, keys, start, n))
    radius = np.sqrt(-float(variance) * np.log(u[:, 0]))
    return radius * np.exp(2j * np.pi * u[:, 1])


def generator(seed, *keys):
    """A numpy Generator on an independent Philox stream."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *keys)))
