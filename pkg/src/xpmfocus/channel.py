"""Discrete-time multiuser XPM channels.

Two models are provided.

* The memoryless zero-walk-off model, where every sample of user ``k`` is
  rotated by ``sum_l h[k, l] |x_l|^2`` and hit by complex Gaussian noise.
* The walk-off (group velocity mismatch) model, where interfering users slide
  past each other over ``M[k, l]`` symbol periods, the XPM phase acquires
  memory, and the within-symbol phase ramp leaks the signal into a bank of
  frequency-shifted matched filters.  Receiver ``k`` observes one complex
  sample per filter index ``f`` in its set ``F_k``.

Users are indexed in order of increasing inverse group velocity, so user 0
is the fastest.  Samples are normalized by the pulse energy; the noise
variance ``N`` is per complex filter output.  Powers at time indices outside
``[0, n)`` are taken as zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _rng

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class CouplingMatrices:
    """SPM (diagonal) and XPM (off-diagonal) channel coefficients.

    Parameters
    ----------
    h : array_like, shape (K, K)
        Real coefficients.  Off-diagonal entries must be positive; the
        diagonal may be zero when SPM is irrelevant to an experiment.
    rational : tuple of tuples of Fraction, optional
        Exact mirror of ``h`` used by the focusing design.
    """

    h: np.ndarray
    rational: tuple | None = None

    def __post_init__(self):
        h = np.array(self.h, dtype=float)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("coupling matrix must be square")
        off = ~np.eye(h.shape[0], dtype=bool)
        if np.any(h[off] <= 0) or np.any(np.diag(h) < 0):
            raise ValueError("XPM coefficients must be positive and SPM nonnegative")
        object.__setattr__(self, "h", h)
        if self.rational is not None:
            rat = tuple(tuple(Fraction(v) for v in row) for row in self.rational)
            if np.array(rat, dtype=float).shape != h.shape:
                raise ValueError("rational mirror has the wrong shape")
            for i, row in enumerate(rat):
                for j, v in enumerate(row):
                    if float(v) != h[i, j]:
                        raise ValueError(f"rational mirror differs from h at ({i}, {j})")
            object.__setattr__(self, "rational", rat)

    @classmethod
    def from_rationals(cls, matrix):
        """Build from a matrix of rationals (``Fraction``, int or ``"num/den"``)."""
        rat = tuple(tuple(Fraction(v) for v in row) for row in matrix)
        return cls(np.array([[float(v) for v in row] for row in rat]), rat)

    @property
    def users(self):
        return self.h.shape[0]

    @property
    def spm(self):
        return np.diag(np.diag(self.h))

    @property
    def xpm(self):
        return self.h - self.spm

    def exact(self, k, l):
        if self.rational is None:
            raise ValueError("coupling has no exact rational mirror")
        return self.rational[k][l]


@dataclass(frozen=True)
class NoiseSpec:
    N: float
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        if not self.N > 0:
            raise ValueError("noise variance must be positive")


def interference_phase(x, coupling):
    """Interference phase vector ``(H_SP + H_XP) |x|^2``.

    ``x`` has the users along its first axis; extra axes (time) broadcast.
    """
    power = np.abs(np.asarray(x)) ** 2
    return np.tensordot(coupling.h, power, axes=1)


def zero_gvm_channel(x, coupling, noise=None):
    """Memoryless K-user channel applied to ``x`` of shape ``(K, n)``.

    The noise sample of user ``k`` at time ``j`` depends only on
    ``(seed, stream_id, k, j)``.
    """
    x = np.asarray(x, dtype=complex)
    if x.ndim == 1:
        x = x[:, None]
    y = x * np.exp(1j * interference_phase(x, coupling))
    if noise is not None:
        for k in range(x.shape[0]):
            y[k] += _rng.cscg(noise.seed, (noise.stream_id, k), x.shape[1], noise.N)
    return y


def zero_gvm_step(x, coupling, noise=None, time_index=0):
    """One channel use of the memoryless model for the input vector ``x``."""
    x = np.asarray(x, dtype=complex)
    y = x * np.exp(1j * interference_phase(x, coupling))
    if noise is not None:
        for k in range(x.shape[0]):
            y[k] += _rng.cscg(noise.seed, (noise.stream_id, k), 1, noise.N, start=time_index)[0]
    return y


def leakage_factor(v, f):
    """Signal gain of filter ``f`` when the XPM phase ramp covers ``v`` turns.

    ``(exp(i 2 pi (v - f)) - 1) / (i 2 pi (v - f))``, continuous at ``v = f``
    where it equals 1.
    """
    d = np.asarray(v, dtype=float) - np.asarray(f, dtype=float)
    scalar = d.ndim == 0
    d = np.atleast_1d(d)
    out = np.empty(d.shape, dtype=complex)
    near = np.abs(d) < 1e-8
    w = 2j * np.pi * d[~near]
    out[~near] = np.expm1(w) / w
    dn = d[near]
    out[near] = 1.0 + 1j * np.pi * dn - (2.0 * np.pi**2 / 3.0) * dn**2
    return complex(out[0]) if scalar else out


def _prefix(p):
    # C(i) = sum_{m < i} p[m], clipped to [0, n]
    c = np.concatenate([np.zeros(p.shape[:-1] + (1,)), np.cumsum(p, axis=-1)], axis=-1)

    def at(i):
        return c[..., np.clip(i, 0, p.shape[-1])]

    return at


def _shift(p, s):
    # q[j] = p[j + s], zero outside the codeword
    n = p.shape[-1]
    idx = np.arange(n) + s
    ok = (idx >= 0) & (idx < n)
    out = np.zeros_like(p)
    out[..., ok] = p[..., idx[ok]]
    return out


@dataclass(frozen=True)
class GvmChannelConfig:
    """Walk-off channel configuration.

    Parameters
    ----------
    coupling : CouplingMatrices
    walkoff : array_like of int, shape (K, K)
        Symmetric matrix of walk-off windows ``M[k, l] >= 1`` (diagonal ignored).
    filter_sets : sequence of sequences of int
        Filter indices ``F_k`` of each receiver; each must contain 0.
    """

    coupling: CouplingMatrices
    walkoff: np.ndarray
    filter_sets: tuple = field(default=None)

    def __post_init__(self):
        K = self.coupling.users
        m = np.array(self.walkoff, dtype=int)
        if m.shape != (K, K):
            raise ValueError("walk-off matrix must match the coupling shape")
        off = ~np.eye(K, dtype=bool)
        if np.any(m[off] < 1) or np.any(m != m.T):
            raise ValueError("walk-off windows must be symmetric positive integers")
        object.__setattr__(self, "walkoff", m)
        sets = self.filter_sets
        if sets is None:
            sets = ((0,),) * K
        sets = tuple(tuple(sorted(int(f) for f in set(s))) for s in sets)
        if len(sets) != K or any(0 not in s for s in sets):
            raise ValueError("every receiver needs a filter set containing 0")
        object.__setattr__(self, "filter_sets", sets)

    @classmethod
    def three_user(cls, coupling, M12, M13, M23, filter_sets=None):
        m = np.array([[0, M12, M13], [M12, 0, M23], [M13, M23, 0]])
        return cls(coupling, m, filter_sets)

    @property
    def users(self):
        return self.coupling.users

    @property
    def max_walkoff(self):
        return int(self.walkoff.max())


@dataclass(frozen=True)
class VectorOutput:
    """Filter-bank samples of one receiver: ``samples[j, i]`` is filter ``freqs[i]`` at time ``j``."""

    freqs: tuple
    samples: np.ndarray

    def __post_init__(self):
        if self.samples.ndim != 2 or self.samples.shape[1] != len(self.freqs):
            raise ValueError("samples must have one column per filter index")

    def __len__(self):
        return self.samples.shape[0]

    def component(self, f):
        return self.samples[:, self.freqs.index(int(f))]

    def at(self, j):
        return dict(zip(self.freqs, self.samples[j]))


def gvm_phases(powers, cfg):
    """Per-symbol XPM/SPM phase ``Phi[k, j]`` and phase-ramp turns ``V[k, j]``.

    ``powers`` has shape ``(K, n)`` and holds ``|x_k[j]|^2``.
    """
    p = np.asarray(powers, dtype=float)
    K, n = p.shape
    h = cfg.coupling.h
    j = np.arange(n)
    phi = np.diag(h)[:, None] * p
    turns = np.zeros_like(p)
    for k in range(K):
        for l in range(K):
            if l == k:
                continue
            m = int(cfg.walkoff[k, l])
            c = _prefix(p[l])
            if l > k:
                # slower interferer: the window trails the symbol
                window = c(j) - c(j - m)
                ramp = p[l] - _shift(p[l], -m)
            else:
                # faster interferer: the window leads the symbol
                window = c(j + m) - c(j)
                ramp = _shift(p[l], m) - p[l]
            phi[k] += h[k, l] * window
            turns[k] += h[k, l] * ramp / TWO_PI
    return phi, turns


def gvm_transmit(codewords, cfg, noise=None):
    """Pass ``K`` equal-length codewords through the walk-off channel.

    Returns one :class:`VectorOutput` per receiver.  Noise of filter ``f`` at
    receiver ``k`` is an independent stream keyed by ``(stream_id, k, f)``.
    """
    if len({len(c) for c in codewords}) != 1:
        raise ValueError("codewords must have equal length")
    x = np.array([np.asarray(c, dtype=complex) for c in codewords])
    if x.shape[0] != cfg.users:
        raise ValueError(f"expected {cfg.users} codewords, got {x.shape[0]}")
    phi, turns = gvm_phases(np.abs(x) ** 2, cfg)
    outputs = []
    for k in range(cfg.users):
        freqs = cfg.filter_sets[k]
        base = x[k] * np.exp(1j * phi[k])
        cols = []
        for f in freqs:
            col = base * leakage_factor(turns[k], f)
            if noise is not None:
                col = col + _rng.cscg(noise.seed, (noise.stream_id, k, f), x.shape[1], noise.N)
            cols.append(col)
        outputs.append(VectorOutput(freqs, np.stack(cols, axis=1)))
    return outputs


def interior(n, cfg):
    """Slice of time indices unaffected by the codeword edges."""
    m = cfg.max_walkoff
    if n <= 2 * m:
        raise ValueError("codeword too short to have an interior")
    return slice(m, n - m)
