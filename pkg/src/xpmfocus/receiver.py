"""Detection for the focusing and genie-aided receivers.

Ring indices returned by :func:`min_distance_amplitude` are 0-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _rng
from .channel import TWO_PI, gvm_phases
from .waveform import matched_filter_samples, nonlinear_phase


@dataclass(frozen=True)
class AmplitudeAlphabet:
    """Ring amplitudes ``sqrt(P_j)`` and the noise variance ``N``."""

    levels: tuple
    noise_var: float

    def __post_init__(self):
        lv = tuple(float(a) for a in self.levels)
        if not lv:
            raise ValueError("alphabet must be nonempty")
        if lv[0] <= 0 or any(b <= a for a, b in zip(lv, lv[1:])):
            raise ValueError("amplitudes must be positive and strictly increasing")
        if not self.noise_var > 0:
            raise ValueError("noise variance must be positive")
        object.__setattr__(self, "levels", lv)

    @classmethod
    def from_powers(cls, powers, N):
        return cls(tuple(math.sqrt(p) for p in powers), N)

    @classmethod
    def uniform(cls, J, delta_sq, N=1.0):
        """``J`` amplitudes ``j sqrt(delta_sq N)`` with normalized spacing ``delta_sq``."""
        step = math.sqrt(delta_sq * N)
        return cls(tuple(step * j for j in range(1, J + 1)), N)

    @property
    def size(self):
        return len(self.levels)

    @property
    def deltas(self):
        """Normalized gaps ``(sqrt(P_j) - sqrt(P_{j-1})) / sqrt(N)``, ``j = 2..J``."""
        return np.diff(self.levels) / math.sqrt(self.noise_var)


def min_distance_amplitude(y, alphabet):
    """Index of the amplitude nearest to ``|y|``; ties go to the smaller index."""
    r = np.abs(np.asarray(y))
    levels = np.asarray(alphabet.levels)
    mids = 0.5 * (levels[1:] + levels[:-1])
    idx = np.searchsorted(mids, r, side="left")
    return int(idx) if np.ndim(idx) == 0 else idx


def pe_bound(alphabet):
    """Error-probability bound ``(2/J) sum_{j>=2} exp(-Delta_j^2 / 4)`` for uniform rings."""
    J = alphabet.size
    if J == 1:
        return 0.0
    return 2.0 / J * math.fsum(np.exp(-alphabet.deltas**2 / 4.0))


def pe_bound_uniform(J, delta_sq):
    """Uniform-spacing form ``2 (J-1)/J exp(-delta_sq / 4)``; never above ``2 exp(-delta_sq/4)``."""
    if J < 1:
        raise ValueError("J must be positive")
    return 2.0 * (J - 1) / J * math.exp(-delta_sq / 4.0)


def empirical_pe(alphabet, trials, seed, stream_id=0, block=1 << 16):
    """Monte Carlo symbol error rate of :func:`min_distance_amplitude`.

    Rings are equiprobable with uniform phase and the noise is complex
    Gaussian of variance ``alphabet.noise_var``.  Returns ``(pe, std_error)``.
    """
    trials = int(trials)
    levels = np.asarray(alphabet.levels)
    errors = 0
    done = 0
    b = 0
    while done < trials:
        m = min(block, trials - done)
        rng = _rng.generator(seed, 11, stream_id, b)
        j = rng.integers(0, levels.size, size=m)
        x = levels[j] * np.exp(1j * rng.uniform(0.0, TWO_PI, size=m))
        y = x + _rng.cscg(seed, (12, stream_id, b), m, alphabet.noise_var)
        errors += int(np.count_nonzero(min_distance_amplitude(y, alphabet) != j))
        done += m
        b += 1
    pe = errors / trials
    return pe, math.sqrt(max(pe * (1.0 - pe), 0.0) / trials)


def realized_turns(codewords, cfg, k, tol=1e-9):
    """Integer phase-ramp counts ``V_k[j]`` of a focusing-grid transmission."""
    x = np.array([np.asarray(c, dtype=complex) for c in codewords])
    _, turns = gvm_phases(np.abs(x) ** 2, cfg)
    v = np.rint(turns[k])
    if np.any(np.abs(turns[k] - v) > tol * np.maximum(1.0, np.abs(v))):
        raise ValueError("phase ramp is not an integer number of turns: inputs are off the focusing grid")
    return v.astype(int)


def focusing_select(output, v, j=None):
    """Output of filter ``v`` (``V_k[j]``), the sufficient statistic under focusing.

    With ``j`` given, ``v`` is a single index and one sample is returned;
    otherwise ``v`` holds one index per time and the selected sequence is
    returned.
    """
    freqs = output.freqs
    if j is not None:
        if int(v) not in freqs:
            raise ValueError(f"filter index {v} not in the receiver's set")
        return output.samples[j, freqs.index(int(v))]
    v = np.asarray(v, dtype=int)
    lookup = {f: i for i, f in enumerate(freqs)}
    try:
        cols = np.array([lookup[int(f)] for f in v])
    except KeyError as e:
        raise ValueError(f"filter index {e.args[0]} not in the receiver's set") from None
    return output.samples[np.arange(len(v)), cols]


def max_magnitude_select(output):
    """Pick the strongest filter at each time (heuristic without side information).

    Returns ``(samples, chosen_indices)``.
    """
    col = np.argmax(np.abs(output.samples), axis=1)
    return output.samples[np.arange(len(output)), col], np.asarray(output.freqs)[col]


def spm_derotate(y, amplitude_hypothesis, h_kk):
    """Undo the SPM rotation implied by an amplitude hypothesis."""
    return np.asarray(y) * np.exp(-1j * h_kk * np.asarray(amplitude_hypothesis) ** 2)


def genie_xpm_cancel(received, codewords, g, pulse, k, noise=None):
    """Genie-aided receiver ``k``: remove XPM of revealed interferers and matched-filter.

    Parameters
    ----------
    received : Waveform
        User ``k``'s field at the fiber output (retarded frame).
    codewords : sequence of arrays
        Every user's codeword; only the interferers' entries are used.
    g : GvmSystemParams
    pulse : PulseSpec
    k : int
    noise : NoiseSpec, optional
        Adds the discrete-model noise of variance ``N`` to each sample.

    Returns
    -------
    ndarray
        ``x[j] exp(i h_kk |x[j]|^2)`` plus noise for rectangular pulses.
    """
    n = len(codewords[k])
    if any(len(c) != n for c in codewords):
        raise ValueError("codewords must have equal length")
    S = int(round(pulse.T_s / received.dt))
    if received.samples.size != n * S:
        raise ValueError("received waveform length does not match the codewords")
    others = [l for l in range(len(codewords)) if l != k]
    xpm = nonlinear_phase(codewords, g, pulse, k, S, "closed", include=others)
    cleaned = type(received)(received.t0, received.dt, received.samples * np.exp(-1j * xpm))
    y = matched_filter_samples(cleaned, pulse, n)
    if noise is not None:
        y = y + _rng.cscg(noise.seed, (noise.stream_id, k, 1 << 20), n, noise.N)
    return y
