"""Continuous-time reference path for the walk-off channel.

Pulses launched on a uniform time grid propagate through a lossless,
dispersionless fiber under the exact solution of the coupled Kerr equations:
the envelope magnitude travels at its group velocity while the phase picks up
SPM plus walk-off-averaged XPM.  Detection uses a bank of frequency-shifted
matched filters ``h_f(t) = p*(-t) exp(-i 2 pi f K(-t))``.  Sampling the bank at
the symbol instants reproduces the discrete-time model of
:mod:`xpmfocus.channel`, which is how that model is validated.

Grids use cell midpoints ``t_i = (i + 1/2) T_s / S``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .channel import VectorOutput
from .specfun import QuadratureSpec, adaptive_quad

_MIN_SAMPLES = 64


@dataclass(frozen=True)
class PulseSpec:
    """Transmit pulse supported on ``[0, T_s)``.

    ``kind="rectangular"`` is the constant-envelope pulse of energy ``E_s``.
    ``kind="sampled"`` holds complex ``samples`` taken as the pulse value on
    equal cells of ``[0, T_s)``; their energy must equal ``E_s``.
    """

    kind: str = "rectangular"
    T_s: float = 1.0
    E_s: float = 1.0
    samples: tuple | None = None

    def __post_init__(self):
        if not (self.T_s > 0 and self.E_s > 0):
            raise ValueError("T_s and E_s must be positive")
        if self.kind == "rectangular":
            if self.samples is not None:
                raise ValueError("rectangular pulse takes no samples")
        elif self.kind == "sampled":
            s = np.asarray(self.samples, dtype=complex)
            if s.ndim != 1 or s.size == 0:
                raise ValueError("sampled pulse needs a 1-D sample array")
            energy = float(np.sum(np.abs(s) ** 2)) * self.T_s / s.size
            if abs(energy - self.E_s) > 1e-10 * self.E_s:
                raise ValueError(f"pulse energy {energy!r} differs from E_s={self.E_s!r}")
            object.__setattr__(self, "samples", tuple(s))
        else:
            raise ValueError(f"unknown pulse kind {self.kind!r}")

    @classmethod
    def sampled_normalized(cls, samples, T_s=1.0, E_s=1.0):
        s = np.asarray(samples, dtype=complex)
        scale = math.sqrt(E_s / (float(np.sum(np.abs(s) ** 2)) * T_s / s.size))
        return cls("sampled", T_s, E_s, tuple(s * scale))

    @property
    def cells(self):
        return 1 if self.kind == "rectangular" else len(self.samples)

    def _cell_values(self):
        if self.kind == "rectangular":
            return np.array([math.sqrt(self.E_s / self.T_s)], dtype=complex)
        return np.asarray(self.samples, dtype=complex)

    def value(self, t):
        """Pulse amplitude ``p(t)``; zero outside ``[0, T_s)``."""
        t = np.asarray(t, dtype=float)
        vals = self._cell_values()
        inside = (t >= 0) & (t < self.T_s)
        idx = np.clip(np.floor(t / self.T_s * vals.size).astype(int), 0, vals.size - 1)
        return np.where(inside, vals[idx], 0.0)

    def rise(self, t):
        """Normalized cumulative energy ``K(t)``."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        vals = self._cell_values()
        m = vals.size
        width = self.T_s / m
        cum = np.concatenate([[0.0], np.cumsum(np.abs(vals) ** 2) * width]) / self.E_s
        tc = np.clip(t, 0.0, self.T_s)
        idx = np.clip(np.floor(tc / width).astype(int), 0, m - 1)
        out = cum[idx] + np.abs(vals[idx]) ** 2 * (tc - idx * width) / self.E_s
        out = np.where(t >= self.T_s, 1.0, np.where(t <= 0, 0.0, out))
        return float(out) if scalar else out


def rise_function(p, t):
    """``K(t) = (1/E_s) int_0^t |p|^2``."""
    return p.rise(t)


def overlap_function(p, t, d, L):
    """Fraction of one pulse's energy inside the walk-off window ending at ``t``.

    ``psi(t; d) = (1/E_s) int_{t - L d}^{t} |p|^2`` for the regime
    ``L d >= T_s``.
    """
    Ld = L * d
    if Ld < p.T_s * (1 - 1e-12):
        raise ValueError("overlap_function supports only L d >= T_s")
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    out = np.where(
        (t >= 0) & (t < p.T_s),
        p.rise(t),
        np.where(
            (t >= p.T_s) & (t < Ld),
            1.0,
            np.where((t >= Ld) & (t < Ld + p.T_s), 1.0 - p.rise(t - Ld), 0.0),
        ),
    )
    return float(out) if scalar else out


@dataclass(frozen=True)
class Waveform:
    """Field samples ``samples[i]`` at times ``t0 + (i + 1/2) dt``."""

    t0: float
    dt: float
    samples: np.ndarray

    @property
    def times(self):
        return self.t0 + (np.arange(self.samples.size) + 0.5) * self.dt


def _grid(n, T_s, S):
    return (np.arange(n * S) + 0.5) * (T_s / S)


def _check_resolution(S, pulse):
    if S < _MIN_SAMPLES:
        raise ValueError(f"need at least {_MIN_SAMPLES} samples per symbol, got {S}")
    if S % pulse.cells:
        raise ValueError("samples per symbol must be a multiple of the pulse cell count")


def launch(codeword, pulse, S):
    """Transmit field ``A(0, t) = sum_m x[m] p(t - m T_s)`` on the midpoint grid."""
    x = np.asarray(codeword, dtype=complex)
    shape = pulse.value((np.arange(S) + 0.5) * (pulse.T_s / S))
    return (x[:, None] * shape[None, :]).ravel()


def _xpm_closed(power_l, pulse, t, D, L):
    # 2 gamma_k factor excluded: int_0^L |A_l(0, t + D zeta)|^2 d zeta via psi
    T = pulse.T_s
    d = abs(D)
    Ld = L * d
    M = int(round(Ld / T))
    s = Ld if D > 0 else 0.0
    n = power_l.size
    u = t + s
    base = np.floor(u / T).astype(int)
    acc = np.zeros_like(t)
    for r in range(M + 2):
        m = base - r
        ok = (m >= 0) & (m < n)
        tau = u - np.clip(m, 0, n - 1) * T
        acc += np.where(ok, power_l[np.clip(m, 0, n - 1)] * overlap_function(pulse, tau, d, L), 0.0)
    return acc * pulse.E_s / d


def _xpm_quadrature(codeword_l, pulse, t, D, L):
    # composite midpoint over segments on which |A_l(0, .)|^2 is constant
    T = pulse.T_s
    d = abs(D)
    lo = np.minimum(t, t + D * L)
    hi = np.maximum(t, t + D * L)
    cell = T / pulse.cells
    nseg = int(math.ceil(L * d / cell)) + 2
    first = (np.floor(lo / cell) + 1.0) * cell
    edges = first[:, None] + cell * np.arange(nseg - 1)[None, :]
    edges = np.clip(edges, lo[:, None], hi[:, None])
    edges = np.concatenate([lo[:, None], edges, hi[:, None]], axis=1)
    mids = 0.5 * (edges[:, 1:] + edges[:, :-1])
    widths = np.diff(edges, axis=1)
    x = np.asarray(codeword_l, dtype=complex)
    m = np.floor(mids / T).astype(int)
    ok = (m >= 0) & (m < x.size)
    field = np.where(ok, x[np.clip(m, 0, x.size - 1)] * pulse.value(mids - np.clip(m, 0, x.size - 1) * T), 0.0)
    return np.sum(np.abs(field) ** 2 * widths, axis=1) / d


def nonlinear_phase(codewords, g, pulse, k, S=256, method="closed", include=None):
    """Nonlinear phase ``phi_k(t)`` of user ``k`` on its retarded midpoint grid.

    ``include`` selects which users contribute (default all); the SPM term is
    ``gamma_k L |A_k(0, t)|^2`` and each XPM term is ``2 gamma_k`` times the
    walk-off integral of the interferer's launched power.
    """
    _check_resolution(S, pulse)
    x = [np.asarray(c, dtype=complex) for c in codewords]
    n = x[0].size
    t = _grid(n, pulse.T_s, S)
    include = range(len(x)) if include is None else include
    phi = np.zeros_like(t)
    for l in include:
        if l == k:
            phi += float(g.gamma[k]) * float(g.L) * np.abs(launch(x[k], pulse, S)) ** 2
            continue
        D = float(g.beta1[k]) - float(g.beta1[l])
        if method == "closed":
            integral = _xpm_closed(np.abs(x[l]) ** 2, pulse, t, D, float(g.L))
        elif method == "quadrature":
            integral = _xpm_quadrature(x[l], pulse, t, D, float(g.L))
        else:
            raise ValueError(f"unknown method {method!r}")
        phi += 2.0 * float(g.gamma[k]) * integral
    return phi


def propagate_analytic(codewords, g, pulse, S=256, method="closed"):
    """Fields ``A_k(L, t)`` at the fiber output for every user.

    Each returned :class:`Waveform` starts at ``t0 = beta1_k L`` and holds
    ``A_k(0, t) exp(i phi_k(t))`` on the retarded grid over ``[0, n T_s)``.
    """
    if len({len(c) for c in codewords}) != 1:
        raise ValueError("codewords must have equal length")
    if len(codewords) != g.users:
        raise ValueError("need one codeword per user")
    _check_resolution(S, pulse)
    out = []
    for k in range(g.users):
        a0 = launch(codewords[k], pulse, S)
        phi = nonlinear_phase(codewords, g, pulse, k, S, method)
        out.append(Waveform(float(g.beta1[k]) * float(g.L), pulse.T_s / S, a0 * np.exp(1j * phi)))
    return out


def _matched_taps(pulse, S, f):
    tau = (np.arange(S) + 0.5) * (pulse.T_s / S)
    return np.conj(pulse.value(tau)) * np.exp(-2j * np.pi * f * pulse.rise(tau))


@dataclass(frozen=True)
class FilterBank:
    """Frequency-shifted matched filters ``h_f(t) = p*(-t) exp(-i 2 pi f K(-t))``."""

    pulse: PulseSpec
    indices: tuple

    def __post_init__(self):
        idx = tuple(sorted({int(f) for f in self.indices}))
        if not idx:
            raise ValueError("filter bank needs at least one index")
        object.__setattr__(self, "indices", idx)

    def inner_product(self, f1, f2, S=256, nodes=16):
        return filter_inner_product(self.pulse, f1, f2, S, nodes)

    def max_cross_correlation(self, S=256):
        """Largest ``|<h_f1, h_f2>| / E_s`` over distinct index pairs."""
        worst = 0.0
        for i, f1 in enumerate(self.indices):
            for f2 in self.indices[i + 1 :]:
                worst = max(worst, abs(self.inner_product(f1, f2, S)) / self.pulse.E_s)
        return worst


def filterbank_receive(waveform, bank, n):
    """Noiseless filter-bank samples at the symbol instants, divided by ``E_s``.

    The convolution with each ``h_f`` is a direct sum over the one-symbol
    pulse support, sampled at ``t = waveform.t0 + j T_s``; the retarded frame
    of the waveform puts ``t0`` at ``beta1_k L``.
    """
    pulse = bank.pulse
    S = int(round(pulse.T_s / waveform.dt))
    if waveform.samples.size < n * S:
        raise ValueError("waveform shorter than n symbols")
    r = waveform.samples[: n * S].reshape(n, S)
    taps = np.stack([_matched_taps(pulse, S, f) for f in bank.indices], axis=1)
    y = r @ taps * (waveform.dt / pulse.E_s)
    return VectorOutput(bank.indices, y)


def matched_filter_samples(waveform, pulse, n):
    """Output of the plain matched filter ``p*(-t)`` at the symbol instants, over ``E_s``."""
    S = int(round(pulse.T_s / waveform.dt))
    r = waveform.samples[: n * S].reshape(n, S)
    return r @ _matched_taps(pulse, S, 0) * (waveform.dt / pulse.E_s)


def filter_inner_product(pulse, f1, f2, S=256, nodes=16):
    """``int h_f1(t) conj(h_f2(t)) dt`` by Gauss-Legendre on the ``S``-cell grid."""
    if S % pulse.cells:
        raise ValueError("S must be a multiple of the pulse cell count")
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    width = pulse.T_s / S
    left = np.arange(S) * width
    tau = (left[:, None] + 0.5 * width * (xg[None, :] + 1.0)).ravel()
    w = np.tile(0.5 * width * wg, S)
    integrand = np.abs(pulse.value(tau)) ** 2 * np.exp(-2j * np.pi * (f1 - f2) * pulse.rise(tau))
    return complex(np.sum(w * integrand))


def leibniz_integral(p, B, method="closed", spec=QuadratureSpec()):
    """``int_0^{T_s} (|p|^2 / E_s) exp(B K(tau)) d tau``.

    ``method="closed"`` gives ``(e^B - 1) / B`` (1 at ``B = 0``);
    ``method="quadrature"`` integrates adaptively over the pulse cells.
    """
    B = complex(B)
    if method == "closed":
        return 1.0 + 0j if B == 0 else np.expm1(B) / B
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    points = list(np.arange(1, p.cells) * (p.T_s / p.cells)) or None

    def f(tau):
        return complex(np.abs(p.value(tau)) ** 2 / p.E_s * np.exp(B * p.rise(tau)))

    return complex(adaptive_quad(f, 0.0, p.T_s, spec, points=points, complex_valued=True))


def write_waveform_csv(path, waveforms):
    """Dump waveforms as ``user,t,re,im`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user", "t", "re", "im"])
        for k, wf in enumerate(waveforms):
            for t, v in zip(wf.times, wf.samples):
                w.writerow([k, f"{t:.12g}", f"{v.real:.12g}", f"{v.imag:.12g}"])
