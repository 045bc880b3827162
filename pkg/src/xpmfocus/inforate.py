"""Information rates and their analytic bounds.

All rates are in nats.  Monte Carlo estimators work in independent blocks,
each on its own counter-based stream, and reduce the block sums in block
order, so the result does not depend on the thread count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import _rng
from .focusing import TWO_PI, design_multiring, sample_symbols
from .specfun import bessel_i0e

_WINDOW = 12.0  # Gaussian radial tails beyond 12 sigma are below e^-144
_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)


@dataclass(frozen=True)
class MiEstimate:
    nats: float
    std_error: float
    trials: int

    def __post_init__(self):
        if self.std_error < 0 or self.trials < 1:
            raise ValueError("std_error must be >= 0 and trials >= 1")

    @property
    def bits(self):
        return self.nats / math.log(2.0)


@dataclass(frozen=True)
class PrelogFit:
    points: tuple
    slope: float
    intercept: float

    def __post_init__(self):
        if len(self.points) < 3:
            raise ValueError("a pre-log fit needs at least 3 points")


def capacity_awgn(P, N):
    """``ln(1 + P/N)``."""
    if P < 0 or not N > 0:
        raise ValueError("need P >= 0 and N > 0")
    return math.log1p(P / N)


def one_ring_lb(P, N):
    """Lower bound ``max(0, ln(2P/N)/2 - 1)`` on the one-ring rate."""
    _check_pn(P, N)
    return max(0.0, 0.5 * math.log(2.0 * P / N) - 1.0)


def amplitude_gamma_lb(P, N):
    """Main term ``max(0, ln(P/2N)/2)`` of the amplitude-only rate; asymptotic only."""
    _check_pn(P, N)
    return max(0.0, 0.5 * math.log(P / (2.0 * N)))


def _check_pn(P, N):
    if not (P > 0 and N > 0):
        raise ValueError("P and N must be positive")


def _panels(lo, hi, count):
    # Gauss-Legendre nodes/weights on `count` equal panels of [lo, hi]
    edges = np.linspace(lo, hi, count + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    w = (half[:, None] * _GL_W[None, :]).ravel()
    return x, w


def mi_ring_awgn_exact(P, N, panels=24):
    """``I(X;Y)`` for ``X`` uniform on the circle of radius ``sqrt(P)`` in CSCG noise.

    With ``a = sqrt(P/N)`` and ``r = |Y|/sqrt(N)``, whose density is
    ``2 r exp(-(r - a)^2) i0e(2 a r)``, the rate is
    ``-2 a E[r - a] - E[ln i0e(2 a r)]``.  The radial expectation uses
    composite Gauss-Legendre on ``a +- 12``; the error is far below 1e-10.
    """
    _check_pn(P, N)
    a = math.sqrt(P / N)
    r, w = _panels(max(0.0, a - _WINDOW), a + _WINDOW, panels)
    e = bessel_i0e(2.0 * a * r)
    dens = 2.0 * r * np.exp(-((r - a) ** 2)) * e
    val = -2.0 * a * np.sum(w * dens * (r - a)) - np.sum(w * dens * np.log(e))
    return max(0.0, float(val))


def _log_mixture_density(y, c, N, h=0.0):
    """``ln p(y)`` of the ring mixture, without the common ``-ln(pi N)``."""
    y = np.asarray(y)
    P = np.asarray(c.power_levels)
    logw = np.log(np.asarray(c.probs))
    if c.phase_law == "uniform":
        rad = np.abs(y)[:, None]
        z = 2.0 * rad * np.sqrt(P)[None, :] / N
        terms = -((rad - np.sqrt(P)[None, :]) ** 2) / N + np.log(bessel_i0e(z))
        return logsumexp(terms + logw[None, :], axis=1)
    M = int(c.phase_law)
    ang = TWO_PI * np.arange(M) / M
    pts = (np.sqrt(P)[:, None] * np.exp(1j * (ang[None, :] + h * P[:, None]))).ravel()
    lw = np.repeat(logw - math.log(M), M)
    terms = -np.abs(y[:, None] - pts[None, :]) ** 2 / N
    return logsumexp(terms + lw[None, :], axis=1)


def mi_from_samples(y, mean, c, N, h=0.0):
    """Per-sample information density ``ln p(y|x) - ln p(y)`` in nats.

    ``mean`` is the noiseless output ``x exp(i h |x|^2)``; ``h`` only matters
    for discrete phase alphabets, whose rotated mixture it defines.
    """
    y = np.asarray(y, dtype=complex)
    cond = -np.abs(y - np.asarray(mean)) ** 2 / N
    return cond - _log_mixture_density(y, c, N, h)


def _summarize(values, trials):
    values = np.asarray(values)
    std = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return MiEstimate(float(np.mean(values)), std / math.sqrt(values.size), trials)


def _block_sizes(trials, block):
    full, rest = divmod(int(trials), int(block))
    return [block] * full + ([rest] if rest else [])


def _reduce_blocks(fn, sizes, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, range(len(sizes)), sizes))
    else:
        parts = [fn(b, m) for b, m in enumerate(sizes)]
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    return s1, s2


def _estimate(s1, s2, n):
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return MiEstimate(mean, math.sqrt(var / n), n)


def mi_mixture_mc(c, N, trials=100_000, seed=0, h=0.0, block=1 << 14, threads=1):
    """Monte Carlo ``I(X;Y)`` for ``Y = X exp(i h |X|^2) + Z`` with the exact output density."""
    if trials < 1000:
        raise ValueError("need at least 1000 trials")
    if not N > 0:
        raise ValueError("N must be positive")

    def run(b, m):
        x = sample_symbols(c, m, seed, stream_id=b)
        mean = x * np.exp(1j * h * np.abs(x) ** 2)
        y = mean + _rng.cscg(seed, (21, b), m, N)
        d = mi_from_samples(y, mean, c, N, h)
        return math.fsum(d), math.fsum(d * d)

    s1, s2 = _reduce_blocks(run, _block_sizes(trials, block), threads)
    return _estimate(s1, s2, int(trials))


def _log_amp_likelihood(rho, a):
    # ln p(rho | a) without the common 2 rho factor; normalized amplitudes
    return -((rho - a) ** 2) + np.log(bessel_i0e(2.0 * rho * a))


def amplitude_mi_gamma_mc(P, N, trials=100_000, seed=0, block=1 << 12, panels=16, threads=1):
    """Monte Carlo ``I(|X|^2; |Y|^2)`` when ``|X|^2 / P`` is chi-square with one degree of freedom.

    The marginal radial density is a Gauss-Legendre integral of the Rician
    likelihood against the half-normal amplitude prior, taken over the window
    where the likelihood is non-negligible.
    """
    _check_pn(P, N)
    s = P / N
    sig = math.sqrt(s)

    def run(b, m):
        rng = _rng.generator(seed, 31, b)
        a = sig * np.abs(rng.standard_normal(m))
        y = a * np.exp(1j * rng.uniform(0, TWO_PI, m)) + _rng.cscg(seed, (32, b), m, 1.0)
        rho = np.abs(y)
        lo = np.maximum(0.0, rho - _WINDOW)
        hi = rho + _WINDOW
        half = 0.5 * (hi - lo) / panels
        k = np.arange(panels)
        mid = lo[:, None] + half[:, None] * (2 * k[None, :] + 1)
        nodes = (mid[:, :, None] + half[:, None, None] * _GL_X[None, None, :]).reshape(m, -1)
        w = np.repeat(half, panels * _GL_X.size).reshape(m, -1) * np.tile(_GL_W, panels)[None, :]
        log_prior = 0.5 * math.log(2.0 / (math.pi * s)) - nodes**2 / (2.0 * s)
        log_marg = logsumexp(_log_amp_likelihood(rho[:, None], nodes) + log_prior, b=w, axis=1)
        d = _log_amp_likelihood(rho, a) - log_marg
        return math.fsum(d), math.fsum(d * d)

    s1, s2 = _reduce_blocks(run, _block_sizes(trials, block), threads)
    return _estimate(s1, s2, int(trials))


def binary_entropy(p):
    """``H2(p)`` in nats."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log(p) - (1.0 - p) * math.log1p(-p)


@dataclass(frozen=True)
class MultiringBound:
    total: float
    phase: float
    amplitude: float
    rings: int
    spacing_factor: int
    pe: float


def multiring_bound_terms(P, N, ring_unit, a_scale=1.0, a=None):
    """Phase and amplitude terms of the multi-ring lower bound.

    Phase: the average over rings of the one-ring bound.  Amplitude: the
    Fano-type bound ``ln J - H2(Pe) - Pe ln(J-1)`` with
    ``Pe = min(1, 2 exp(-a q / 4N))``, ``q = 2 pi ring_unit``.  Fano's bound
    only decreases in ``Pe`` up to ``(J-1)/J``; past that the term is 0.
    """
    c = design_multiring(P, N, ring_unit, a_scale=a_scale, a=a)
    J = c.rings
    a_used = c.multiples[0]
    phase = math.fsum(max(0.0, 0.5 * math.log(2.0 * p / N) - 1.0) for p in c.power_levels) / J
    q = TWO_PI * float(c.ring_unit)
    pe = min(1.0, 2.0 * math.exp(-a_used * q / (4.0 * N)))
    amp = 0.0
    if J > 1 and pe < (J - 1) / J:
        amp = max(0.0, math.log(J) - binary_entropy(pe) - pe * math.log(J - 1))
    return MultiringBound(phase + amp, phase, amp, J, a_used, pe)


def analytic_multiring_lb(P, N, ring_unit, a_scale=1.0, a=None):
    """Lower bound on the multi-ring rate built by :func:`~xpmfocus.focusing.design_multiring`."""
    return multiring_bound_terms(P, N, ring_unit, a_scale, a).total


def _fit_line(x, y):
    slope, intercept = np.polyfit(np.asarray(x), np.asarray(y), 1)
    return float(slope), float(intercept)


def prelog_fit(points):
    """Least-squares slope of rate vs ``ln(P/N)`` over the top half of the SNR range.

    ``points`` holds ``(snr, rate)`` pairs with ``snr = P/N`` linear.
    """
    pts = sorted((float(s), float(r)) for s, r in points)
    if len(pts) < 3:
        raise ValueError("need at least 3 SNR points")
    if any(s <= 0 for s, _ in pts):
        raise ValueError("SNR values must be positive")
    if pts[-1][0] / pts[0][0] < 100.0 * (1 - 1e-12):
        raise ValueError("SNR points must span at least two decades")
    lnx = [math.log(s) for s, _ in pts]
    cut = 0.5 * (lnx[0] + lnx[-1])
    top = [(lx, r) for lx, (_, r) in zip(lnx, pts) if lx >= cut - 1e-12]
    if len(top) < 2:
        raise ValueError("not enough points in the upper half of the SNR range")
    slope, intercept = _fit_line(*zip(*top))
    return PrelogFit(tuple((lx, r) for lx, (_, r) in zip(lnx, pts)), slope, intercept)


def decade_slopes(points, decades=None):
    """Least-squares slope in each whole decade of the top half of the SNR range.

    Returns a list of ``(decade_start_snr, slope)``.
    """
    fit = prelog_fit(points)
    lnx = [p[0] for p in fit.points]
    cut = 0.5 * (lnx[0] + lnx[-1])
    ln10 = math.log(10.0)
    out = []
    start = cut
    while start + ln10 <= lnx[-1] + 1e-9:
        sel = [(x, r) for x, r in fit.points if start - 1e-9 <= x <= start + ln10 + 1e-9]
        if len(sel) >= 2:
            out.append((math.exp(start), _fit_line(*zip(*sel))[0]))
        start += ln10
    return out if decades is None else out[-decades:]
