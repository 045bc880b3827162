"""Link-level bookkeeping for noise levels and Kerr coupling.

SI units throughout.  :func:`derive_coupling` turns the physical parameters of
a dispersionless multi-channel link with group velocity mismatch into the
discrete-time coefficients ``h[k, l]`` and walk-off windows ``M[k, l]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

from .channel import CouplingMatrices

SPEED_OF_LIGHT = 299_792_458.0  # m/s

_SNAP_RTOL = 1e-9


@dataclass(frozen=True)
class LinkParams:
    L: float
    alpha: float
    h_nu: float
    n_sp: float
    N_spans: int = 1

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("fiber length must be positive")
        if self.alpha < 0:
            raise ValueError("attenuation must be nonnegative")
        if not self.h_nu > 0:
            raise ValueError("photon energy must be positive")
        if self.n_sp < 1:
            raise ValueError("spontaneous emission factor must be >= 1")
        if int(self.N_spans) != self.N_spans or self.N_spans < 1:
            raise ValueError("number of spans must be a positive integer")


@dataclass(frozen=True)
class NonlinearParams:
    n2: float
    omega0: float
    A_eff: float

    def __post_init__(self):
        if not (self.n2 > 0 and self.omega0 > 0 and self.A_eff > 0):
            raise ValueError("nonlinear parameters must be positive")


def ase_psd_lumped(p):
    """ASE noise PSD with ``N_spans`` equally spaced lumped amplifiers."""
    span = p.L / p.N_spans
    return p.N_spans * math.expm1(p.alpha * span) * p.h_nu * p.n_sp


def ase_psd_distributed(p):
    """ASE noise PSD for ideal distributed amplification."""
    return p.L * p.alpha * p.h_nu * p.n_sp


def nonlinear_coefficient(p):
    """Kerr coefficient ``gamma = n2 omega0 / (c A_eff)`` in 1/(W m)."""
    return p.n2 * p.omega0 / (SPEED_OF_LIGHT * p.A_eff)


@dataclass(frozen=True)
class GvmSystemParams:
    """Physical parameters of a dispersionless link with group velocity mismatch.

    Parameters
    ----------
    gamma : sequence
        Kerr coefficient of each channel, 1/(W m).
    beta1 : sequence
        Inverse group velocity of each channel, s/m, strictly increasing.
    L, T_s, E_s : float
        Fiber length (m), symbol period (s), pulse energy (J).

    Exact rationals (``Fraction`` or ``int``) may be used for every field; the
    derived coefficients are then exact as well.
    """

    gamma: tuple
    beta1: tuple
    L: float
    T_s: float
    E_s: float

    def __post_init__(self):
        object.__setattr__(self, "gamma", tuple(self.gamma))
        object.__setattr__(self, "beta1", tuple(self.beta1))
        if len(self.gamma) != len(self.beta1) or len(self.gamma) < 2:
            raise ValueError("need one gamma and one beta1 per user, at least two users")
        if any(not g > 0 for g in self.gamma):
            raise ValueError("gamma must be positive")
        if not (self.T_s > 0 and self.E_s > 0 and self.L > 0):
            raise ValueError("L, T_s and E_s must be positive")
        if any(b2 <= b1 for b1, b2 in zip(self.beta1, self.beta1[1:])):
            raise ValueError("beta1 must be strictly increasing across users")

    @property
    def users(self):
        return len(self.gamma)

    @property
    def exact(self):
        vals = (*self.gamma, *self.beta1, self.L, self.T_s, self.E_s)
        return all(isinstance(v, Rational) for v in vals)

    def walkoff_ratio(self, k, l):
        """``L |beta1_k - beta1_l| / T_s`` before integer snapping."""
        return self.L * abs(self.beta1[k] - self.beta1[l]) / self.T_s

    def walkoff_time(self, k, l):
        return self.L * abs(self.beta1[k] - self.beta1[l])


def _snap(value, k, l):
    if isinstance(value, Fraction):
        if value.denominator != 1:
            raise ValueError(f"walk-off of pair ({k}, {l}) is {value}, not an integer number of symbols")
        return int(value)
    r = round(float(value))
    if abs(value - r) > _SNAP_RTOL * max(1.0, abs(value)):
        raise ValueError(f"walk-off of pair ({k}, {l}) is {value:.12g} symbols, not an integer")
    return int(r)


def derive_coupling(g):
    """Channel coefficients and walk-off windows of a GVM link.

    ``h[k, k] = gamma_k L E_s / T_s`` and
    ``h[k, l] = 2 gamma_k L_kl E_s / T_s`` with ``L_kl = T_s / |beta1_k - beta1_l|``.

    Returns
    -------
    coupling : CouplingMatrices
        With an exact rational mirror when every input is rational.
    walkoff : ndarray of int
        ``M[k, l] = L |beta1_k - beta1_l| / T_s``, snapped to the nearest
        integer (relative tolerance 1e-9).

    Raises
    ------
    ValueError
        If some pair's walk-off is not an integer number of symbol periods or
        is shorter than one symbol.
    """
    K = g.users
    exact = g.exact
    one = Fraction(1) if exact else 1.0
    conv = Fraction if exact else float
    gamma = [conv(v) for v in g.gamma]
    beta = [conv(v) for v in g.beta1]
    L, T_s, E_s = conv(g.L), conv(g.T_s), conv(g.E_s)
    h = [[one * 0] * K for _ in range(K)]
    walk = np.zeros((K, K), dtype=int)
    for k in range(K):
        h[k][k] = gamma[k] * L * E_s / T_s
        for l in range(K):
            if l == k:
                continue
            m = _snap(L * abs(beta[k] - beta[l]) / T_s, k, l)
            if m < 1:
                raise ValueError(f"walk-off of pair ({k}, {l}) is shorter than one symbol")
            walk[k, l] = m
            L_kl = T_s / abs(beta[k] - beta[l])
            h[k][l] = 2 * gamma[k] * L_kl * E_s / T_s
    if exact:
        return CouplingMatrices.from_rationals(h), walk
    return CouplingMatrices(np.array(h, dtype=float)), walk
