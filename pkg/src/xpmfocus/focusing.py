"""Interference-focusing constellation design.

With rational XPM coefficients, restricting ``|X_k|^2`` to the grid
``2 pi p_k N`` (``p_k`` the *ring unit* of user ``k``) makes every XPM phase
``h[l, k] |X_k|^2`` a multiple of ``2 pi``, so the interference disappears.
This module lays out multi-ring constellations on that grid under a power
budget and derives the filter index sets the receivers need.  Grid design is
done in exact rational arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from . import _rng

TWO_PI = 2.0 * math.pi


class InfeasibleDesign(ValueError):
    """Raised when the power budget cannot accommodate a single focusing ring."""


def _positive_fraction(h, name="coefficient"):
    q = Fraction(h)
    if q <= 0:
        raise ValueError(f"{name} must be a positive rational, got {h}")
    return q


def ring_unit_two_user(h12, h21):
    """Ring units ``(1/h21, 1/h12)`` of a two-user link."""
    h12 = _positive_fraction(h12, "h12")
    h21 = _positive_fraction(h21, "h21")
    return 1 / h21, 1 / h12


def ring_unit_multiuser(coeffs):
    """Ring unit as the lcm of the denominators of the XPM coefficients a user causes."""
    coeffs = [_positive_fraction(h) for h in coeffs]
    if not coeffs:
        raise ValueError("need at least one XPM coefficient")
    return Fraction(math.lcm(*(h.denominator for h in coeffs)))


def finest_ring_unit(coeffs):
    """Smallest ``p > 0`` with ``h p`` an integer for every coefficient ``h``.

    Equals ``lcm(denominators) / gcd(numerators)``; it refines both
    :func:`ring_unit_two_user` (a single coefficient gives ``1/h``) and
    :func:`ring_unit_multiuser`.
    """
    coeffs = [_positive_fraction(h) for h in coeffs]
    if not coeffs:
        raise ValueError("need at least one XPM coefficient")
    return Fraction(math.lcm(*(h.denominator for h in coeffs)), math.gcd(*(h.numerator for h in coeffs)))


def ring_units(coupling, rule="finest"):
    """Ring unit of every user from the exact coupling matrix.

    ``rule`` is ``"finest"`` (default) or ``"lcm"``.  User ``k``'s unit is set
    by the coefficients ``h[l, k]``, ``l != k``, i.e. column ``k``.
    """
    K = coupling.users
    fn = {"finest": finest_ring_unit, "lcm": ring_unit_multiuser}[rule]
    return tuple(fn([coupling.exact(l, k) for l in range(K) if l != k]) for k in range(K))


@dataclass(frozen=True)
class RingConstellation:
    """Multi-ring input distribution of one user.

    Parameters
    ----------
    power_levels : sequence of float
        Ring powers ``|X|^2``, strictly increasing and positive.
    probs : sequence of float
        Ring occupation probabilities.
    phase_law : "uniform" or int
        Continuous uniform phase, or an ``M``-ary phase alphabet ``2 pi m / M``.
    ring_unit : Fraction, optional
        Focusing grid unit ``p``; then ``multiples`` gives each ring as
        ``2 pi p n`` exactly.
    multiples : sequence of int, optional
    """

    power_levels: tuple
    probs: tuple
    phase_law: object = "uniform"
    ring_unit: Fraction | None = None
    multiples: tuple | None = None

    def __post_init__(self):
        levels = tuple(float(p) for p in self.power_levels)
        probs = tuple(float(p) for p in self.probs)
        if not levels or len(levels) != len(probs):
            raise ValueError("need one probability per ring")
        if levels[0] <= 0 or any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("ring powers must be positive and strictly increasing")
        if any(p < 0 for p in probs) or abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError("ring probabilities must be a distribution")
        if not (self.phase_law == "uniform" or (isinstance(self.phase_law, int) and self.phase_law >= 1)):
            raise ValueError("phase_law must be 'uniform' or a positive integer")
        object.__setattr__(self, "power_levels", levels)
        object.__setattr__(self, "probs", probs)
        if (self.ring_unit is None) != (self.multiples is None):
            raise ValueError("ring_unit and multiples go together")
        if self.ring_unit is not None:
            unit = _positive_fraction(self.ring_unit, "ring_unit")
            mult = tuple(int(m) for m in self.multiples)
            if len(mult) != len(levels):
                raise ValueError("need one grid multiple per ring")
            for m, p in zip(mult, levels):
                expected = TWO_PI * float(unit * m)
                if m < 1 or abs(p - expected) > 1e-12 * expected:
                    raise ValueError(f"ring power {p} is off the focusing grid")
            object.__setattr__(self, "ring_unit", unit)
            object.__setattr__(self, "multiples", mult)

    @classmethod
    def on_grid(cls, unit, multiples, probs=None, phase_law="uniform"):
        unit = Fraction(unit)
        multiples = tuple(int(m) for m in multiples)
        levels = tuple(TWO_PI * float(unit * m) for m in multiples)
        if probs is None:
            probs = (1.0 / len(levels),) * len(levels)
        return cls(levels, probs, phase_law, unit, multiples)

    @classmethod
    def single_ring(cls, P, phase_law="uniform"):
        return cls((float(P),), (1.0,), phase_law)

    @property
    def rings(self):
        return len(self.power_levels)

    @property
    def amplitudes(self):
        return np.sqrt(self.power_levels)

    @property
    def mean_power(self):
        return math.fsum(p * w for p, w in zip(self.power_levels, self.probs))

    @property
    def focusing(self):
        return self.ring_unit is not None

    def levels_over_2pi(self):
        """Exact ring powers divided by ``2 pi``."""
        if not self.focusing:
            raise ValueError("constellation is not on a focusing grid")
        return tuple(self.ring_unit * m for m in self.multiples)

    def to_dict(self):
        d = {
            "power_levels": list(self.power_levels),
            "probs": list(self.probs),
            "phase_law": self.phase_law,
        }
        if self.focusing:
            d["ring_unit"] = str(self.ring_unit)
            d["multiples"] = list(self.multiples)
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"power_levels", "probs", "phase_law", "ring_unit", "multiples"}
        if unknown:
            raise ValueError(f"unknown constellation keys: {sorted(unknown)}")
        if "ring_unit" in d:
            return cls.on_grid(Fraction(d["ring_unit"]), d["multiples"], d.get("probs"), d.get("phase_law", "uniform"))
        return cls(tuple(d["power_levels"]), tuple(d["probs"]), d.get("phase_law", "uniform"))


def _mean_ring_power(J, spacing):
    # (1/J) sum_{j<=J} spacing j^2
    return spacing * (J + 1) * (2 * J + 1) / 6.0


def ring_count(P, spacing):
    """Largest ``J`` with ``(1/J) sum_j spacing j^2 <= P`` (0 when none fits)."""
    J = int(math.floor((-3.0 + math.sqrt(1.0 + 48.0 * P / spacing)) / 4.0))
    J = max(J, 0)
    # guard the float floor at exact boundaries
    while _mean_ring_power(J + 1, spacing) <= P:
        J += 1
    while J > 0 and _mean_ring_power(J, spacing) > P:
        J -= 1
    return J


def ring_scale(P, N, ring_unit, a_scale=1.0):
    """Integer ring-spacing factor ``a ~ a_scale N ln(P/N) / (2 pi p)``, at least 1."""
    quantum = TWO_PI * float(ring_unit)
    target = a_scale * N * math.log(P / N) / quantum if P > N else 0.0
    return max(1, int(round(target)))


def design_multiring(P, N, ring_unit, a_scale=1.0, a=None, phase_law="uniform"):
    """Uniformly occupied rings ``|X|^2 = 2 pi p a j^2``, ``j = 1..J``.

    ``a`` defaults to :func:`ring_scale`, so the amplitude spacing grows like
    ``sqrt(N ln(P/N))``; ``J`` is the largest count meeting the power budget.

    Raises
    ------
    InfeasibleDesign
        If even one ring exceeds the budget ``P``.
    """
    if not (P > 0 and N > 0):
        raise ValueError("P and N must be positive")
    unit = _positive_fraction(ring_unit, "ring_unit")
    if a is None:
        a = ring_scale(P, N, unit, a_scale)
    if int(a) != a or a < 1:
        raise ValueError("ring spacing factor a must be a positive integer")
    a = int(a)
    J = ring_count(P, TWO_PI * float(unit) * a)
    if J < 1:
        raise InfeasibleDesign("infeasible focusing grid at this SNR")
    return RingConstellation.on_grid(unit, [a * j * j for j in range(1, J + 1)], phase_law=phase_law)


@dataclass(frozen=True)
class FrequencySets:
    sets: tuple

    def __getitem__(self, k):
        return self.sets[k]

    def __len__(self):
        return len(self.sets)


def _to_int(q, what):
    if q.denominator != 1:
        raise ValueError(f"{what} = {q} is not an integer: power level off the focusing grid")
    return int(q)


def frequency_sets(constellations, coupling, include_edges=False):
    """Filter index sets ``F_k`` covering every realizable phase-ramp count.

    Receiver ``k`` sees the ramp ``V_k = sum_{l != k} h[k, l] (q_l - q'_l)``
    with ``q`` ring powers over ``2 pi`` of user ``l``; the set is the sumset
    of the per-interferer difference sets.  With ``include_edges`` the zero
    power of symbols beyond the codeword ends is admitted as a level too.
    """
    K = coupling.users
    if len(constellations) != K:
        raise ValueError("need one constellation per user")
    sets = []
    for k in range(K):
        parts = []
        for l in range(K):
            if l == k:
                continue
            h = coupling.exact(k, l)
            levels = [_to_int(h * q, f"h[{k},{l}] |X_{l}|^2 / 2pi") for q in constellations[l].levels_over_2pi()]
            if include_edges:
                levels.append(0)
            parts.append({a - b for a in levels for b in levels})
        sets.append(tuple(sorted({sum(c) for c in product(*parts)})))
    return FrequencySets(tuple(sets))


def sample_ring_indices(c, n, seed, stream_id=0):
    rng = _rng.generator(seed, 1, stream_id)
    return rng.choice(c.rings, size=int(n), p=c.probs)


def symbols_from_indices(c, idx, phases):
    return np.asarray(c.amplitudes)[idx] * np.exp(1j * phases)


def sample_symbols(c, n, seed, stream_id=0, return_index=False):
    """``n`` i.i.d. symbols from a ring constellation."""
    idx = sample_ring_indices(c, n, seed, stream_id)
    rng = _rng.generator(seed, 2, stream_id)
    if c.phase_law == "uniform":
        phases = rng.uniform(0.0, TWO_PI, size=int(n))
    else:
        phases = TWO_PI * rng.integers(0, c.phase_law, size=int(n)) / c.phase_law
    x = symbols_from_indices(c, idx, phases)
    return (x, idx) if return_index else x


def gamma_amplitude_sampler(P, n, seed, stream_id=0):
    """Symbols with ``|X|^2 / P`` chi-square with one degree of freedom, uniform phase."""
    if not P > 0:
        raise ValueError("P must be positive")
    rng = _rng.generator(seed, 3, stream_id)
    s = rng.standard_normal(int(n)) ** 2
    phases = rng.uniform(0.0, TWO_PI, size=int(n))
    return np.sqrt(P * s) * np.exp(1j * phases)
