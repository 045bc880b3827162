import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from xpmfocus.focusing import RingConstellation, design_multiring
from xpmfocus import inforate as ir


def quad_ring_mi(s):
    # h(Y) - ln(pi e N) by 2-D-free radial quadrature with scipy's Bessel
    a = math.sqrt(s)
    dens = lambda r: 2 * r * math.exp(-(r - a) ** 2) * special.i0e(2 * a * r)
    logq = lambda r: -math.log(math.pi) - (r - a) ** 2 + math.log(special.i0e(2 * a * r))
    h = -integrate.quad(lambda r: dens(r) * logq(r), max(0, a - 14), a + 14, limit=400, epsabs=1e-13)[0]
    return h - math.log(math.pi * math.e)


@pytest.mark.parametrize("s", [0.1, 1.0, 10.0, 100.0, 1e3, 1e4])
def test_ring_mi_against_quadrature(s):
    assert ir.mi_ring_awgn_exact(s, 1.0) == pytest.approx(quad_ring_mi(s), abs=1e-8)


def test_ring_mi_limits():
    # low SNR: the ring is first-order optimal, I ~ P/N
    assert ir.mi_ring_awgn_exact(1e-6, 1.0) == pytest.approx(1e-6, rel=1e-5)
    assert ir.mi_ring_awgn_exact(100.0, 1.0) >= 0.5 * math.log(200) - 1
    assert ir.mi_ring_awgn_exact(100.0, 1.0) == pytest.approx(ir.mi_ring_awgn_exact(200.0, 2.0), rel=1e-13)


@given(st.floats(1.0, 1e5))
def test_sandwich(s):
    lb, ex, cap = ir.one_ring_lb(s, 1.0), ir.mi_ring_awgn_exact(s, 1.0), ir.capacity_awgn(s, 1.0)
    assert lb <= ex + 1e-6
    assert ex <= cap + 1e-6


def test_simple_formulas():
    assert ir.one_ring_lb(math.e**2 / 2, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert ir.one_ring_lb(100, 1) == pytest.approx(0.5 * math.log(200) - 1)
    assert ir.one_ring_lb(1, 1) == 0
    assert ir.amplitude_gamma_lb(2, 1) == 0
    assert ir.amplitude_gamma_lb(200, 1) == pytest.approx(0.5 * math.log(100))
    assert ir.capacity_awgn(0, 1) == 0
    assert ir.capacity_awgn(1, 1) == pytest.approx(math.log(2))
    for f in (ir.one_ring_lb, ir.amplitude_gamma_lb):
        with pytest.raises(ValueError):
            f(0, 1)


def test_binary_entropy():
    assert ir.binary_entropy(0.0) == 0 and ir.binary_entropy(1.0) == 0
    assert ir.binary_entropy(0.5) == pytest.approx(math.log(2))
    with pytest.raises(ValueError):
        ir.binary_entropy(1.5)


def test_mc_one_ring_matches_exact():
    e = ir.mi_mixture_mc(RingConstellation.single_ring(30.0), 1.0, 100_000, seed=1)
    assert abs(e.nats - ir.mi_ring_awgn_exact(30.0, 1.0)) < 3 * e.std_error
    assert e.trials == 100_000 and e.std_error > 0


def test_mc_information_density_oracle():
    # brute-force marginal by direct 2-D Gaussian average over many points on the circle
    c = RingConstellation((1.0, 4.0), (0.3, 0.7))
    rng = np.random.default_rng(0)
    y = rng.normal(size=5) + 1j * rng.normal(size=5)
    th = 2 * np.pi * (np.arange(4096) + 0.5) / 4096
    pts = np.concatenate([np.sqrt(p) * np.exp(1j * th) for p in c.power_levels])
    w = np.concatenate([np.full(4096, q / 4096) for q in c.probs])
    N = 0.7
    brute = np.log(np.sum(w * np.exp(-np.abs(y[:, None] - pts) ** 2 / N), axis=1))
    mean = np.full(5, 1.0 + 0j)
    d = ir.mi_from_samples(y, mean, c, N)
    assert np.allclose(d, -np.abs(y - 1) ** 2 / N - brute, atol=1e-10)


def test_mc_large_noise_is_zero():
    c = RingConstellation.on_grid(Fraction(1, 4), [1, 4, 9])
    e = ir.mi_mixture_mc(c, 1e4, 20_000, seed=2)
    assert abs(e.nats) < max(e.std_error, 1e-6) * 3


def test_mc_multiring_above_analytic_bound():
    c = RingConstellation.on_grid(Fraction(1, 4), [1, 4, 9])
    e = ir.mi_mixture_mc(c, 0.05, 100_000, seed=3)
    assert ir.analytic_multiring_lb(8.0, 0.05, Fraction(1, 4), a=1) <= e.nats + 3 * e.std_error
    assert e.nats <= ir.capacity_awgn(c.mean_power, 0.05) + 3 * e.std_error


def test_mc_spm_invariance():
    for law in ("uniform", 8):
        c = RingConstellation.on_grid(Fraction(1, 4), [1, 4, 9], phase_law=law)
        a = ir.mi_mixture_mc(c, 0.2, 40_000, seed=4, h=0.0)
        b = ir.mi_mixture_mc(c, 0.2, 40_000, seed=5, h=1.3)
        assert abs(a.nats - b.nats) < 3 * math.hypot(a.std_error, b.std_error)


def test_mc_thread_independence():
    c = RingConstellation.on_grid(Fraction(1, 4), [1, 4])
    a = ir.mi_mixture_mc(c, 0.3, 50_000, seed=6, threads=1, block=4096)
    b = ir.mi_mixture_mc(c, 0.3, 50_000, seed=6, threads=4, block=4096)
    assert a == b
    with pytest.raises(ValueError):
        ir.mi_mixture_mc(c, 0.3, 10, seed=6)


def test_gamma_amplitude_mc():
    e = ir.amplitude_mi_gamma_mc(1e4, 1.0, 20_000, seed=7)
    assert e.nats > ir.amplitude_gamma_lb(1e4, 1.0) - 0.5
    assert e.nats < ir.capacity_awgn(1e4, 1.0)


def test_gamma_marginal_normalized():
    # the quadrature marginal integrates to one over the radius
    s = 50.0
    sig = math.sqrt(s)
    def marg(rho):
        f = lambda a: 2 * rho * math.exp(-(rho - a) ** 2) * special.i0e(2 * rho * a) * \
            math.sqrt(2 / (math.pi * s)) * math.exp(-a * a / (2 * s))
        return integrate.quad(f, max(0, rho - 12), rho + 12)[0]
    total = integrate.quad(marg, 0, 6 * sig + 12, limit=200)[0]
    assert total == pytest.approx(1.0, abs=1e-6)


def test_multiring_terms():
    t = ir.multiring_bound_terms(8.0, 0.01, Fraction(1, 4), a=1)
    assert t.rings == 3 and t.spacing_factor == 1
    c = design_multiring(8.0, 0.01, Fraction(1, 4), a=1)
    phase = np.mean([max(0, 0.5 * math.log(2 * p / 0.01) - 1) for p in c.power_levels])
    assert t.phase == pytest.approx(phase)
    # single ring: amplitude term vanishes
    one = ir.multiring_bound_terms(2.0, 0.1, Fraction(1, 4), a=1)
    assert one.rings == 1 and one.amplitude == 0
    assert one.total == pytest.approx(ir.one_ring_lb(np.pi / 2, 0.1))


def test_multiring_amplitude_term_near_ln_j():
    N = 1.0
    q = 2 * math.pi / 100
    a = math.ceil(4 * math.log(2e6) * N / q)
    t = ir.multiring_bound_terms(1e6, N, Fraction(1, 100), a=a)
    assert t.pe <= 1e-6
    assert t.amplitude == pytest.approx(math.log(t.rings), abs=5e-5)


def test_prelog_fit_shapes():
    s = np.logspace(2, 8, 25)
    one = ir.prelog_fit([(v, ir.one_ring_lb(v, 1)) for v in s])
    assert one.slope == pytest.approx(0.5, abs=1e-12)
    awgn = ir.prelog_fit([(v, ir.capacity_awgn(v, 1)) for v in np.logspace(4, 8, 9)])
    assert awgn.slope >= 0.99
    multi = ir.prelog_fit([(v, ir.analytic_multiring_lb(v, 1.0, Fraction(1, 100))) for v in s])
    assert multi.slope >= 0.85
    with pytest.raises(ValueError):
        ir.prelog_fit([(1, 0), (2, 0), (50, 0)])
    with pytest.raises(ValueError):
        ir.prelog_fit([(1, 0), (1000, 0)])


def test_awgn_local_slopes_approach_one():
    pts = [(v, ir.capacity_awgn(v, 1)) for v in np.logspace(0, 6, 61)]
    sl = [v for _, v in ir.decade_slopes(pts)]
    assert all(b > a for a, b in zip(sl, sl[1:]))
    assert sl[-1] == pytest.approx(1, abs=1e-5)


def test_mi_estimate_validation():
    with pytest.raises(ValueError):
        ir.MiEstimate(1.0, -1.0, 10)
    assert ir.MiEstimate(math.log(2), 0, 1).bits == pytest.approx(1.0)
