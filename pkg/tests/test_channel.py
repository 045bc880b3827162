import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from xpmfocus.channel import (
    CouplingMatrices,
    GvmChannelConfig,
    NoiseSpec,
    VectorOutput,
    gvm_phases,
    gvm_transmit,
    interference_phase,
    interior,
    leakage_factor,
    zero_gvm_channel,
    zero_gvm_step,
)

H2 = CouplingMatrices(np.array([[0.3, 0.7], [0.5, 0.2]]))
HXP = CouplingMatrices.from_rationals([[0, "1/2", "3/5"], ["3/4", 0, "2/3"], ["5/6", "1/5", 0]])


def test_coupling_validation():
    with pytest.raises(ValueError):
        CouplingMatrices(np.array([[1.0, 0.0], [1.0, 1.0]]))
    with pytest.raises(ValueError):
        CouplingMatrices(np.array([[1.0, 1.0]]))
    with pytest.raises(ValueError):
        CouplingMatrices(np.array([[0.0, 0.5], [0.25, 0.0]]), rational=((0, Fraction(1, 3)), (Fraction(1, 4), 0)))
    assert HXP.exact(0, 2) == Fraction(3, 5)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(0.0)


def test_interference_phase_examples():
    assert np.all(interference_phase(np.zeros(3), HXP) == 0)
    m = np.array([1, 2, 3])
    x = np.sqrt(2 * np.pi * np.array([12, 10, 15]) * m)
    psi = interference_phase(x, HXP) / (2 * np.pi)
    assert np.allclose(psi, np.array([[0, 5, 9], [9, 0, 10], [10, 2, 0]]) @ m, rtol=1e-13)
    assert np.allclose(interference_phase(2 * x, HXP), 4 * interference_phase(x, HXP))


def test_zero_gvm_noiseless_properties():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 50)) + 1j * rng.normal(size=(2, 50))
    y = zero_gvm_channel(x, H2)
    assert np.allclose(np.abs(y), np.abs(x), rtol=1e-14)
    x[1] = 0
    y = zero_gvm_channel(x, H2)
    assert np.allclose(np.angle(y[0] / x[0]), np.angle(np.exp(1j * 0.3 * np.abs(x[0]) ** 2)))


def test_focusing_removes_xpm():
    x1 = 1.3 + 0.4j
    x2 = math.sqrt(2 * math.pi / 0.7)  # h12 |x2|^2 = 2 pi
    y = zero_gvm_step([x1, x2], H2)
    assert y[0] == pytest.approx(x1 * np.exp(1j * 0.3 * abs(x1) ** 2), rel=1e-13)


def test_zero_gvm_noise_statistics_and_determinism():
    x = np.zeros((2, 200_000), dtype=complex)
    noise = NoiseSpec(0.5, seed=3)
    y = zero_gvm_channel(x, H2, noise)
    assert np.array_equal(y, zero_gvm_channel(x, H2, noise))
    for k in range(2):
        z = y[k]
        se = math.sqrt(0.5**2 / z.size)
        assert abs(np.mean(np.abs(z) ** 2) - 0.5) < 5 * se
        assert abs(np.mean(z * z)) < 5 * se
        assert abs(np.mean(z)) < 5 * math.sqrt(0.5 / z.size)
    assert abs(np.mean(y[0] * np.conj(y[1]))) < 5 * 0.5 / math.sqrt(x.shape[1])


def test_step_matches_block():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(2, 20)) + 1j * rng.normal(size=(2, 20))
    noise = NoiseSpec(0.1, seed=9, stream_id=4)
    block = zero_gvm_channel(x, H2, noise)
    for j in (0, 7, 19):
        assert np.allclose(zero_gvm_step(x[:, j], H2, noise, time_index=j), block[:, j], rtol=0, atol=0)


def test_leakage_examples():
    assert leakage_factor(2.0, 2) == 1
    assert abs(leakage_factor(3.0, 0)) < 1e-15
    assert leakage_factor(0.5, 0) == pytest.approx(2j / math.pi, abs=1e-15)
    # removable singularity: series and formula agree across the switch
    for d in (0.999e-8, 1.001e-8):
        series = 1 + 1j * math.pi * d - (2 * math.pi**2 / 3) * d**2
        assert leakage_factor(d, 0) == pytest.approx(series, abs=1e-14)


def test_leakage_against_quadrature():
    # rectangular pulse: (1/T) int_0^T exp(i 2 pi d t / T) dt
    for d in (0.5, 1.3, -2.7):
        t = (np.arange(100_000) + 0.5) / 100_000
        oracle = np.mean(np.exp(2j * np.pi * d * t))
        assert leakage_factor(d, 0) == pytest.approx(oracle, abs=1e-9)


@given(st.floats(-50, 50))
def test_leakage_magnitude(d):
    assert abs(leakage_factor(d, 0)) <= 1 + 1e-15


@given(st.floats(-5, 5))
def test_leakage_parseval(v):
    total = sum(abs(leakage_factor(v, f)) ** 2 for f in range(-4000, 4001))
    assert total == pytest.approx(1.0, abs=1e-3)


def cfg3(M12=2, M13=5, M23=3, sets=None):
    coupling = CouplingMatrices(np.array([[0.4, 0.9, 0.3], [0.6, 0.5, 0.7], [0.2, 0.8, 0.1]]))
    return GvmChannelConfig.three_user(coupling, M12, M13, M23, sets)


def brute_force_phases(p, cfg):
    K, n = p.shape
    h, M = cfg.coupling.h, cfg.walkoff

    def P(l, i):
        return p[l, i] if 0 <= i < n else 0.0

    phi = np.zeros((K, n))
    turns = np.zeros((K, n))
    for k in range(K):
        for j in range(n):
            phi[k, j] = h[k, k] * p[k, j]
            for l in range(K):
                if l == k:
                    continue
                m = M[k, l]
                if l > k:
                    phi[k, j] += h[k, l] * sum(P(l, j - r) for r in range(1, m + 1))
                    turns[k, j] += h[k, l] * (P(l, j) - P(l, j - m)) / (2 * math.pi)
                else:
                    phi[k, j] += h[k, l] * sum(P(l, j + m - r) for r in range(1, m + 1))
                    turns[k, j] += h[k, l] * (P(l, j + m) - P(l, j)) / (2 * math.pi)
    return phi, turns


@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31))
def test_gvm_phases_match_brute_force(M12, M23, seed):
    cfg = cfg3(M12, M12 + M23, M23)
    rng = np.random.default_rng(seed)
    p = rng.uniform(0, 3, size=(3, 17))
    phi, turns = gvm_phases(p, cfg)
    bphi, bturns = brute_force_phases(p, cfg)
    assert np.allclose(phi, bphi, rtol=1e-13, atol=1e-13)
    assert np.allclose(turns, bturns, rtol=1e-13, atol=1e-13)


def test_constant_amplitude_decouples():
    cfg = cfg3()
    n = 30
    rng = np.random.default_rng(2)
    x = [np.sqrt(2.0) * np.exp(2j * np.pi * rng.uniform(size=n)) for _ in range(3)]
    out = gvm_transmit(x, cfg)
    phi, turns = gvm_phases(np.abs(np.array(x)) ** 2, cfg)
    sl = interior(n, cfg)
    for k in range(3):
        assert np.allclose(turns[k, sl], 0, atol=1e-14)
        assert np.allclose(phi[k, sl], phi[k, sl][0])
        assert np.allclose(out[k].component(0)[sl], x[k][sl] * np.exp(1j * phi[k, sl]), rtol=1e-13)


def test_focusing_inputs_single_filter():
    # integer turn counts put all signal energy into exactly one filter
    h = np.full((3, 3), 2 * np.pi)
    coupling = CouplingMatrices(h)
    sets = [tuple(range(-12, 13))] * 3
    cfg = GvmChannelConfig.three_user(coupling, 2, 5, 3, sets)
    rng = np.random.default_rng(3)
    x = [np.sqrt(rng.integers(1, 4, size=20)) * np.exp(2j * np.pi * rng.uniform(size=20)) for _ in range(3)]
    out = gvm_transmit(x, cfg)
    _, turns = gvm_phases(np.abs(np.array(x)) ** 2, cfg)
    for k in range(3):
        mag = np.abs(out[k].samples)
        assert np.all(np.sum(mag > 1e-12, axis=1) == 1)
        v = np.rint(turns[k]).astype(int)
        cols = [out[k].freqs.index(f) for f in v]
        assert np.allclose(mag[np.arange(20), cols], np.abs(x[k]))


def test_energy_at_most_input_energy():
    sets = [tuple(range(-3, 4))] * 3
    cfg = cfg3(sets=sets)
    rng = np.random.default_rng(4)
    x = [rng.normal(size=25) + 1j * rng.normal(size=25) for _ in range(3)]
    out = gvm_transmit(x, cfg)
    for k in range(3):
        e = np.sum(np.abs(out[k].samples) ** 2, axis=1)
        assert np.all(e <= np.abs(x[k]) ** 2 * (1 + 1e-12))


def test_gvm_noise_determinism_and_length_check():
    cfg = cfg3(sets=[(-1, 0, 1)] * 3)
    x = [np.ones(10)] * 3
    noise = NoiseSpec(0.2, seed=5)
    a = gvm_transmit(x, cfg, noise)
    b = gvm_transmit(x, cfg, noise)
    assert all(np.array_equal(u.samples, v.samples) for u, v in zip(a, b))
    assert not np.allclose(a[0].component(-1), a[0].component(1))
    with pytest.raises(ValueError):
        gvm_transmit([np.ones(10), np.ones(9), np.ones(10)], cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        cfg3(sets=[(1, 2)] * 3)
    with pytest.raises(ValueError):
        cfg3(M12=0)
    c = cfg3()
    assert c.filter_sets == ((0,), (0,), (0,))
    assert c.max_walkoff == 5
    with pytest.raises(ValueError):
        interior(10, c)


def test_vector_output_access():
    v = VectorOutput((-1, 0, 2), np.arange(6, dtype=complex).reshape(2, 3))
    assert v.component(2)[1] == 5
    assert v.at(0) == {-1: 0, 0: 1, 2: 2}
    with pytest.raises(ValueError):
        VectorOutput((0,), np.zeros((2, 3)))
