import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from regnoise.spectral import (Approximant, HeatSpectrum, WaveSpectrum, eigenpair, from_physical, interior_grid,
                               lattice_modes, semigroup_blocks, to_physical)


@pytest.mark.parametrize("alpha,rho", [(0.0, 1.0), (0.25, 3.0), (0.5, 1.0), (0.5, 3.0), (0.75, 1.0), (0.875, 3.0)])
@pytest.mark.parametrize("t", [1e-3, 0.1, 1.0])
def test_semigroup_matches_scipy_expm(alpha, rho, t):
    w = WaveSpectrum.dirichlet(12, alpha, rho)
    blocks = semigroup_blocks(w, t)
    for n, M in enumerate(w.generators()):
        np.testing.assert_allclose(blocks[n], scipy.linalg.expm(t * M), rtol=1e-9, atol=1e-12)


def test_semigroup_near_critical_damping():
    # rho^2 just above 4 mu: nearly repeated eigenvalue
    w = WaveSpectrum(np.array([1.0]), 0.0, 2.0 * (1 + 1e-7))
    np.testing.assert_allclose(semigroup_blocks(w, 0.7)[0], scipy.linalg.expm(0.7 * w.generators()[0]),
                               rtol=1e-7, atol=1e-10)


def test_repeated_eigenvalue_rejected():
    with pytest.raises(ValueError, match="repeated eigenvalue"):
        WaveSpectrum(np.array([1.0, 4.0]), 0.0, 2.0)


@settings(max_examples=60, deadline=None)
@given(alpha=st.floats(0.0, 0.95), rho=st.floats(0.1, 10.0), n=st.integers(1, 5000))
def test_vieta_identities(alpha, rho, n):
    mu = np.array([(math.pi * n) ** 2])
    crit = 4 * mu[0] ** (1 - 2 * alpha)
    if abs(rho**2 - crit) / crit < 1e-6:
        return
    p = eigenpair(WaveSpectrum(mu, alpha, rho), 0)
    assert abs(p.lambda_plus * p.lambda_minus - mu[0]) <= 1e-12 * mu[0]
    assert abs(p.lambda_plus + p.lambda_minus + rho * mu[0] ** alpha) <= 1e-12 * rho * mu[0] ** alpha


def test_yosida_matches_resolvent_formula():
    w = WaveSpectrum.dirichlet(4, 0.25, 1.0)
    m = 50.0
    ap = Approximant(w, "yosida", m)
    for n, M in enumerate(w.generators()):
        Am = m * M @ np.linalg.inv(m * np.eye(2) - M)
        np.testing.assert_allclose(ap.expm(0.3)[n], scipy.linalg.expm(0.3 * Am), rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(ap.expm(-0.3)[n] @ ap.expm(0.3)[n], np.eye(2), atol=1e-10)


def test_yosida_converges_to_semigroup():
    w = WaveSpectrum.dirichlet(3, 0.0, 1.0)
    errs = [np.max(np.abs(Approximant(w, "yosida", m).expm(0.5) - semigroup_blocks(w, 0.5))) for m in (1e2, 1e3, 1e4)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-2


def test_heat_yosida_rates():
    h = HeatSpectrum.torus(4, 0.0)
    ap = Approximant(h, "yosida", 10.0)
    a = h.alpha_k
    np.testing.assert_allclose(ap.expm(1.0)[:, 0, 0], np.exp(-10 * a / (10 + a)))


def test_projection_freezes_dropped_modes():
    w = WaveSpectrum.dirichlet(4)
    ap = Approximant(w, "projection", 2)
    e = ap.expm(-0.4)
    np.testing.assert_allclose(e[2:], np.broadcast_to(np.eye(2), (2, 2, 2)))
    np.testing.assert_allclose(e[0], scipy.linalg.expm(-0.4 * w.generators()[0]), rtol=1e-10)


def test_exact_refuses_negative_time():
    with pytest.raises(ValueError):
        Approximant(WaveSpectrum.dirichlet(2), "exact").expm(-0.1)


def test_physical_roundtrip_and_direct_sum():
    grid = interior_grid(64)
    rng = np.random.default_rng(0)
    c = rng.standard_normal(16)
    vals = to_physical(c, grid)
    direct = np.sqrt(2) * np.sin(np.pi * np.outer(grid, np.arange(1, 17))) @ c
    np.testing.assert_allclose(vals, direct, atol=1e-12)
    np.testing.assert_allclose(from_physical(vals, grid, 16), c, atol=1e-12)


def test_physical_grid_too_coarse():
    with pytest.raises(ValueError, match="aliasing"):
        to_physical(np.ones(8), interior_grid(4))


def test_lattice_ordering():
    ks = lattice_modes(2, 8)
    norms = np.sum(ks**2, axis=1)
    assert list(norms) == [1, 1, 1, 1, 2, 2, 2, 2]
    h = HeatSpectrum.torus(8, 1.0, 2)
    np.testing.assert_allclose(h.noise_gain(), norms**-0.5)


def test_first_eigenpair_value():
    p = eigenpair(WaveSpectrum.dirichlet(1, 0.0, 1.0), 0)
    pair = sorted([complex(p.lambda_plus), complex(p.lambda_minus)], key=lambda z: z.imag)
    im = math.sqrt(math.pi**2 - 0.25)  # 3.101548...
    np.testing.assert_allclose(pair, [complex(-0.5, -im), complex(-0.5, im)], rtol=1e-14)
