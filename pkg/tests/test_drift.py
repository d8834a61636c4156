import numpy as np
import pytest

from regnoise.drift import ConstantDrift, HeatNonlocal, ScalarHolder, WaveHolder, ZeroDrift, torus_basis
from regnoise.spectral import HeatSpectrum, WaveSpectrum


def test_torus_basis_orthonormal():
    h = HeatSpectrum.torus(12, 0.0, 2)
    B, cell = torus_basis(h.wavevectors, 16)
    np.testing.assert_allclose(cell * B @ B.T, np.eye(12), atol=1e-12)


def test_wave_holder_respects_bound():
    w = WaveSpectrum.dirichlet(16)
    dr = WaveHolder(w, beta=0.75, cap=5.0)
    X = 10 * np.random.default_rng(0).standard_normal((500, 32))
    assert np.max(np.linalg.norm(dr.modal(0.0, X), axis=-1)) <= dr.sup_norm()


def test_wave_holder_nemytskii_on_single_mode():
    w = WaveSpectrum.dirichlet(8)
    dr = WaveHolder(w, beta=1.0, cap=np.inf)
    X = np.zeros(16)
    X[0] = 0.3  # y = 0.3 sqrt(2) sin(pi xi): the identity map reproduces it
    np.testing.assert_allclose(dr(0.0, X), np.eye(8)[0] * 0.3, atol=1e-12)


def test_heat_nonlocal_bound_and_rank_one():
    h = HeatSpectrum.torus(6, 0.5, 1)
    dr = HeatNonlocal(h, beta=0.75, cap=1.0, scale=2.0)
    X = 5 * np.random.default_rng(1).standard_normal((300, 6))
    C = dr(0.0, X)
    assert np.linalg.matrix_rank(C) == 1
    assert np.max(np.linalg.norm(dr.modal(0.0, X), axis=-1)) <= dr.sup_norm() * (1 + 1e-12)


def test_constant_and_zero():
    w = WaveSpectrum.dirichlet(3)
    c = ConstantDrift(w, [1.0, 2.0, 3.0])
    assert c.sup_norm() == pytest.approx(np.linalg.norm(np.array([1, 2, 3]) / (np.pi * np.arange(1, 4))))
    assert np.all(ZeroDrift(w).modal(0.0, np.ones((2, 6))) == 0)


def test_scalar_holder_smoothing_is_lipschitz():
    h = HeatSpectrum.torus(1)
    dr = ScalarHolder(h, [1.0], [1.0], beta=0.75, cap=2.0, smooth=0.05)
    s = np.linspace(-1, 1, 20001)[:, None]
    v = dr(0.0, s)[:, 0]
    assert np.max(np.abs(np.diff(v)) / np.diff(s[:, 0])) < 1 / 0.05
