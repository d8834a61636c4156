import numpy as np
import pytest
import scipy.linalg
from scipy.integrate import quad_vec

from regnoise.gaussian import (NoiseStream, check_e517, cholesky_blocks, covariance_blocks, hs_semigroup_norm,
                               joint_increment_factor, sample_convolution_increment)
from regnoise.spectral import HeatSpectrum, WaveSpectrum


def _quad_cov(M, g, t):
    f = lambda s: (lambda v: np.outer(v, v))(scipy.linalg.expm(s * M) @ g).ravel()
    return quad_vec(f, 0.0, t, epsabs=1e-14, epsrel=1e-12)[0].reshape(len(g), len(g))


@pytest.mark.parametrize("alpha,rho", [(0.0, 1.0), (0.5, 3.0), (0.75, 1.0)])
def test_wave_covariance_against_quadrature(alpha, rho):
    w = WaveSpectrum.dirichlet(5, alpha, rho)
    q = covariance_blocks(w, 0.37)
    for n in range(5):
        ref = _quad_cov(w.generators()[n], w.noise_vectors()[n], 0.37)
        np.testing.assert_allclose(q[n], ref, rtol=1e-8, atol=1e-14)


def test_near_degenerate_covariance_uses_stable_path():
    w = WaveSpectrum(np.array([1.0]), 0.0, 2.0 * (1 + 2e-8))  # relative discriminant 4e-8
    ref = _quad_cov(w.generators()[0], w.noise_vectors()[0], 0.8)
    np.testing.assert_allclose(covariance_blocks(w, 0.8)[0], ref, rtol=1e-7)


def test_heat_covariance_closed_form():
    h = HeatSpectrum.torus(5, 1.0)
    a = h.alpha_k
    np.testing.assert_allclose(covariance_blocks(h, 0.2)[:, 0, 0], a**-1.0 * (1 - np.exp(-0.4 * a)) / (2 * a))


def test_cholesky_blocks_reconstruct():
    q = covariance_blocks(WaveSpectrum.dirichlet(6, 0.25, 1.0), 0.05)
    L = cholesky_blocks(q)
    np.testing.assert_allclose(L @ np.swapaxes(L, -1, -2), q, rtol=1e-10, atol=1e-18)


def test_trace_at_zero_is_partial_sum():
    w = WaveSpectrum.dirichlet(1000)
    assert hs_semigroup_norm(w, 0.0) == pytest.approx(np.sum(1 / w.mu), rel=1e-14)
    # damping: the trace of e^{tA} G G* e^{tA*} never exceeds its t = 0 value here
    assert np.all(hs_semigroup_norm(w, np.linspace(0, 10, 201)) <= hs_semigroup_norm(w, 0.0) * (1 + 1e-12))


def test_joint_increment_law():
    w = WaveSpectrum.dirichlet(3, 0.0, 1.0)
    h = 0.05
    J = joint_increment_factor(w, h)
    joint = J @ np.swapaxes(J, 1, 2)
    for n in range(3):
        M, g = w.generators()[n], w.noise_vectors()[n]
        cross = quad_vec(lambda s: scipy.linalg.expm((h - s) * M) @ g, 0.0, h, epsabs=1e-15)[0]
        np.testing.assert_allclose(joint[n, :2, 2], cross, rtol=1e-8, atol=1e-15)
        np.testing.assert_allclose(joint[n, :2, :2], _quad_cov(M, g, h), rtol=1e-8, atol=1e-15)
        assert joint[n, 2, 2] == pytest.approx(h)


def test_noise_stream_is_counter_based():
    a = NoiseStream(5, 1)
    b = NoiseStream(5, 1)
    np.testing.assert_array_equal(a.normals(7, (3, 4)), b.normals(7, (3, 4)))
    assert not np.allclose(a.normals(7, (3, 4)), a.normals(8, (3, 4)))
    assert not np.allclose(a.normals(7, (3, 4)), NoiseStream(5, 2).normals(7, (3, 4)))


def test_sampled_increment_variance():
    w = WaveSpectrum.dirichlet(2, 0.0, 1.0)
    x = sample_convolution_increment(w, 0.1, NoiseStream(0), 0, paths=200_000)
    emp = np.einsum("pni,pnj->nij", x, x) / x.shape[0]
    np.testing.assert_allclose(emp, covariance_blocks(w, 0.1), rtol=0.02, atol=1e-6)


def test_weighted_integral_convergence_flags():
    h = HeatSpectrum.torus(400, 0.0, 1)
    # per-mode terms decay like k^{2(2a-1)}: summable for a = 0.1, not for a = 0.4
    assert check_e517(h, 0.1).converged
    assert not check_e517(h, 0.4).converged
