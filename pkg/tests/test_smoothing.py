import numpy as np
import pytest

from regnoise.gaussian import covariance_blocks
from regnoise.smoothing import (TestFunction, fit_loglog, gamma_apply, gamma_norm_rates, grad_R, holder_rate_fit,
                                hs_gamma_G, hs_gamma_G_rate,
                                second_grad_R)
from regnoise.spectral import HeatSpectrum, WaveSpectrum, semigroup_blocks


def test_fit_loglog_recovers_power():
    t = np.logspace(-3, 0, 12)
    fit = fit_loglog(t, 3.0 * t**-1.25)
    assert fit.slope == pytest.approx(-1.25, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)


def test_gamma_apply_heat_closed_form():
    h = HeatSpectrum.torus(6, 0.5)
    z = np.linspace(1, 2, 6)
    q = covariance_blocks(h, 0.3)[:, 0, 0]
    ref = np.sqrt(np.sum(z**2 * np.exp(-0.6 * h.alpha_k) / q))
    assert gamma_apply(h, 0.3, z)[0] == pytest.approx(ref, rel=1e-12)


def test_gamma_apply_wave_against_dense_solve():
    w = WaveSpectrum.dirichlet(3, 0.25, 1.0)
    z = np.arange(1.0, 7.0).reshape(3, 2)
    e, q = semigroup_blocks(w, 0.2), covariance_blocks(w, 0.2)
    ref = sum(float(v @ np.linalg.solve(q[n], v)) for n, v in enumerate(np.einsum("nij,nj->ni", e, z)))
    assert gamma_apply(w, 0.2, z)[0] == pytest.approx(np.sqrt(ref), rel=1e-10)


@pytest.mark.parametrize("gamma", [0.0, 1.0])
def test_heat_lambda1_rate(gamma):
    f1, f2, _ = gamma_norm_rates(HeatSpectrum.torus(400, gamma, 1), np.logspace(-3, -1, 15))
    assert f1.slope == pytest.approx(-(1 + gamma) / 2, abs=0.03)
    assert f2.slope == pytest.approx(-0.5, abs=0.03)


def test_energy_frame_lambda1_rate():
    f1, _, _ = gamma_norm_rates(WaveSpectrum.dirichlet(256, 0.0, 1.0, frame="energy"), np.logspace(-3, -1, 11))
    assert f1.slope == pytest.approx(-1.5, abs=0.02)


def test_mild_frame_lambda1_truncation_flag():
    f1, _, _ = gamma_norm_rates(WaveSpectrum.dirichlet(64, 0.0, 1.0), np.logspace(-3, -1, 11))
    assert not f1.conclusive


def test_grad_R_linear_exact_mean():
    w = WaveSpectrum.dirichlet(2)
    e = np.array([1.0, 0.5, -0.2, 0.3])
    h = np.array([0.0, 1.0, 0.0, 0.0])
    k = np.array([0.2, -1.0, 0.4, 0.1])
    t = 0.2
    est, se = grad_R(w, t, TestFunction.linear(e, h), np.zeros(4), k, 200_000, seed=3)
    E = np.zeros((4, 4))
    blocks = semigroup_blocks(w, t)
    E[:2, :2], E[2:, 2:] = blocks[0], blocks[1]
    ref = (E @ k) @ e * h
    assert abs(est[1] - ref[1]) <= 3 * se[1]


def test_constants_are_annihilated():
    w = WaveSpectrum.dirichlet(2)
    phi = TestFunction.constant(np.ones(4))
    est, se = grad_R(w, 0.1, phi, np.ones(4), np.eye(4)[0])
    np.testing.assert_array_equal(est, 0.0)
    est, se = second_grad_R(w, 0.1, phi, np.ones(4), np.eye(4)[0], np.ones(2))
    np.testing.assert_array_equal(est, 0.0)


def test_holder_seminorm_closed_form():
    phi = TestFunction.holder(np.array([2.0]), np.array([1.0]), 0.5)
    # odd s^(1/2): sup |psi(2s)-psi(-2s)| / |4s|^(1/2) = 2^(1/2) * |e|^(1/2)
    assert phi.holder_seminorm() == pytest.approx(2**0.5 * 2**0.5)


def test_holder_rate_first_order():
    w = WaveSpectrum.dirichlet(2)
    e = np.eye(4)[0]
    fit, _ = holder_rate_fit(w, TestFunction.holder(e, e, 0.75, cap=5.0), e, np.logspace(-2, -1, 5),
                             n_samples=40_000)
    assert fit.slope == pytest.approx(-0.375, abs=0.15)


def test_hs_gamma_G_sums_modes_and_grows_with_N():
    w = WaveSpectrum.dirichlet(8)
    g = w.noise_vectors()
    per_mode = [gamma_apply(w, 0.05, np.where(np.arange(8)[:, None] == n, g, 0.0))[0] ** 2 for n in range(8)]
    assert hs_gamma_G(w, 0.05) == pytest.approx(sum(per_mode), rel=1e-10)
    # not uniform in N: every mode adds a term of order 1/t
    assert hs_gamma_G(WaveSpectrum.dirichlet(64), 0.05) > 4 * hs_gamma_G(w, 0.05)
    assert hs_gamma_G_rate(w, np.logspace(-3, -2, 6)).slope == pytest.approx(-0.5, abs=0.1)
