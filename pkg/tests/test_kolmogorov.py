import numpy as np
import pytest
from scipy.special import hyp1f1

from regnoise import kolmogorov as K
from regnoise.drift import ConstantDrift, HeatNonlocal, ZeroDrift
from regnoise.gaussian import cholesky_blocks, covariance_blocks
from regnoise.spectral import Approximant, HeatSpectrum, WaveSpectrum, semigroup_blocks

QUICK = K.SolverConfig(time_nodes=9, space_nodes=21, hermite_order=32)


def _heat1():
    spec = HeatSpectrum.torus(1, 0.0)
    return spec, HeatNonlocal(spec, beta=0.75, cap=1.0, scale=2.0)


def test_hermite_rule_moments():
    z, w = K.hermite_rule(2, 6)
    assert w.sum() == pytest.approx(1.0)
    assert np.dot(w, z[:, 0] ** 2) == pytest.approx(1.0)
    assert np.dot(w, z[:, 0] ** 4) == pytest.approx(3.0)
    assert np.dot(w, z[:, 0] * z[:, 1]) == pytest.approx(0.0, abs=1e-14)


def test_apply_R_characteristic_function():
    w = WaveSpectrum.dirichlet(1, 0.0, 1.0)
    x = np.array([0.4, -0.2])
    k = np.array([1.3, 0.7])
    s = 0.3
    m = semigroup_blocks(w, s)[0] @ x
    L = cholesky_blocks(covariance_blocks(w, s))[0]
    ref = np.cos(k @ m) * np.exp(-0.5 * np.sum((L.T @ k) ** 2))
    val = K.apply_R(w, s, lambda y: np.cos(y @ k), x, tol=1e-12)
    assert val == pytest.approx(ref, abs=1e-11)


def test_apply_R_reports_unresolved_order():
    w = WaveSpectrum.dirichlet(1, 0.0, 1.0)
    with pytest.raises(RuntimeError):
        K.apply_R(w, 1.0, lambda y: np.cos(40 * y[..., 0]), np.zeros(2), tol=1e-14, max_order=12)


@pytest.mark.parametrize("spec", [HeatSpectrum.torus(1, 0.0), WaveSpectrum.dirichlet(1, 0.0, 1.0)])
def test_zero_and_constant_drift_closed_forms(spec):
    ap = Approximant(spec, "exact")
    gf, _ = K.picard_solve(K.KolmogorovProblem(spec, ZeroDrift(spec), ap, 1.0), QUICK)
    assert np.max(np.abs(gf.value)) == 0.0 and np.max(np.abs(gf.grad)) == 0.0
    gf, _ = K.picard_solve(K.KolmogorovProblem(spec, ConstantDrift(spec, [0.8]), ap, 1.0), QUICK)
    ref = K.constant_drift_solution(spec, ap, [0.8], 1.0, gf.times)
    ref = ref.reshape((len(gf.times),) + (1,) * len(gf.axes) + (-1,))
    np.testing.assert_allclose(gf.value, np.broadcast_to(ref, gf.value.shape), atol=1e-10)
    assert np.max(np.abs(gf.grad)) <= 1e-10


def test_constant_drift_solution_heat_scalar():
    spec = HeatSpectrum.torus(1, 0.0)
    a = spec.alpha_k[0]
    t = np.array([0.0, 0.5])
    ref = 0.8 * (1 - np.exp(-a * (1 - t))) / a
    got = K.constant_drift_solution(spec, Approximant(spec, "exact"), [0.8], 1.0, t)[:, 0]
    np.testing.assert_allclose(got, ref, rtol=1e-12)


@pytest.fixture(scope="module")
def holder_solution():
    spec, dr = _heat1()
    pb = K.KolmogorovProblem(spec, dr, Approximant(spec, "exact"), 1.0)
    gf, rec = K.picard_solve(pb, QUICK)
    return pb, gf, rec


def test_picard_converges_and_is_a_fixed_point(holder_solution):
    pb, gf, rec = holder_solution
    assert rec.converged
    assert K.fixed_point_residual(pb, gf, QUICK) <= 1e-8


def test_weighted_contraction_improves_with_gamma(holder_solution):
    _, _, rec = holder_solution
    gammas = [0.0, 1.0, 2.0, 4.0, 8.0]
    early = [float(np.exp(np.mean(np.log(K.contraction_diagnostic(rec, g)[:3])))) for g in gammas]
    assert all(b <= a * (1 + 1e-9) for a, b in zip(early[:-1], early[1:]))
    assert early[-1] < early[0]


def test_picard_matches_monte_carlo(holder_solution):
    pb, gf, _ = holder_solution
    x0 = np.array([0.3])
    m, se = K.feynman_kac_value(pb, x0, n_paths=40_000, n_steps=100, seed=1)
    assert abs(gf.u(0.0, x0).ravel()[0] - m[0]) <= 3 * se[0] + 2e-3 * abs(m[0])


def test_projected_source_zeroes_dropped_modes():
    spec = HeatSpectrum.torus(2, 0.0)
    dr = HeatNonlocal(spec, beta=0.75, cap=1.0, scale=2.0)
    cfg = K.SolverConfig(time_nodes=7, space_nodes=9, hermite_order=4, tol=1e-8)
    pb = K.KolmogorovProblem(spec, dr, Approximant(spec, "projection", 1), 0.5, project_source=True)
    gf, _ = K.picard_solve(pb, cfg)
    assert K.component_zero_check(gf, 1) == 0.0


def test_heat_kernel_integral_hypergeometric():
    spec = HeatSpectrum.torus(4, 0.5)
    beta, H = 0.75, 0.5
    hb = K.heat_hT(spec, np.ones(4), H, beta)
    p = (1 - beta) * (1 + spec.gamma) / 2 + 0.5
    a = spec.alpha_k
    R = H - hb.t[:, None]
    ref = R ** (1 - p) / (1 - p) * hyp1f1(1 - p, 2 - p, a * R) * np.exp(-a * R)
    np.testing.assert_allclose(hb.I, ref, rtol=1e-8, atol=1e-12)
    assert np.all(hb.I_l1 <= hb.I_l1_bound)
    assert hb.h_l1 <= hb.bound_rhs


def test_heat_kernel_rejects_non_integrable_rate():
    with pytest.raises(ValueError, match="not integrable"):
        K.heat_hT(HeatSpectrum.torus(2, 4.0), np.ones(2), 1.0, 0.0)


def test_gronwall_constant_kernel():
    t = np.linspace(0, 1, 5)
    got = K.gronwall_bound(lambda s: np.ones_like(s), lambda s: 0.5 * np.ones_like(s), 1.0, t=t)
    np.testing.assert_allclose(got, 1 + np.exp(0.5) * 0.5 * (1 - t), rtol=1e-12)
    fwd = K.gronwall_bound(2.0, lambda s: 0.5 * np.ones_like(s), 1.0, variant="forward")
    assert fwd == pytest.approx(2 * (1 + 0.5 * np.exp(0.5)))


def test_gronwall_singular_kernel_norm():
    # g(s) = s^{-1/2} has ||g||_1 = 2 on [0, 1]
    fwd = K.gronwall_bound(1.0, lambda s: s**-0.5, 1.0, variant="forward", singularity=0.5)
    assert fwd == pytest.approx(1 + 2 * np.exp(2), rel=1e-12)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        K.SolverConfig(tol=0.0).resolved(1)
