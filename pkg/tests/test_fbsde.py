import numpy as np
import pytest

from regnoise import fbsde
from regnoise.drift import ConstantDrift, ZeroDrift
from regnoise.kolmogorov import KolmogorovProblem, SolverConfig, constant_drift_solution, picard_solve
from regnoise.spectral import Approximant, HeatSpectrum, WaveSpectrum, semigroup_blocks


@pytest.fixture(scope="module")
def heat_bundle():
    spec = HeatSpectrum.torus(1, 0.0)
    return spec, fbsde.simulate_forward(spec, np.array([0.3]), 1.0, 50, 20_000, seed=4)


def test_forward_paths_have_exact_mean():
    spec = WaveSpectrum.dirichlet(1, 0.0, 1.0)
    x = np.array([0.5, -0.1])
    b = fbsde.simulate_forward(spec, x, 1.0, 10, 100_000, seed=2)
    ref = semigroup_blocks(spec, 1.0)[0] @ x
    se = b.states[-1].std(axis=0) / np.sqrt(b.paths)
    assert np.all(np.abs(b.states[-1].mean(axis=0) - ref) <= 4 * se)
    np.testing.assert_allclose(b.dW.var(axis=1), b.h, rtol=0.03)


def test_forward_paths_reproducible():
    spec = HeatSpectrum.torus(2)
    a = fbsde.simulate_forward(spec, np.zeros(2), 1.0, 5, 10, seed=9)
    b = fbsde.simulate_forward(spec, np.zeros(2), 1.0, 5, 10, seed=9)
    np.testing.assert_array_equal(a.states, b.states)


def test_zero_drift_is_exact(heat_bundle):
    spec, b = heat_bundle
    f = fbsde.solve_backward(b, ZeroDrift(spec), Approximant(spec, "yosida", 1000))
    assert np.max(np.abs(f.Y)) == 0.0 and np.max(np.abs(f.Z)) == 0.0


def test_constant_drift_identification(heat_bundle):
    spec, b = heat_bundle
    ap = Approximant(spec, "yosida", 1000)
    dr = ConstantDrift(spec, [0.8])
    f = fbsde.solve_backward(b, dr, ap)
    gf, _ = picard_solve(KolmogorovProblem(spec, dr, ap, 1.0),
                         SolverConfig(time_nodes=9, space_nodes=21, hermite_order=32))
    assert fbsde.identification_check(f, gf, b)["Y_rmse"] <= 0.02
    # the backward pass is a right-endpoint sum of h e^{-t_i A_n} G c
    a = -np.log(ap.expm(1.0)[0, 0, 0])
    t = b.times[1:]
    assert f.y0[0] == pytest.approx(b.h * 0.8 * np.sum(np.exp(a * t)), rel=1e-10)
    # and tends to e^{-T A_n} u(0, x) at rate h
    u0 = constant_drift_solution(spec, ap, [0.8], 1.0, [0.0])[0, 0]
    assert f.y0[0] == pytest.approx(u0 * ap.expm(-1.0)[0, 0, 0], rel=b.h)


def test_martingale_term_has_zero_mean(heat_bundle):
    spec, b = heat_bundle
    f = fbsde.solve_backward(b, ConstantDrift(spec, [0.8]), Approximant(spec, "yosida", 1000))
    m, se = fbsde.martingale_mean(f, b)
    assert np.all(np.abs(m) <= 4 * se + 1e-15)


def test_hat_basis_partition_of_unity():
    X = np.random.default_rng(0).standard_normal((500, 2))
    P = fbsde.HatBasis(X, nodes=8)(X)
    np.testing.assert_allclose(P.sum(axis=1), 1.0)
    assert P.shape == (500, 64)


def test_poly_basis_size_and_degenerate_coordinate():
    X = np.random.default_rng(0).standard_normal((100, 2))
    assert fbsde.PolyBasis(X, 3)(X).shape == (100, 10)
    X[:, 1] = 1.0
    assert fbsde.PolyBasis(X, 3)(X).shape == (100, 4)


def test_rank_deficient_regression_warns():
    P = np.ones((10, 2))
    with pytest.warns(RuntimeWarning, match="rank-deficient"):
        coef = fbsde._regress(P, np.arange(10.0))
    np.testing.assert_allclose(P @ coef, 4.5, rtol=1e-6)


def test_invalid_basis():
    with pytest.raises(ValueError):
        fbsde.make_basis(np.zeros((3, 1)), "spline")
