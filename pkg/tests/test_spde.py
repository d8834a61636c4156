import numpy as np
import pytest
import scipy.linalg

from regnoise import spde
from regnoise.drift import ConstantDrift, WaveHolder, ZeroDrift
from regnoise.kolmogorov import KolmogorovProblem, SolverConfig, _dense, noise_matrix, picard_solve
from regnoise.spectral import Approximant, HeatSpectrum, WaveSpectrum, semigroup_blocks


def test_step_matches_dense_exponential():
    w = WaveSpectrum.dirichlet(3, 0.25, 1.0)
    dr = ConstantDrift(w, [1.0, -1.0, 0.5])
    x = np.arange(6.0)
    inc = np.full(6, 0.01)
    A = scipy.linalg.block_diag(*w.generators())
    G = noise_matrix(w)
    ref = scipy.linalg.expm(0.1 * A) @ (x + 0.1 * G @ np.array([1.0, -1.0, 0.5])) + inc
    np.testing.assert_allclose(spde.step(w, dr, x, 0.0, 0.1, inc), ref, rtol=1e-12)


def test_step_prefactors_differ_at_second_order():
    w = WaveSpectrum.dirichlet(2)
    dr = ConstantDrift(w, [1.0, 1.0])
    x = np.zeros(4)
    gaps = [np.linalg.norm(spde.step(w, dr, x, 0, h, 0) - spde.step(w, dr, x, 0, h, 0, "mid")) for h in (1e-2, 5e-3)]
    assert gaps[0] / gaps[1] == pytest.approx(4.0, rel=0.05)


def test_simulation_is_deterministic():
    w = WaveSpectrum.dirichlet(4)
    a = spde.simulate(w, WaveHolder(w), np.zeros(8), 1.0, 20, 50, seed=3)
    b = spde.simulate(w, WaveHolder(w), np.zeros(8), 1.0, 20, 50, seed=3)
    np.testing.assert_array_equal(a.terminal, b.terminal)
    assert a.checksum == b.checksum
    assert spde.simulate(w, WaveHolder(w), np.zeros(8), 1.0, 20, 50, seed=4).checksum != a.checksum


def test_drift_bound_is_enforced():
    w = WaveSpectrum.dirichlet(2)

    class Liar(ConstantDrift):
        def sup_norm(self):
            return 1e-6

    with pytest.raises(AssertionError, match="exceeds declared bound"):
        spde.simulate(w, Liar(w, [1.0, 1.0]), np.zeros(4), 1.0, 5, 3)


def test_zero_drift_coupling_is_semigroup_contraction():
    w = WaveSpectrum.dirichlet(4, 0.0, 1.0)
    e = np.random.default_rng(0).standard_normal(8)
    exp = spde.CouplingExperiment(w, ZeroDrift(w), np.zeros(8), e, separations=(1e-1, 1e-3), steps=20, paths=10)
    res = spde.coupled_lipschitz(exp)
    e = e / np.linalg.norm(e)
    ref = np.sum((_dense(semigroup_blocks(w, 1.0)) @ e) ** 2)
    for row in res["rows"]:
        assert row["terminal"] == pytest.approx(ref, rel=1e-9)
        assert row["ratio"] == pytest.approx(1.0)


def test_representation_exact_for_zero_drift():
    spec = HeatSpectrum.torus(1, 0.0)
    pb = KolmogorovProblem(spec, ZeroDrift(spec), Approximant(spec, "yosida", 1000), 1.0)
    gf, _ = picard_solve(pb, SolverConfig(time_nodes=5, space_nodes=9, hermite_order=8))
    r = spde.representation_check(pb, gf, np.array([0.3]), paths=200, steps=20)
    assert r["rmse"] <= 1e-12


def test_representation_needs_solution():
    spec = HeatSpectrum.torus(1, 0.0)
    pb = KolmogorovProblem(spec, ZeroDrift(spec), Approximant(spec, "exact"), 1.0)
    with pytest.raises(ValueError):
        spde.representation_check(pb, None, np.zeros(1))


def test_half_laplacian_on_sine_series():
    m = 63
    xi = np.pi * np.arange(1, m + 1) / (m + 1)
    f = np.sin(2 * xi) + 0.5 * np.sin(5 * xi)
    np.testing.assert_allclose(spde.half_laplacian(f), 2 * np.sin(2 * xi) + 2.5 * np.sin(5 * xi), atol=1e-12)


@pytest.mark.parametrize("case,freq", [(1, 1), (2, 2)])
def test_counterexample_candidates(case, freq):
    b = spde.CounterexampleB(case)
    sol = spde.counterexample_residual(b, spde.sine_candidate(8, freq))
    assert sol["sup_residual"] <= 1e-8
    assert sol["boundary"] <= 1e-12
    assert spde.counterexample_residual(b, spde.sine_candidate(7, freq))["sup_residual"] >= 1.0
    assert spde.counterexample_residual(b, spde.zero_candidate())["sup_residual"] == 0.0


def test_printed_convention_rejects_zero_solution():
    b = spde.CounterexampleB(1, convention="printed")
    assert spde.counterexample_residual(b, spde.zero_candidate())["sup_residual"] > 1.0


def test_counterexample_nonlinearity_is_continuous_at_switch():
    for case in (1, 2):
        b = spde.CounterexampleB(case)
        xi = np.linspace(0.1, 3.0, 7)
        np.testing.assert_allclose(b(xi, 2 - 1e-12), b(xi, 2 + 1e-12), atol=1e-8)


def test_counterexample_validation():
    with pytest.raises(ValueError):
        spde.CounterexampleB(3)
    with pytest.raises(ValueError):
        spde.CounterexampleB(1, convention="other")


def test_hypothesis_report_examples():
    heat = spde.hypothesis_report({"equation": "heat", "d": 3, "gamma": 1.2, "beta": 0.6})
    assert all(r.passed for r in heat)
    wave = spde.hypothesis_report({"equation": "wave", "alpha": 0.0, "beta": 0.75})
    assert all(r.passed for r in wave)
    bad = spde.hypothesis_report({"equation": "heat", "d": 3, "gamma": 0.0, "beta": 0.6})
    assert not bad[0].passed and bad[0].margin == pytest.approx(-0.5)
    crit = spde.hypothesis_report({"equation": "wave", "alpha": 0.0, "rho": 2 * np.pi, "beta": 0.75})
    assert not crit[0].passed
    with pytest.raises(ValueError):
        spde.hypothesis_report({"equation": "beam", "beta": 0.5})
