"""Exponential-Euler simulation, same-noise coupling, the representation
identity, deterministic counterexamples and the hypothesis report."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dst, idst

from .gaussian import NoiseStream, joint_increment_factor
from .kolmogorov import GridFunction, KolmogorovProblem, _dense, noise_matrix
from .spectral import HeatSpectrum, WaveSpectrum, semigroup_blocks


def step(spectrum, drift, state, t, h, increment, prefactor: str = "left"):
    """One exponential-Euler step ``e^{hA}(X + h G C(t, X)) + increment``.

    ``prefactor='mid'`` applies ``e^{hA/2}`` to the drift term instead of
    ``e^{hA}``; the two differ at O(h^2).
    """
    if h <= 0:
        raise ValueError("h must be positive")
    state = np.asarray(state, dtype=float)
    E = _dense(semigroup_blocks(spectrum, h))
    push = h * drift.modal(np.full(state.shape[:-1], t), state)
    if prefactor == "left":
        return (state + push) @ E.T + increment
    if prefactor == "mid":
        Eh = _dense(semigroup_blocks(spectrum, 0.5 * h))
        return state @ E.T + push @ Eh.T + increment
    raise ValueError("prefactor must be 'left' or 'mid'")


def modal_h_norm(X) -> np.ndarray:
    return np.linalg.norm(X, axis=-1)


class _Driver:
    """Shared per-step noise: (convolution increment, dW) from a counter-based stream."""

    def __init__(self, spectrum, h, seed, experiment):
        self.spectrum = spectrum
        self.J = joint_increment_factor(spectrum, h)
        self.stream = NoiseStream(seed, experiment)
        self.s = spectrum.state_dim

    def draw(self, k, paths):
        N, s = self.spectrum.n_modes, self.s
        xi = self.stream.normals(k, (paths, N, s + 1))
        joint = np.einsum("nab,pnb->pna", self.J, xi)
        return joint[..., :s].reshape(paths, N * s), joint[..., s], zlib.crc32(xi.tobytes())


@dataclass
class Trajectory:
    times: np.ndarray
    terminal: np.ndarray
    checksum: int
    sup_drift: float
    states: np.ndarray | None = None


def simulate(spectrum, drift, x0, horizon: float, steps: int, paths: int, seed: int = 0,
             experiment: int = 1, keep_path: bool = False, prefactor: str = "left") -> Trajectory:
    """Simulate ``paths`` copies from ``x0``; drift bound asserted at every step."""
    h = horizon / steps
    drv = _Driver(spectrum, h, seed, experiment)
    X = np.broadcast_to(np.asarray(x0, dtype=float), (paths, spectrum.n_modes * spectrum.state_dim)).copy()
    bound = drift.sup_norm()
    crc = 0
    sup_seen = 0.0
    states = [X.copy()] if keep_path else None
    for k in range(steps):
        t = k * h
        inc, _, c = drv.draw(k, paths)
        crc = zlib.crc32(c.to_bytes(4, "little"), crc)
        push = drift.modal(np.full(paths, t), X)
        size = float(np.max(modal_h_norm(push))) if paths else 0.0
        assert size <= bound * (1 + 1e-9) + 1e-12, f"drift {size:.3e} exceeds declared bound {bound:.3e}"
        sup_seen = max(sup_seen, size)
        X = step(spectrum, drift, X, t, h, inc, prefactor)
        if keep_path:
            states.append(X.copy())
    return Trajectory(np.linspace(0.0, horizon, steps + 1), X, crc, sup_seen,
                      np.array(states) if keep_path else None)


@dataclass
class CouplingExperiment:
    spectrum: object
    drift: object
    x1: np.ndarray
    direction: np.ndarray
    separations: tuple = (1e-1, 1e-2, 1e-3, 1e-4)
    horizon: float = 1.0
    steps: int = 200
    paths: int = 1000
    seed: int = 0


def coupled_lipschitz(exp: CouplingExperiment) -> dict:
    """``sup_t E|X^1_t - X^2_t|^2 / |x1 - x2|^2`` per separation, same noise.

    Each trajectory draws its own increments from the shared counter-based
    stream; equality of the increment checksums is asserted.
    """
    spec = exp.spectrum
    h = exp.horizon / exp.steps
    e = np.asarray(exp.direction, dtype=float)
    e = e / np.linalg.norm(e)
    D = spec.n_modes * spec.state_dim
    rows = []
    for sep in exp.separations:
        drv1 = _Driver(spec, h, exp.seed, 2)
        drv2 = _Driver(spec, h, exp.seed, 2)
        X1 = np.broadcast_to(np.asarray(exp.x1, dtype=float), (exp.paths, D)).copy()
        X2 = X1 + sep * e
        crc1 = crc2 = 0
        best = 1.0
        for k in range(exp.steps):
            t = k * h
            inc1, _, c1 = drv1.draw(k, exp.paths)
            inc2, _, c2 = drv2.draw(k, exp.paths)
            crc1 = zlib.crc32(c1.to_bytes(4, "little"), crc1)
            crc2 = zlib.crc32(c2.to_bytes(4, "little"), crc2)
            X1 = step(spec, exp.drift, X1, t, h, inc1)
            X2 = step(spec, exp.drift, X2, t, h, inc2)
            best = max(best, float(np.mean(np.sum((X1 - X2) ** 2, axis=-1))) / sep**2)
        assert crc1 == crc2, "coupled trajectories consumed different increments"
        terminal = float(np.mean(np.sum((X1 - X2) ** 2, axis=-1))) / sep**2
        rows.append({"separation": sep, "ratio": best, "terminal": terminal, "checksum": crc1})
    ratios = np.array([r["ratio"] for r in rows])
    ends = np.array([r["terminal"] for r in rows])
    return {
        "terminal_spread": float(ends.max() / ends.min()),
        "rows": rows,
        "max_ratio": float(ratios.max()),
        "min_ratio": float(ratios.min()),
        "spread": float(ratios.max() / ratios.min()),
    }


def representation_check(problem: KolmogorovProblem, u: GridFunction | None, x, paths: int = 20_000,
                         steps: int = 200, seed: int = 0) -> dict:
    """Pathwise check of

        X_tau = e^{tau A} x + delta_n(tau) + u_n(0, x) + int grad^G u_n dW + int e^{(tau-s)A} G dW

    with ``tau`` the problem horizon.  Returns the RMSE of the two sides
    relative to the RMS of ``X_tau``, and relative to the RMS of the drift
    contribution.
    """
    if u is None:
        raise ValueError("no Kolmogorov solution supplied; run picard_solve on the same problem first")
    spec = problem.spectrum
    tau = float(problem.horizon)
    h = tau / steps
    D = problem.dim
    G = noise_matrix(spec)
    drv = _Driver(spec, h, seed, 4)
    x = np.asarray(x, dtype=float)
    X = np.broadcast_to(x, (paths, D)).copy()
    times = np.arange(steps + 1) * h
    E_exact = _dense(semigroup_blocks(spec, tau - times))
    E_n = _dense(problem.approximant.expm(tau - times))
    delta = np.zeros((paths, D))
    ito = np.zeros((paths, D))
    conv = np.zeros((paths, D))
    drift_part = np.zeros((paths, D))
    for k in range(steps):
        t = times[k]
        inc, dW, _ = drv.draw(k, paths)
        c = problem.drift(np.full(paths, t), X)
        Gc = c @ G.T
        delta += h * Gc @ (E_exact[k] - E_n[k]).T
        drift_part += h * Gc @ E_exact[k].T
        ito += np.einsum("pak,pk->pa", u.grad_G(t, X), dW)
        conv += inc @ E_exact[k + 1].T
        X = step(spec, problem.drift, X, t, h, inc)
    free = E_exact[0] @ x
    rhs = free + delta + u.u(0.0, x).reshape(D) + ito + conv
    err = X - rhs
    rms = lambda a: math.sqrt(float(np.mean(np.sum(a * a, axis=-1))))
    return {
        "rmse_rel_state": rms(err) / rms(X),
        "rmse_rel_drift": rms(err) / rms(drift_part) if rms(drift_part) > 0 else rms(err),
        "rmse": rms(err),
        "delta_rms": rms(delta),
    }


# ---------------------------------------------------------------------------
# deterministic counterexamples


def _root4(z):
    """Odd fourth root ``sign(z) |z|^{1/4}``."""
    return np.sign(z) * np.abs(z) ** 0.25


def _spow(z, p):
    return np.sign(z) * np.abs(z) ** p


@dataclass
class CounterexampleB:
    """Holder nonlinearity of the deterministic counterexamples.

    ``convention='corrected'`` evaluates the small-amplitude branch at
    ``y`` clipped to ``[-2T^8, 2T^8]``: the saturation terms then follow
    ``sign(y)``, carry ``T^{28}``, and b is continuous at the switch.
    ``convention='printed'`` keeps the literal formulas: every case-1 term
    carries ``|y| < 2T^8``, the saturation uses ``T^{7/2}`` and, in case 2,
    ``sgn(sin 2 xi)`` and ``4T^8``.
    """

    case: int
    T: float = 1.0
    convention: str = "corrected"

    def __post_init__(self):
        if self.case not in (1, 2):
            raise ValueError("case must be 1 or 2")
        if self.convention not in ("corrected", "printed"):
            raise ValueError("convention must be 'corrected' or 'printed'")

    @property
    def damping_alpha(self) -> float:
        return 0.0 if self.case == 1 else 0.5

    def _small(self, xi, y):
        if self.case == 1:
            s = np.sin(xi)
            return 56 * _root4(s * y**3) + 8 * _root4(np.sqrt(np.abs(s)) * _spow(y, 3.5)) + y
        s = np.sin(2 * xi)
        ss = np.sign(s)
        return 56 * ss * _root4(s * y**3) + 16 * ss * _root4(np.sqrt(np.abs(s)) * _spow(np.abs(y), 3.5)) + 4 * y

    def __call__(self, xi, y):
        xi, y = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(y, dtype=float))
        T = self.T
        if self.convention == "corrected":
            return self._small(xi, np.clip(y, -2 * T**8, 2 * T**8))
        small = np.abs(y) < 2 * T**8
        out = small * self._small(xi, y)
        if self.case == 1:
            s = np.abs(np.sin(xi))
            sat = 56 * (8 * T**24 * s) ** 0.25 + 8 * (8 * math.sqrt(2) * T**3.5 * np.sqrt(s)) ** 0.25 + 2 * T**8
            return out + small * sat
        s = np.sin(2 * xi)
        ss = np.sign(s)
        sat = (56 * ss * (8 * T**24 * np.abs(s)) ** 0.25
               + 16 * ss * (8 * math.sqrt(2) * T**3.5 * np.sqrt(np.abs(s))) ** 0.25 + 4 * T**8)
        return out + ~small * sat


def half_laplacian(values, axis=-1):
    """``(-d^2/dxi^2)^{1/2}`` on [0, pi] with Dirichlet conditions via DST-I.

    ``values`` are samples at the interior points ``j pi / (m+1)``; exact on
    finite sine series.
    """
    m = values.shape[axis]
    coef = dst(values, type=1, axis=axis)
    shape = [1] * values.ndim
    shape[axis] = m
    return idst(coef * np.arange(1, m + 1).reshape(shape), type=1, axis=axis)


@dataclass
class Candidate:
    """Closed-form candidate with analytic derivatives ``y, y_t, y_tt, y_xx``."""

    y: object
    y_t: object
    y_tt: object
    y_xx: object
    name: str = "candidate"


def sine_candidate(power: int, freq: int) -> Candidate:
    """``tau^power sin(freq xi)`` (power 0 gives the zero function when freq = 0)."""
    p, f = power, freq
    return Candidate(
        lambda t, x: t**p * np.sin(f * x),
        lambda t, x: p * t ** max(p - 1, 0) * np.sin(f * x) if p else 0 * x,
        lambda t, x: p * (p - 1) * t ** max(p - 2, 0) * np.sin(f * x) if p > 1 else 0 * x,
        lambda t, x: -f * f * t**p * np.sin(f * x),
        f"tau^{p} sin({f} xi)",
    )


def zero_candidate() -> Candidate:
    z = lambda t, x: 0.0 * t * x
    return Candidate(z, z, z, z, "0")


def counterexample_residual(b: CounterexampleB, cand: Candidate, tau=None, n_xi: int = 255) -> dict:
    """Sup of ``y_tt - y_xx + damping(y_t) - b(xi, y)`` over a tensor grid.

    Damping is ``y_t`` for case 1 and the spectral half-Laplacian of ``y_t``
    for case 2.  Boundary values of the candidate are reported separately.
    """
    if tau is None:
        tau = np.linspace(0.0, b.T, 101)
    tau = np.asarray(tau, dtype=float)[:, None]
    xi = (np.pi * np.arange(1, n_xi + 1) / (n_xi + 1))[None, :]
    y = cand.y(tau, xi) + 0 * tau * xi
    yt = cand.y_t(tau, xi) + 0 * tau * xi
    if b.case == 1:
        damp = yt
    else:
        damp = half_laplacian(yt, axis=-1)
    res = cand.y_tt(tau, xi) - cand.y_xx(tau, xi) + damp - b(xi, y)
    edges = np.array([0.0, np.pi])[None, :]
    boundary = float(np.max(np.abs(cand.y(tau, edges) + 0 * tau)))
    return {"sup_residual": float(np.max(np.abs(res))), "boundary": boundary}


# ---------------------------------------------------------------------------
# hypothesis report


@dataclass
class HypothesisResult:
    name: str
    passed: bool
    margin: float
    detail: str = ""


def hypothesis_report(config: dict) -> list:
    """Evaluate the parameter conditions with margins (positive margin = satisfied).

    Keys: ``equation`` ('wave' | 'heat'); wave: ``alpha``, ``rho``,
    ``n_modes``, ``beta``; heat: ``d``, ``gamma``, ``beta``.
    """
    out = []
    eq = config.get("equation", "wave")
    beta = float(config["beta"])
    if eq == "wave":
        a = float(config.get("alpha", 0.0))
        rho = float(config.get("rho", 1.0))
        n = int(config.get("n_modes", 64))
        mu = (np.pi * np.arange(1, n + 1)) ** 2
        gap = np.abs(rho**2 - 4 * mu ** (1 - 2 * a)) / np.maximum(rho**2, 4 * mu ** (1 - 2 * a))
        out.append(HypothesisResult("rho^2 != 4 mu_n^(1-2 alpha)", bool(gap.min() > 1e-8), float(gap.min()),
                                    f"closest mode n={int(gap.argmin()) + 1}"))
        lo = 2.0 / 3.0 if a <= 0.75 else 2.0 - 1.0 / a
        margin = min(beta - lo, 1.0 - beta)
        out.append(HypothesisResult(f"beta in ({lo:.4g}, 1)", bool(margin > 0), float(margin),
                                    f"alpha={a}"))
    elif eq == "heat":
        d = int(config["d"])
        gamma = float(config.get("gamma", 0.0))
        m1 = 1.0 + gamma - d / 2.0
        out.append(HypothesisResult("1 + gamma > d/2", bool(m1 > 0), float(m1)))
        cap = beta / (1.0 - beta) if beta < 1 else np.inf
        m2 = min(gamma, cap - gamma)
        out.append(HypothesisResult("0 <= gamma < beta/(1-beta)", bool(gamma >= 0 and cap - gamma > 0), float(m2),
                                    f"bound {cap:.4g}"))
    else:
        raise ValueError("equation must be 'wave' or 'heat'")
    return out
