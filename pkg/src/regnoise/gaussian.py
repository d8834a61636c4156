"""Covariances of the stochastic convolution, exact Gaussian sampling and
Hilbert-Schmidt diagnostics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import roots_legendre

from .spectral import DEGENERATE_TOL, HeatSpectrum, semigroup_blocks

CHOL_FLOOR = 1e-14


def _expm1_over(z, t):
    """(exp(z t) - 1) / z, stable for small |z t| and complex z."""
    zt = z * t
    small = np.abs(zt) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, t * (1.0 + zt / 2.0), np.expm1(zt) / safe)


def covariance_blocks(spectrum, t) -> np.ndarray:
    """Per-mode ``Q_t = int_0^t e^{sM} g g^T e^{sM^T} ds``; shape t.shape + (N, s, s)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("covariance needs t > 0")
    if isinstance(spectrum, HeatSpectrum):
        a = spectrum.alpha_k
        q = a**-spectrum.gamma * -np.expm1(-2.0 * np.multiply.outer(t, a)) / (2.0 * a)
        return q[..., None, None]
    return _wave_covariance(spectrum, t)


def _wave_covariance(spec, t):
    lam_p, lam_m = spec.eigenvalues()
    root = np.sqrt(spec.mu)
    c = spec.noise_gain()
    # e^{sM} g = u+ e^{l+ s} w+ + u- e^{l- s} w-,  w = (sqrt(mu), l)
    u_p = c / (lam_p - lam_m)
    lams = (lam_p, lam_m)
    us = (u_p, -u_p)
    tt = t[..., None]
    out = np.zeros(t.shape + (spec.n_modes, 2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            e = _expm1_over(lams[i] + lams[j], tt) * us[i] * us[j]
            out[..., 0, 0] += e * root * root
            out[..., 0, 1] += e * root * lams[j]
            out[..., 1, 0] += e * lams[i] * root
            out[..., 1, 1] += e * lams[i] * lams[j]
    out = out.real
    near = np.flatnonzero(np.abs(spec.discriminant()) / spec.damping**2 < DEGENERATE_TOL)
    if near.size:
        out[..., near, :, :] = _van_loan(spec.generators()[near], spec.noise_vectors()[near], t)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def _van_loan(mats, g, t):
    """Covariance via the exponential of the block matrix [[-M, gg^T], [0, M^T]]."""
    n = mats.shape[0]
    big = np.zeros((n, 4, 4))
    big[:, :2, :2] = -mats
    big[:, :2, 2:] = g[:, :, None] * g[:, None, :]
    big[:, 2:, 2:] = np.swapaxes(mats, 1, 2)
    t = np.asarray(t, dtype=float)
    e = scipy.linalg.expm(t[..., None, None, None] * big)
    f22 = e[..., 2:, 2:]
    f12 = e[..., :2, 2:]
    return np.swapaxes(f22, -1, -2) @ f12


def modal_covariance(spectrum, n: int, t: float) -> np.ndarray:
    return covariance_blocks(spectrum, t)[n]


def cholesky_blocks(q: np.ndarray) -> np.ndarray:
    """Lower Cholesky factors of stacked 1x1 or 2x2 SPD blocks.

    Blocks that are not numerically positive definite get ``1e-14 * trace``
    added to the diagonal, with a warning.
    """
    q = np.asarray(q, dtype=float)
    s = q.shape[-1]
    tr = np.trace(q, axis1=-2, axis2=-1)
    if s == 1:
        bad = q[..., 0, 0] <= 0
        if np.any(bad):
            warnings.warn("non-positive covariance block regularized", RuntimeWarning)
            q = q + (CHOL_FLOOR * np.abs(tr) + 1e-300)[..., None, None] * bad[..., None, None]
        return np.sqrt(q)
    if s != 2:
        return np.linalg.cholesky(q)
    a, b, d = q[..., 0, 0], q[..., 1, 0], q[..., 1, 1]
    schur = d - b * b / np.where(a > 0, a, 1.0)
    bad = (a <= 0) | (schur <= 0)
    if np.any(bad):
        warnings.warn(f"{int(bad.sum())} covariance block(s) regularized by 1e-14*trace", RuntimeWarning)
        eps = CHOL_FLOOR * tr * bad
        a = a + eps
        d = d + eps
        schur = d - b * b / a
    out = np.zeros(q.shape)
    l11 = np.sqrt(a)
    out[..., 0, 0] = l11
    out[..., 1, 0] = b / l11
    out[..., 1, 1] = np.sqrt(np.maximum(schur, 0.0))
    return out


def hs_semigroup_norm(spectrum, t, n: int | None = None):
    """Partial sum ``sum_{k<=n} |e^{tM_k} g_k|^2``; vectorised over ``t``."""
    n = spectrum.n_modes if n is None else n
    if n > spectrum.n_modes:
        raise ValueError("N exceeds the number of modes")
    spec = spectrum.truncate(n)
    t = np.asarray(t, dtype=float)
    g = spec.noise_vectors()
    if isinstance(spec, HeatSpectrum):
        vals = np.exp(-2.0 * np.multiply.outer(t, spec.alpha_k)) * g[:, 0] ** 2
        return vals.sum(axis=-1)
    e = semigroup_blocks(spec, t)
    v = np.einsum("...nij,nj->...ni", e, g)
    return np.sum(v * v, axis=(-1, -2))


def hs_mode_terms(spectrum, t):
    """Per-mode ``|e^{tM_k} g_k|^2`` with shape t.shape + (N,)."""
    t = np.asarray(t, dtype=float)
    g = spectrum.noise_vectors()
    if isinstance(spectrum, HeatSpectrum):
        return np.exp(-2.0 * np.multiply.outer(t, spectrum.alpha_k)) * g[:, 0] ** 2
    e = semigroup_blocks(spectrum, t)
    v = np.einsum("...nij,nj->...ni", e, g)
    return np.sum(v * v, axis=-1)


@dataclass
class E517Report:
    estimate: float
    converged: bool
    growth_exponent: float
    quadrature_change: float
    partial_sum: float
    tail: float


def _graded_integral(spectrum, a, T, panels, nodes=16):
    """Per-mode ``int_0^T t^{-2a} |e^{tM}g|^2 dt`` on geometric panels.

    Panels shrink toward 0 by halving; the first panel uses the substitution
    t = t1 * v^(1/(1-2a)) which absorbs the singular weight exactly.
    """
    x, w = roots_legendre(nodes)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    edges = T * 0.5 ** np.arange(panels, -1, -1)
    total = np.zeros(spectrum.n_modes)
    # first panel [0, edges[0]]
    p = 1.0 - 2.0 * a
    t1 = edges[0]
    ts = t1 * x ** (1.0 / p)
    total += (t1**p / p) * np.einsum("k,kn->n", w, hs_mode_terms(spectrum, ts))
    for lo, hi in zip(edges[:-1], edges[1:]):
        ts = lo + (hi - lo) * x
        total += (hi - lo) * np.einsum("k,kn->n", w * ts ** (-2 * a), hs_mode_terms(spectrum, ts))
    return total


def check_e517(spectrum, alpha_param: float, T: float = 1.0, rel_tol: float = 0.01) -> E517Report:
    """Estimate ``int_0^T t^{-2a} ||e^{tA}G||_HS^2 dt`` and decide convergence.

    Two things must hold for ``converged``: the graded time quadrature agrees
    with its refinement to ``rel_tol``, and the per-mode contributions decay
    faster than 1/n (growth exponent of the partial sums < 0).  The returned
    estimate adds a power-law tail fitted on the upper half of the modes.
    """
    if not 0 < alpha_param < 0.5:
        raise ValueError("alpha_param must lie in (0, 1/2)")
    coarse = _graded_integral(spectrum, alpha_param, T, panels=20, nodes=12)
    fine = _graded_integral(spectrum, alpha_param, T, panels=40, nodes=24)
    qchange = abs(fine.sum() - coarse.sum()) / abs(fine.sum())
    n = np.arange(1, spectrum.n_modes + 1)
    half = n > spectrum.n_modes // 2
    # fit c_n ~ C n^e on the upper half of the modes
    slope, icpt = np.polyfit(np.log(n[half]), np.log(fine[half]), 1)
    growth = slope + 1.0
    partial = float(fine.sum())
    N = spectrum.n_modes
    if growth < 0:
        tail = float(np.exp(icpt) * N ** (slope + 1.0) / -(slope + 1.0))
    else:
        tail = float("inf")
    margin = 0.02
    converged = bool(qchange < rel_tol and growth < -margin)
    return E517Report(partial + tail, converged, float(growth), float(qchange), partial, tail)


class NoiseStream:
    """Counter-based standard normals keyed by (seed, experiment, step).

    Each call builds a Philox generator from a SeedSequence whose spawn key
    is ``(experiment, step)``; the mode index is the position inside the
    returned block, so identical indices always give identical numbers.
    """

    def __init__(self, seed: int, experiment: int = 0):
        self.seed = int(seed)
        self.experiment = int(experiment)

    def generator(self, step: int, substream: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.experiment, int(step), int(substream)))
        return np.random.Generator(np.random.Philox(ss))

    def normals(self, step: int, shape, substream: int = 0) -> np.ndarray:
        return self.generator(step, substream).standard_normal(shape)


def sample_convolution_increment(spectrum, h: float, stream: NoiseStream, step: int, paths: int | None = None):
    """Exact increment ``int_0^h e^{(h-s)A} G dW_s`` as ``L xi`` per mode.

    Returns shape (N, s) or (paths, N, s).
    """
    if h <= 0:
        raise ValueError("h must be positive")
    L = cholesky_blocks(covariance_blocks(spectrum, h))
    shape = (spectrum.n_modes, spectrum.state_dim) if paths is None else (paths, spectrum.n_modes, spectrum.state_dim)
    xi = stream.normals(step, shape)
    return np.einsum("nij,...nj->...ni", L, xi)


def joint_increment_factor(spectrum, h: float) -> np.ndarray:
    """Cholesky factor of the joint law of (convolution increment, dW) per mode.

    The cross covariance is ``int_0^h e^{sM} g ds = M^{-1}(e^{hM} - I) g``.
    Shape (N, s+1, s+1); the last coordinate is the Brownian increment.
    """
    q = covariance_blocks(spectrum, h)
    g = spectrum.noise_vectors()
    if isinstance(spectrum, HeatSpectrum):
        a = spectrum.alpha_k
        cross = g * (-np.expm1(-a * h) / a)[:, None]
    else:
        e = semigroup_blocks(spectrum, h)
        rhs = np.einsum("nij,nj->ni", e - np.eye(2), g)
        cross = np.linalg.solve(spectrum.generators(), rhs[..., None])[..., 0]
    s = spectrum.state_dim
    joint = np.zeros((spectrum.n_modes, s + 1, s + 1))
    joint[:, :s, :s] = q
    joint[:, :s, s] = cross
    joint[:, s, :s] = cross
    joint[:, s, s] = h
    try:
        return np.linalg.cholesky(joint)
    except np.linalg.LinAlgError:
        warnings.warn("joint increment covariance regularized", RuntimeWarning)
        tr = np.trace(joint, axis1=1, axis2=2)
        return np.linalg.cholesky(joint + CHOL_FLOOR * tr[:, None, None] * np.eye(s + 1))
