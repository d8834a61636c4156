"""Picard solver for the backward mild Kolmogorov equation on small state spaces.

The unknown is the pair ``(u, grad^G u)`` on a graded time mesh and a tensor
grid over a box ``[-L, L]^D`` in flattened modal coordinates.  One Picard
step is

    u'(t, x)      = int_t^T R_{s-t}[F(s, .)](x) ds
    grad^G u'(t,x) = int_t^T E[<Gamma_{s-t} G e_k, zeta> F(s, X)] ds

with ``F(s, y) = e^{(T-s)A_n} G C(s, y) + grad^G u(s, y) C(s, y)`` and the
Gaussian expectations done by tensor Gauss-Hermite quadrature.  The time
integral uses ``s - t = R v^2`` so the ``(s-t)^{-1/2}`` kernel becomes smooth.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.interpolate import RegularGridInterpolator
from scipy.special import roots_legendre

from .drift import Drift
from .gaussian import cholesky_blocks, covariance_blocks
from .spectral import Approximant, HeatSpectrum, semigroup_blocks


def _dense(blocks):
    """Stacked block-diagonal matrices from blocks of shape (..., N, s, s)."""
    blocks = np.asarray(blocks)
    n, s = blocks.shape[-3], blocks.shape[-1]
    out = np.zeros(blocks.shape[:-3] + (n * s, n * s))
    for i in range(n):
        out[..., i * s:(i + 1) * s, i * s:(i + 1) * s] = blocks[..., i, :, :]
    return out


def noise_matrix(spectrum):
    """Dense ``G`` of shape (N*s, N) in flattened modal coordinates."""
    g = spectrum.noise_vectors()
    n, s = g.shape
    G = np.zeros((n * s, n))
    for i in range(n):
        G[i * s:(i + 1) * s, i] = g[i]
    return G


def hermite_rule(dim: int, order: int):
    """Tensor Gauss-Hermite rule for the standard normal in ``dim`` dimensions."""
    x, w = hermegauss(order)
    w = w / w.sum()
    nodes = np.array(list(itertools.product(x, repeat=dim)))
    weights = np.prod(np.array(list(itertools.product(w, repeat=dim))), axis=1)
    return nodes, weights


def stationary_std(spectrum) -> np.ndarray:
    """Per-coordinate standard deviation of the invariant OU law."""
    if isinstance(spectrum, HeatSpectrum):
        a = spectrum.alpha_k
        return np.sqrt(a ** -spectrum.gamma / (2.0 * a))
    lam_p, lam_m = spectrum.eigenvalues()
    slow = float(np.min(np.abs(np.real(np.concatenate([lam_p, lam_m])))))
    q = covariance_blocks(spectrum, 60.0 / slow)
    return np.sqrt(np.diagonal(q, axis1=-2, axis2=-1)).ravel()


def _ou_moments(spectrum, r):
    """Dense mean maps e^{rA}, Cholesky factors of Q_r and L_r^{-1} e^{rA} G."""
    E = _dense(semigroup_blocks(spectrum, r))
    L = _dense(cholesky_blocks(covariance_blocks(spectrum, r)))
    C = np.linalg.solve(L, E @ noise_matrix(spectrum))
    return E, L, C


def apply_R(spectrum, s: float, F, x, order: int = 8, tol: float = 1e-6, max_order: int = 40):
    """``R_s[F](x) = E F(e^{sA}x + L_s zeta)`` by tensor Gauss-Hermite quadrature.

    The rule of order ``p`` is compared with order ``p + 4``; the order is
    raised until they agree to ``tol`` (absolute, max norm).

    Parameters
    ----------
    F : callable
        Vectorised map from states (..., D) to values (..., m) or (...,).
    x : array_like
        Starting state, shape (D,).

    Raises
    ------
    RuntimeError
        If no order up to ``max_order`` meets the tolerance.
    """
    if s <= 0:
        raise ValueError("apply_R needs s > 0")
    x = np.asarray(x, dtype=float)
    E, L, _ = _ou_moments(spectrum, np.array([s]))
    mean = E[0] @ x
    D = x.size

    def rule(p):
        z, w = hermite_rule(D, p)
        vals = np.asarray(F(mean + z @ L[0].T))
        return np.tensordot(w, vals, axes=(0, 0))

    p = order
    prev = rule(p)
    while p + 4 <= max_order:
        nxt = rule(p + 4)
        if np.max(np.abs(nxt - prev)) <= tol:
            return nxt
        p += 4
        prev = nxt
    raise RuntimeError(f"Gauss-Hermite orders {p - 4} and {p} still differ by more than {tol:g}")


@dataclass
class SolverConfig:
    """Discretisation and iteration controls.

    ``None`` fields take dimension-dependent defaults (see ``resolved``).
    """

    gamma: float = 8.0
    time_nodes: int | None = None
    space_nodes: int | None = None
    hermite_order: int | None = None
    radial_order: int | None = None
    grading: float = 2.0
    max_iter: int = 40
    tol: float = 1e-10
    box_factor: float = 5.0

    def resolved(self, dim: int) -> "SolverConfig":
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        defaults = {1: (33, 81, 160), 2: (13, 17, 8)}.get(dim, (9, 9, 6))
        return SolverConfig(
            self.gamma,
            self.time_nodes or defaults[0],
            self.space_nodes or defaults[1],
            self.hermite_order or defaults[2],
            self.radial_order or (16 if dim == 1 else 10),
            self.grading,
            self.max_iter,
            self.tol,
            self.box_factor,
        )


@dataclass
class KolmogorovProblem:
    """Data of the backward equation.

    With a projection approximant ``A_n = A P_n`` the dropped modes keep the
    identity block of ``e^{tA_n}``.  ``project_source=True`` instead applies
    ``P_n`` to the source term, which is the convention under which the
    dropped components of u vanish identically.
    """

    spectrum: object
    drift: Drift
    approximant: Approximant
    horizon: float
    project_source: bool = False

    @property
    def dim(self) -> int:
        return self.spectrum.n_modes * self.spectrum.state_dim


@dataclass(frozen=True)
class GridFunction:
    """Value and G-gradient fields on (graded times) x (tensor box grid)."""

    times: np.ndarray
    axes: tuple
    value: np.ndarray  # (n_t, *n_x, D)
    grad: np.ndarray  # (n_t, *n_x, D, N)
    meta: dict = field(default_factory=dict)

    @property
    def lower(self):
        return np.array([a[0] for a in self.axes])

    @property
    def upper(self):
        return np.array([a[-1] for a in self.axes])

    @cached_property
    def _value_interp(self):
        return RegularGridInterpolator((self.times,) + self.axes, self.value)

    @cached_property
    def _grad_interp(self):
        shape = self.grad.shape
        flat = self.grad.reshape(shape[:-2] + (-1,))
        return RegularGridInterpolator((self.times,) + self.axes, flat)

    def _points(self, t, x):
        x = np.clip(np.asarray(x, dtype=float), self.lower, self.upper)
        t = np.clip(np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1]), self.times[0], self.times[-1])
        return np.concatenate([t[..., None], x], axis=-1)

    def u(self, t, x):
        """Multilinear interpolation of u, clamped to the box; x has shape (..., D)."""
        return self._value_interp(self._points(t, x))

    def grad_G(self, t, x):
        pts = self._points(t, x)
        out = self._grad_interp(pts)
        return out.reshape(pts.shape[:-1] + self.grad.shape[-2:])

    def nodes(self):
        """Spatial grid points, shape (*n_x, D)."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)


@dataclass
class PicardRecord:
    """Per-iteration sup-in-space difference profiles over the time nodes.

    ``profiles[m]`` holds ``sup_x |u^{m+1} - u^m| + sup_x ||grad^{m+1} - grad^m||``
    at each time node, so weighted norms for any ``gamma`` can be formed
    afterwards.
    """

    times: np.ndarray
    profiles: list
    gamma: float
    converged: bool = False
    note: str = ""

    def norms(self, gamma: float | None = None) -> np.ndarray:
        g = self.gamma if gamma is None else gamma
        w = np.exp(g * self.times)
        return np.array([float(np.max(w * p)) for p in self.profiles])


def graded_times(horizon: float, n: int) -> np.ndarray:
    """Nodes ``T (1 - cos(pi j / (n-1))) / 2`` clustered at both endpoints."""
    j = np.arange(n)
    t = 0.5 * horizon * (1.0 - np.cos(np.pi * j / (n - 1)))
    t[0], t[-1] = 0.0, horizon
    return t


class _CornerWeights:
    """Precomputed multilinear interpolation onto fixed query points.

    Query points are clamped to the grid; ``apply(values)`` evaluates the
    interpolant of a field stored as (n_t, *n_x, ...) at all points.
    """

    def __init__(self, times, axes, s, points):
        lead = points.shape[:-1]
        n_x = [len(a) for a in axes]
        s_full = np.broadcast_to(s.reshape(s.shape + (1,) * (len(lead) - 1)), lead)
        it = np.clip(np.searchsorted(times, s_full, side="right") - 1, 0, len(times) - 2)
        ft = np.clip((s_full - times[it]) / (times[it + 1] - times[it]), 0.0, 1.0)
        idx, frac = [it], [ft]
        for a, ax in enumerate(axes):
            pos = np.clip((points[..., a] - ax[0]) / (ax[1] - ax[0]), 0.0, len(ax) - 1.0)
            i = np.minimum(pos.astype(np.int64), len(ax) - 2)
            idx.append(i)
            frac.append(pos - i)
        dims = [len(times)] + n_x
        self.strides = [int(np.prod(dims[k + 1:])) for k in range(len(dims))]
        self.size = int(np.prod(dims))
        self.base = sum(i * st for i, st in zip(idx, self.strides)).ravel()
        self.frac = [f.ravel() for f in frac]
        self.lead = lead

    def apply(self, values):
        tail = values.shape[len(self.strides):]
        flat = values.reshape(self.size, -1)
        out = np.zeros((self.base.size, flat.shape[1]))
        for corner in itertools.product((0, 1), repeat=len(self.strides)):
            w = np.ones(self.base.size)
            off = 0
            for c, f, st in zip(corner, self.frac, self.strides):
                w *= f if c else 1.0 - f
                off += c * st
            out += w[:, None] * flat[self.base + off]
        return out.reshape(self.lead + tail)


class _Stencil:
    """Quadrature data for one time node, reused across Picard iterations."""

    def __init__(self, problem, cfg, t, grid_pts, zeta, wq, v, wv):
        spec = problem.spectrum
        T = problem.horizon
        R = T - t
        q = cfg.grading
        r = R * v**q
        self.wr = q * R * v ** (q - 1.0) * wv
        self.s = t + r
        E, L, C = _ou_moments(spec, r)
        means = np.einsum("jab,xb->jxa", E, grid_pts)
        spread = np.einsum("jab,qb->jqa", L, zeta)
        self.points = means[:, :, None, :] + spread[:, None, :, :]  # (n_r, n_x, Q, D)
        self.kernel = np.einsum("qa,jak->jqk", zeta, C)  # (n_r, Q, N)
        self.wq = wq
        s_full = np.broadcast_to(self.s[:, None, None], self.points.shape[:-1])
        self.c = problem.drift(s_full, self.points)  # (n_r, n_x, Q, N)
        src_exp = _dense(problem.approximant.expm(T - self.s))  # (n_r, D, D)
        if problem.project_source and problem.approximant.kind == "projection":
            src_exp[:, problem.approximant.keep * spec.state_dim:, :] = 0.0
        Gc = np.einsum("aK,jxqK->jxqa", noise_matrix(spec), self.c)
        source = np.einsum("jab,jxqb->jxqa", src_exp, Gc)
        self.u_src, self.g_src = self.integrate(source)
        self.corners = None

    def bind(self, times, axes):
        self.corners = _CornerWeights(times, axes, self.s, self.points)
        del self.points

    def integrate(self, F):
        wjq = self.wr[:, None] * self.wq[None, :]
        u = np.einsum("jq,jxqa->xa", wjq, F, optimize=True)
        g = np.einsum("jqk,jxqa->xak", wjq[..., None] * self.kernel, F, optimize=True)
        return u, g


def _apply_map(stencils, gf: GridFunction | None, shape_u, shape_g):
    """One application of the Picard map given the previous iterate ``gf``."""
    n_t = len(stencils) + 1
    u = np.zeros((n_t,) + shape_u)
    g = np.zeros((n_t,) + shape_g)
    for i, st in enumerate(stencils):
        if gf is None:
            u[i], g[i] = st.u_src.reshape(shape_u), st.g_src.reshape(shape_g)
            continue
        grad_prev = st.corners.apply(gf.grad)  # (n_r, n_x, Q, D, N)
        F = np.einsum("jxqak,jxqk->jxqa", grad_prev, st.c)
        du, dg = st.integrate(F)
        u[i] = (st.u_src + du).reshape(shape_u)
        g[i] = (st.g_src + dg).reshape(shape_g)
    return u, g


def picard_solve(problem: KolmogorovProblem, config: SolverConfig | None = None, initial=None):
    """Fixed point of the Picard map; returns ``(GridFunction, PicardRecord)``.

    Iteration starts from ``u = 0``.  It stops when the weighted difference
    ``sup_t e^{gamma t}(sup|du| + sup||dgrad||)`` drops below ``tol`` (scaled
    by the size of the iterate).  Three consecutive ratios >= 1 at the current
    gamma trigger a doubling of gamma; the run aborts with a RuntimeError if
    that still fails after gamma exceeds 64.
    """
    cfg = (config or SolverConfig()).resolved(problem.dim)
    spec = problem.spectrum
    D = problem.dim
    N = spec.n_modes
    T = float(problem.horizon)
    if T <= 0:
        raise ValueError("horizon must be positive")
    std = stationary_std(spec)
    half = cfg.box_factor * std
    axes = tuple(np.linspace(-h, h, cfg.space_nodes) for h in half)
    times = graded_times(T, cfg.time_nodes)
    grid_pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, D)
    zeta, wq = hermite_rule(D, cfg.hermite_order)
    v, wv = roots_legendre(cfg.radial_order)
    v, wv = 0.5 * (v + 1.0), 0.5 * wv
    stencils = [_Stencil(problem, cfg, t, grid_pts, zeta, wq, v, wv) for t in times[:-1]]
    for st in stencils:
        st.bind(times, axes)
    shape_u = tuple(len(a) for a in axes) + (D,)
    shape_g = shape_u + (N,)
    meta = {
        "box_half_width": half.tolist(),
        "box_factor": cfg.box_factor,
        "time_nodes": cfg.time_nodes,
        "space_nodes": cfg.space_nodes,
        "hermite_order": cfg.hermite_order,
        "radial_order": cfg.radial_order,
        "approximant": problem.approximant.describe(),
        "horizon": T,
    }

    record = PicardRecord(times, [], cfg.gamma)
    gf = None if initial is None else initial
    gamma = cfg.gamma
    for it in range(cfg.max_iter):
        u, g = _apply_map(stencils, gf, shape_u, shape_g)
        assert np.all(u[-1] == 0.0) and np.all(g[-1] == 0.0)
        new = GridFunction(times, axes, u, g, dict(meta, iterations=it + 1))
        if gf is None:
            du, dg = np.abs(u), np.abs(g)
        else:
            du, dg = np.abs(u - gf.value), np.abs(g - gf.grad)
        prof = du.reshape(len(times), -1).max(axis=1) + dg.reshape(len(times), -1).max(axis=1)
        record.profiles.append(prof)
        gf = new
        norms = record.norms(gamma)
        scale = max(1.0, float(np.max(np.exp(gamma * times) * (np.abs(u).reshape(len(times), -1).max(axis=1)))))
        if norms[-1] <= cfg.tol * scale:
            record.converged = True
            break
        if len(norms) >= 4:
            ratios = norms[-3:] / norms[-4:-1]
            if np.all(ratios >= 1.0):
                gamma *= 2.0
                record.gamma = gamma
                if gamma > 64.0:
                    raise RuntimeError(
                        f"Picard map not contracting: last ratios {ratios.round(3).tolist()} "
                        "persist at gamma > 64; increase gamma or refine the grids"
                    )
    if not record.converged:
        record.note = f"stopped after {cfg.max_iter} iterations"
    gf.meta["gamma"] = record.gamma
    gf.meta["converged"] = record.converged
    return gf, record


def fixed_point_residual(problem, gf: GridFunction, config: SolverConfig | None = None) -> float:
    """Max-norm change of ``(u, grad^G u)`` under one more application of the map."""
    cfg = (config or SolverConfig()).resolved(problem.dim)
    cfg.time_nodes = len(gf.times)
    cfg.space_nodes = len(gf.axes[0])
    D = problem.dim
    grid_pts = gf.nodes().reshape(-1, D)
    zeta, wq = hermite_rule(D, cfg.hermite_order)
    v, wv = roots_legendre(cfg.radial_order)
    v, wv = 0.5 * (v + 1.0), 0.5 * wv
    stencils = [_Stencil(problem, cfg, t, grid_pts, zeta, wq, v, wv) for t in gf.times[:-1]]
    for st in stencils:
        st.bind(gf.times, gf.axes)
    u, g = _apply_map(stencils, gf, gf.value.shape[1:], gf.grad.shape[1:])
    return float(max(np.max(np.abs(u - gf.value)), np.max(np.abs(g - gf.grad))))


def contraction_diagnostic(record: PicardRecord, gamma: float | None = None) -> np.ndarray:
    """Ratios of successive weighted differences ``||d_{m+1}|| / ||d_m||``."""
    norms = record.norms(gamma)
    if norms.size < 3:
        raise ValueError("need at least 3 recorded iterations")
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(norms[:-1] > 0, norms[1:] / norms[:-1], 0.0)


def constant_drift_solution(spectrum, approximant, c, horizon, t, quad_order=64):
    """``int_t^T e^{(T-s)A_n} G c ds`` by Gauss-Legendre quadrature of the matrix exponential."""
    x, w = roots_legendre(quad_order)
    out = []
    Gc = noise_matrix(spectrum) @ np.asarray(c, dtype=float)
    for ti in np.atleast_1d(t):
        R = horizon - ti
        if R <= 0:
            out.append(np.zeros_like(Gc))
            continue
        tau = 0.5 * R * (x + 1.0)
        e = _dense(approximant.expm(tau))
        out.append(0.5 * R * np.einsum("k,kab,b->a", w, e, Gc))
    return np.array(out)


def lipschitz_quotients(gf: GridFunction, count: int = 400, radius: float = 0.5, step: float = 0.1, seed: int = 0):
    """Sampled ``|u(0, x+y) - u(0, x)| / |y|`` for x in the inner box.

    ``radius`` and ``step`` are fractions of the box half-width.
    """
    rng = np.random.default_rng(seed)
    half = gf.upper
    D = half.size
    x = (2.0 * rng.random((count, D)) - 1.0) * radius * half
    y = rng.standard_normal((count, D))
    y *= (step * np.min(half) * rng.random(count) / np.linalg.norm(y, axis=1))[:, None]
    du = gf.u(0.0, x + y) - gf.u(0.0, x)
    return np.linalg.norm(du, axis=-1) / np.linalg.norm(y, axis=-1)


def lipschitz_check_u0(solutions: dict, growth_tol: float = 0.2, **kw):
    """Max sampled Lipschitz quotient of ``u_n(0, .)`` per key ``(n, horizon)``.

    Returns ``(table, flags)``; ``flags['growing_in_n']`` is set for a horizon
    where the quotient increases with n by more than ``growth_tol``.
    """
    table = {key: float(np.max(lipschitz_quotients(gf, **kw))) for key, gf in solutions.items()}
    flags = {}
    for T in sorted({k[1] for k in table}):
        ns = sorted(k[0] for k in table if k[1] == T)
        vals = [table[(n, T)] for n in ns]
        flags[T] = bool(any(b > (1 + growth_tol) * a for a, b in zip(vals[:-1], vals[1:])))
    return table, {"growing_in_n": flags}


def hs_gradient_lipschitz(gf: GridFunction, t_samples, count: int = 200, radius: float = 0.5,
                          step: float = 0.1, seed: int = 0):
    """Max sampled ``||grad^G u(t, x+y) - grad^G u(t, x)||_HS^2 / |y|^2`` per t."""
    rng = np.random.default_rng(seed)
    half = gf.upper
    D = half.size
    x = (2.0 * rng.random((count, D)) - 1.0) * radius * half
    y = rng.standard_normal((count, D))
    y *= (step * np.min(half) * (0.1 + 0.9 * rng.random(count)) / np.linalg.norm(y, axis=1))[:, None]
    out = []
    for t in np.atleast_1d(t_samples):
        d = gf.grad_G(t, x + y) - gf.grad_G(t, x)
        out.append(float(np.max(np.sum(d * d, axis=(-1, -2)) / np.sum(y * y, axis=-1))))
    return np.array(out)


def component_zero_check(gf: GridFunction, keep: int, state_dim: int = 1) -> float:
    """Largest ``|u_k|`` over the grid for modes k beyond the kept ones."""
    tail = gf.value[..., keep * state_dim:]
    return float(np.max(np.abs(tail))) if tail.size else 0.0


# ---------------------------------------------------------------------------
# heat-specific integrable bound and the Gronwall utility


def _singular_rule(p: float, order: int):
    """Nodes/weights for ``int_0^1 rho^{-p} f(rho) drho`` via rho = v^{1/(1-p)}."""
    x, w = roots_legendre(order)
    v = 0.5 * (x + 1.0)
    q = 1.0 / (1.0 - p)
    return v**q, 0.5 * w * q  # rho^{-p} drho = q dv


@dataclass
class HeatBound:
    t: np.ndarray
    I: np.ndarray  # (n_t, N)
    J: np.ndarray
    h: np.ndarray
    h_l1: float
    g_l1: float
    series: float
    bound_rhs: float
    I_l1: np.ndarray
    I_l1_bound: np.ndarray


def heat_hT(spectrum: HeatSpectrum, component_norms, horizon: float, beta: float, T: float = 1.0,
            C: float = 1.0, lambda_consts=(1.0, 1.0), order: int = 40, n_t: int = 200) -> HeatBound:
    """Tabulate ``h(t) = C sum_k c_k^2 (I_k(t)^2 + J_k(t)^2)`` and its L1 norm.

    ``g(t) = Lambda_1(t)^{1-beta} Lambda_2(t)`` with the heat rates
    ``Lambda_1 = c1 t^{-(1+gamma)/2}``, ``Lambda_2 = c2 t^{-1/2}``.  The
    comparison value ``bound_rhs`` follows the explicit constant chain:
    ``||I^2||_1 <= ||g||_1^2 / a_k`` and ``||J^2||_1 <= M0 C1 / a_k`` with
    ``M0 = ||g||_1^2 (1 + K ||g||_1)`` and ``C1`` the same, ``K = e^{||g||_1}``.

    Raises
    ------
    ValueError
        If the gradient-kernel singularity is not integrable, or if the
        weighted series ``sum c_k^2 / a_k`` does not decay (fitted tail
        exponent >= -1 over the upper half of at least 8 modes).
    """
    a = spectrum.alpha_k
    c = np.asarray(component_norms, dtype=float)
    if c.shape != a.shape:
        raise ValueError("one component norm per mode is required")
    if horizon > T:
        raise ValueError("horizon must not exceed T")
    p = (1.0 - beta) * (1.0 + spectrum.gamma) / 2.0 + 0.5
    if p >= 1.0:
        raise ValueError(f"g = Lambda_1^(1-beta) Lambda_2 ~ t^-{p:.3f} is not integrable")
    amp = lambda_consts[0] ** (1.0 - beta) * lambda_consts[1]
    terms = c * c / a
    if a.size >= 8:
        half = slice(a.size // 2, None)
        slope = np.polyfit(np.log(np.arange(1, a.size + 1)[half]), np.log(terms[half] + 1e-300), 1)[0]
        if slope >= -1.0:
            raise ValueError(
                "summability condition on sup ||C_k||^2 / alpha_k violated "
                f"(tail exponent {slope:.2f})"
            )
    g_l1 = amp * T ** (1.0 - p) / (1.0 - p)
    K = math.exp(g_l1)
    rho, wr = _singular_rule(p, order)

    def conv(f_of, t):
        """``int_t^H g(r - t) f(r) dr`` for an array of t; f_of maps r -> (..., N)."""
        R = horizon - t
        r = t[:, None] + R[:, None] * rho
        vals = f_of(r)
        return amp * np.einsum("k,tkn->tn", wr, vals) * (R ** (1.0 - p))[:, None]

    def I_of(t):
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        out = conv(lambda r: np.exp(-np.multiply.outer(horizon - r, a)), flat)
        return out.reshape(t.shape + (a.size,))

    def Phi(t):
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        return conv(I_of, flat).reshape(t.shape + (a.size,))

    def J_of(t):
        return conv(lambda r: I_of(r) + K * Phi(r), t)

    # tabulate on a mesh graded toward the horizon
    xs, ws = roots_legendre(n_t)
    v = 0.5 * (xs + 1.0)
    t = horizon * (1.0 - v**2)
    wt = horizon * v * ws  # dt = 2 H v dv, times the 1/2 of the interval map
    I = I_of(t)
    J = J_of(t)
    h = C * np.einsum("n,tn->t", c * c, I * I + J * J)
    h_l1 = float(np.dot(wt, h))
    I_l1 = np.einsum("t,tn->n", wt, I)
    M0 = g_l1**2 * (1.0 + K * g_l1)
    rhs = C * float(np.sum(terms)) * (g_l1**2 + M0 * M0)
    order_idx = np.argsort(t)
    return HeatBound(t[order_idx], I[order_idx], J[order_idx], h[order_idx], h_l1, g_l1,
                     float(np.sum(terms)), rhs, I_l1, g_l1 / a)


def gronwall_bound(f, g, T: float, variant: str = "backward", t=None, singularity: float = 0.0,
                   order: int = 64):
    """Explicit bound of the generalised Gronwall inequality.

    ``variant='backward'``: for ``v(t) <= f(t) + int_t^T g(s-t) v(s) ds``
    returns ``f(t) + e^{||g||_1} int_t^T f(s) g(s-t) ds`` at the points
    ``t``.  ``variant='forward'``: for ``u(t) <= C + int_0^t h(t-s) u(s) ds``
    with ``f`` the constant C returns ``C (1 + ||h||_1 e^{||h||_1})``.

    ``g`` may be singular at 0 like ``t^{-singularity}`` (singularity < 1);
    the quadrature substitution absorbs that power.
    """
    rho, w = _singular_rule(singularity, order)

    def g_reg(x):
        # g(x) x^singularity, bounded near 0
        return np.asarray(g(x), dtype=float) * x**singularity

    gl1 = float(T ** (1.0 - singularity) * np.dot(w, g_reg(T * rho)))
    if variant == "forward":
        C = float(f(0.0)) if callable(f) else float(f)
        return C * (1.0 + gl1 * math.exp(gl1))
    if variant != "backward":
        raise ValueError("variant must be 'forward' or 'backward'")
    t = np.atleast_1d(np.asarray(t if t is not None else np.linspace(0.0, T, 11), dtype=float))
    R = T - t
    x = R[:, None] * rho
    fv = np.asarray(f(t[:, None] + x), dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        integral = np.where(R > 0, R ** (1.0 - singularity) * np.einsum("k,tk->t", w, fv * g_reg(np.where(x > 0, x, 1.0))), 0.0)
    return np.asarray(f(t), dtype=float) + math.exp(gl1) * integral


# ---------------------------------------------------------------------------
# Monte Carlo oracle for u(0, x)


def feynman_kac_value(problem: KolmogorovProblem, x0, n_paths: int = 200_000, n_steps: int = 400,
                      seed: int = 0, batch: int = 50_000):
    """Monte Carlo estimate of ``u(0, x0) = E int_0^T e^{(T-s)A_n} G C(s, X_s) ds``.

    ``X`` solves the semilinear equation ``dX = (A X + G C(s, X)) ds + G dW``,
    simulated by the exponential Euler scheme with exact OU increments; the
    time integral uses the trapezoidal rule on the same grid.  Returns
    ``(mean, standard error)`` per component.
    """
    spec = problem.spectrum
    T = float(problem.horizon)
    h = T / n_steps
    D = problem.dim
    E = _dense(semigroup_blocks(spec, np.array(h)))
    L = _dense(cholesky_blocks(covariance_blocks(spec, np.array(h))))
    G = noise_matrix(spec)
    # int_0^h e^{(h-s)A} ds G
    xq, wq = roots_legendre(16)
    tau = 0.5 * h * (xq + 1.0)
    Phi = 0.5 * h * np.einsum("k,kab->ab", wq, _dense(semigroup_blocks(spec, tau))) @ G
    times = np.linspace(0.0, T, n_steps + 1)
    src = _dense(problem.approximant.expm(T - times)) @ G  # (n_steps+1, D, N)
    if problem.project_source and problem.approximant.kind == "projection":
        src[:, problem.approximant.keep * spec.state_dim:, :] = 0.0
    trap = np.full(n_steps + 1, h)
    trap[[0, -1]] = 0.5 * h
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    sums = []
    remaining = n_paths
    while remaining > 0:
        m = min(batch, remaining)
        remaining -= m
        X = np.broadcast_to(np.asarray(x0, dtype=float), (m, D)).copy()
        acc = np.zeros((m, D))
        for j in range(n_steps + 1):
            c = problem.drift(np.full(m, times[j]), X)
            acc += trap[j] * c @ src[j].T
            if j == n_steps:
                break
            X = X @ E.T + c @ Phi.T + rng.standard_normal((m, D)) @ L.T
        sums.append(acc)
    vals = np.concatenate(sums)
    return vals.mean(axis=0), vals.std(axis=0, ddof=1) / math.sqrt(vals.shape[0])
