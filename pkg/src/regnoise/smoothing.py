"""Controllability operator Gamma(t), Monte Carlo OU gradient kernels and
log-log rate fits.

Gamma(t) is realised per mode as ``L_t^{-1} e^{tM}`` with ``L_t`` the lower
Cholesky factor of ``Q_t``.  It differs from ``Q_t^{-1/2} e^{tM}`` by an
orthogonal factor, so every norm and every kernel expectation agrees.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .gaussian import cholesky_blocks, covariance_blocks
from .spectral import HeatSpectrum, semigroup_blocks


@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple
    points: int
    conclusive: bool = True
    note: str = ""

    def as_dict(self):
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "window": list(self.window),
            "points": self.points,
            "conclusive": self.conclusive,
            "note": self.note,
        }


def fit_loglog(t, values, min_r2: float = 0.95) -> RateFit:
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    res = stats.linregress(np.log(t), np.log(values))
    r2 = float(res.rvalue**2)
    return RateFit(
        float(res.slope), float(res.intercept), r2, (float(t.min()), float(t.max())), t.size, r2 >= min_r2
    )


def gamma_blocks(spectrum, t) -> np.ndarray:
    """Per-mode ``L_t^{-1} e^{tM}``; shape t.shape + (N, s, s)."""
    e = semigroup_blocks(spectrum, t)
    L = cholesky_blocks(covariance_blocks(spectrum, t))
    return np.linalg.solve(L, e)


def gamma_apply(spectrum, t: float, z):
    """``|Gamma(t) z|_H`` and the per-mode squared contributions.

    ``z`` has shape (N, s) (or (N,) for heat).
    """
    if t <= 0:
        raise ValueError("t must be positive")
    z = np.asarray(z, dtype=float).reshape(spectrum.n_modes, spectrum.state_dim)
    v = np.einsum("nij,nj->ni", gamma_blocks(spectrum, t), z)
    contrib = np.sum(v * v, axis=-1)
    return float(np.sqrt(contrib.sum())), contrib


def lambda_profiles(spectrum, t):
    """Lambda_1(t), Lambda_2(t) and the maximising mode indices.

    Lambda_1 is the largest singular value over all modes; Lambda_2 is the
    largest ``|Gamma(t) g_n| / |a|_U`` over unit U-directions, which for the
    block-diagonal operator is the max over modes of ``|Gamma_n(t) g_n|``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    gam = gamma_blocks(spectrum, t)
    sv = np.linalg.svd(gam, compute_uv=False)[..., 0]
    v = np.einsum("tnij,nj->tni", gam, spectrum.noise_vectors())
    gdir = np.sqrt(np.sum(v * v, axis=-1))
    return sv.max(axis=1), gdir.max(axis=1), sv.argmax(axis=1), gdir.argmax(axis=1)


def gamma_norm_rates(spectrum, t_grid, n: int | None = None):
    """Fits for Lambda_1 and Lambda_2 over ``t_grid``.

    A fit is flagged inconclusive if the maximising mode reaches the upper
    half of the truncation anywhere in the window, or if r^2 < 0.95.
    """
    spec = spectrum if n is None else spectrum.truncate(n)
    t = np.asarray(t_grid, dtype=float)
    l1, l2, i1, i2 = lambda_profiles(spec, t)
    fits = []
    for vals, idx in ((l1, i1), (l2, i2)):
        fit = fit_loglog(t, vals)
        if idx.max() >= spec.n_modes // 2:
            fit.conclusive = False
            fit.note = f"arg-max mode {int(idx.max()) + 1} reaches the truncation half N/2"
        fits.append(fit)
    table = {"t": t, "lambda1": l1, "lambda2": l2, "argmax1": i1, "argmax2": i2}
    return fits[0], fits[1], table


def hs_gamma_G(spectrum, t, n: int | None = None):
    """Squared HS norm ``sum_n (e^{tM}g_n)^T Q_t^{-1} (e^{tM}g_n)``; vectorised in t."""
    spec = spectrum if n is None else spectrum.truncate(n)
    t = np.asarray(t, dtype=float)
    v = np.einsum("...nij,nj->...ni", gamma_blocks(spec, t), spec.noise_vectors())
    return np.sum(v * v, axis=(-1, -2))


def hs_gamma_G_rate(spectrum, t_grid, n: int | None = None) -> RateFit:
    """Log-log fit of the (unsquared) HS norm of Gamma(t) G."""
    t = np.asarray(t_grid, dtype=float)
    return fit_loglog(t, np.sqrt(hs_gamma_G(spectrum, t, n)))


# ---------------------------------------------------------------- test functions


@dataclass
class TestFunction:
    """Bounded map H -> H on flattened modal vectors.

    kind ``constant``: x -> h.  ``linear``: x -> <x, e> h (bounded only on
    bounded sets, used for kernel checks).  ``holder``: x -> h psi(<x, e>)
    with psi(s) = sign(s) min(|s|, R)^beta (odd) or min(|s|, R)^beta (even).
    ``custom``: any vectorised callable.
    """

    __test__ = False

    kind: str
    h: np.ndarray
    e: np.ndarray | None = None
    beta: float = 1.0
    cap: float = np.inf
    parity: str = "odd"
    func: object = field(default=None, repr=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.broadcast_to(self.h, x.shape[:-1] + self.h.shape)
        if self.kind == "custom":
            return self.func(x)
        s = x @ self.e
        if self.kind == "linear":
            return s[..., None] * self.h
        if self.kind == "holder":
            return self.profile(s)[..., None] * self.h
        raise ValueError(f"unknown test function kind {self.kind!r}")

    def profile(self, s):
        mag = np.minimum(np.abs(s), self.cap) ** self.beta
        return np.sign(s) * mag if self.parity == "odd" else mag

    def holder_seminorm(self) -> float:
        """Closed-form beta-Holder seminorm of the holder kind."""
        if self.kind != "holder":
            raise ValueError("seminorm only defined for the holder kind")
        # odd power has constant 2^(1-beta) (attained at s, -s); even has 1
        c = 2.0 ** (1.0 - self.beta) if self.parity == "odd" else 1.0
        return c * float(np.linalg.norm(self.h)) * float(np.linalg.norm(self.e)) ** self.beta

    def sup_norm(self) -> float:
        if self.kind == "constant":
            return float(np.linalg.norm(self.h))
        if self.kind == "holder":
            return float(np.linalg.norm(self.h)) * self.cap**self.beta
        return np.inf

    @classmethod
    def constant(cls, h):
        return cls("constant", np.asarray(h, dtype=float))

    @classmethod
    def linear(cls, e, h):
        return cls("linear", np.asarray(h, dtype=float), np.asarray(e, dtype=float))

    @classmethod
    def holder(cls, e, h, beta, cap=np.inf, parity="odd"):
        return cls("holder", np.asarray(h, dtype=float), np.asarray(e, dtype=float), beta, cap, parity)


# ---------------------------------------------------------------- dense helpers


def _block_diag(blocks):
    n, s, _ = blocks.shape
    out = np.zeros((n * s, n * s))
    for i in range(n):
        out[i * s:(i + 1) * s, i * s:(i + 1) * s] = blocks[i]
    return out


@dataclass
class OUMoments:
    """Dense mean map, Cholesky factor and Gamma(t) at a fixed time."""

    E: np.ndarray
    L: np.ndarray
    Gamma: np.ndarray
    G: np.ndarray

    @classmethod
    def at(cls, spectrum, t: float):
        e = semigroup_blocks(spectrum, t)
        L = cholesky_blocks(covariance_blocks(spectrum, t))
        gam = np.linalg.solve(L, e)
        g = spectrum.noise_vectors()
        n, sdim = g.shape
        G = np.zeros((n * sdim, n))
        for i in range(n):
            G[i * sdim:(i + 1) * sdim, i] = g[i]
        return cls(_block_diag(e), _block_diag(L), _block_diag(gam), G)


def _normals(seed, n_pairs, dim):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n_pairs, dim))


def _mean_se(samples):
    m = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])
    return m, se


def grad_R(spectrum, t, phi, x, k, n_samples: int = 100_000, seed: int = 0, return_samples=False):
    """MC estimate of ``grad_k R_t[phi](x) = E[<Gamma(t)k, xi> phi(e^{tA}x + L xi)]``.

    Antithetic pairs (xi, -xi); the kernel is odd so each pair contributes
    ``<Gamma k, xi> (phi(m + L xi) - phi(m - L xi)) / 2``.
    Returns ``(estimate, standard_error)`` computed over pairs.
    """
    mom = OUMoments.at(spectrum, t)
    x = np.ravel(x)
    k = np.ravel(k)
    xi = _normals(seed, n_samples // 2, x.size)
    mean = mom.E @ x
    y = xi @ mom.L.T
    w = xi @ (mom.Gamma @ k)
    vals = 0.5 * w[:, None] * (phi(mean + y) - phi(mean - y))
    est, se = _mean_se(vals)
    return (est, se, vals) if return_samples else (est, se)


def second_grad_R(spectrum, t, phi, x, y, k, n_samples: int = 100_000, seed: int = 0, return_samples=False):
    """MC estimate of ``grad_y grad^G_k R_t[phi](x)``.

    Kernel ``<Gamma y, xi><Gamma G k, xi> - <Gamma y, Gamma G k>``, even in
    xi, so antithetic pairs average ``phi(m + L xi) + phi(m - L xi)``.  The
    kernel integrates constants to zero exactly, so ``phi(m)`` is subtracted
    as a control variate.  ``k`` is a U-vector (one entry per mode).
    """
    mom = OUMoments.at(spectrum, t)
    x = np.ravel(x)
    gy = mom.Gamma @ np.ravel(y)
    gk = mom.Gamma @ (mom.G @ np.ravel(k))
    xi = _normals(seed, n_samples // 2, x.size)
    mean = mom.E @ x
    z = xi @ mom.L.T
    ker = (xi @ gy) * (xi @ gk) - gy @ gk
    centre = phi(mean[None, :])[0]
    vals = ker[:, None] * (0.5 * (phi(mean + z) + phi(mean - z)) - centre)
    est, se = _mean_se(vals)
    return (est, se, vals) if return_samples else (est, se)


def fd_R(spectrum, t, phi, x, k, eps=1e-3, n_samples=100_000, seed=0):
    """Central difference of plain MC of ``R_t[phi]`` with common random numbers.

    Uses the same antithetic normals as :func:`grad_R` so that the two
    estimators can be compared through their paired differences.
    """
    mom = OUMoments.at(spectrum, t)
    x = np.ravel(x)
    k = np.ravel(k)
    xi = _normals(seed, n_samples // 2, x.size)
    y = xi @ mom.L.T
    mp = mom.E @ (x + eps * k)
    mm = mom.E @ (x - eps * k)
    vals = 0.25 * ((phi(mp + y) - phi(mm + y)) + (phi(mp - y) - phi(mm - y))) / eps
    return vals


def fd_grad_R(spectrum, t, phi, x, y, k, eps=1e-3, n_samples=100_000, seed=0):
    """Central difference in ``x`` along ``y`` of the grad^G_k kernel estimator."""
    k_state = OUMoments.at(spectrum, t).G @ np.ravel(k)
    _, _, sp = grad_R(spectrum, t, phi, np.ravel(x) + eps * np.ravel(y), k_state, n_samples, seed, True)
    _, _, sm = grad_R(spectrum, t, phi, np.ravel(x) - eps * np.ravel(y), k_state, n_samples, seed, True)
    return (sp - sm) / (2 * eps)


def sample_states(dim, count=32, radius=5.0, seed=0, include_origin=True):
    """Random states of norm <= radius (uniform direction, uniform radius)."""
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((count, dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.uniform(size=(count, 1))
    pts = d * r
    if include_origin:
        pts = np.vstack([np.zeros(dim), pts])
    return pts


def holder_rate_fit(spectrum, phi, y, t_grid, states=None, n_samples=100_000, seed=0, k=None):
    """Fit ``sup_x |grad_y R_t[phi](x)|`` against t (or the mixed
    ``grad_y grad^G_k`` derivative when ``k`` is given).

    The sup runs over ``states`` (default: 32 random states of norm <= 5 plus
    the origin).  ``states`` may also be a callable ``t -> array`` for
    families whose maximiser moves with t.
    """
    dim = spectrum.n_modes * spectrum.state_dim
    if states is None:
        states = sample_states(dim, seed=seed)
    t = np.asarray(t_grid, dtype=float)
    sup = np.zeros(t.size)
    err = np.zeros(t.size)
    for i, ti in enumerate(t):
        best = -1.0
        pts = states(ti) if callable(states) else np.atleast_2d(states)
        for x in pts:
            if k is None:
                est, se = grad_R(spectrum, ti, phi, x, y, n_samples, seed + i)
            else:
                est, se = second_grad_R(spectrum, ti, phi, x, y, k, n_samples, seed + i)
            mag = float(np.linalg.norm(est))
            if mag > best:
                best, best_se = mag, float(np.linalg.norm(se))
        sup[i], err[i] = best, best_se
    fit = fit_loglog(t, sup)
    return fit, {"t": t, "value": sup, "stderr": err}
