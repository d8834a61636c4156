"""Least-squares Monte Carlo for the forward-backward system.

Forward: the OU process ``dX = AX dt + G dW`` sampled exactly together with
its Brownian increments.  Backward: the mild BSDE driven by ``-A_n``,

    Y_i = E_i[e^{-h A_n}(Y_{i+1} + h (G C(t_{i+1}, X_{i+1}) + Z_{i+1} C(t_{i+1}, X_{i+1})))]
    Z_i = e^{-h A_n} E_i[(V_{i+1} - E_i V_{i+1}) dW_i^T] / h

where ``V_{i+1}`` is the bracket in the Y update, and conditional
expectations are replaced by regressions on tensor polynomials.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .gaussian import NoiseStream, joint_increment_factor
from .kolmogorov import GridFunction, _dense, noise_matrix
from .spectral import Approximant, semigroup_blocks

RIDGE = 1e-8


@dataclass
class PathBundle:
    times: np.ndarray  # (M+1,)
    states: np.ndarray  # (M+1, paths, D)
    dW: np.ndarray  # (M, paths, N)
    spectrum: object
    seed: int

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def paths(self) -> int:
        return self.states.shape[1]


def simulate_forward(spectrum, x, horizon: float, steps: int, paths: int, seed: int = 0,
                     experiment: int = 3) -> PathBundle:
    """Exact OU paths and the Brownian increments that drive them.

    Each step draws the pair (convolution increment, dW) per mode from its
    joint Gaussian law, so the backward pass can reuse the same noise.
    """
    if steps < 2:
        raise ValueError("need at least 2 steps")
    h = horizon / steps
    N, s = spectrum.n_modes, spectrum.state_dim
    E = semigroup_blocks(spectrum, h)
    J = joint_increment_factor(spectrum, h)  # (N, s+1, s+1)
    stream = NoiseStream(seed, experiment)
    X = np.empty((steps + 1, paths, N, s))
    X[0] = np.asarray(x, dtype=float).reshape(N, s)
    dW = np.empty((steps, paths, N))
    for i in range(steps):
        xi = stream.normals(i, (paths, N, s + 1))
        joint = np.einsum("nab,pnb->pna", J, xi)
        X[i + 1] = np.einsum("nab,pnb->pna", E, X[i]) + joint[..., :s]
        dW[i] = joint[..., s]
    return PathBundle(np.linspace(0.0, horizon, steps + 1), X.reshape(steps + 1, paths, N * s), dW,
                      spectrum, seed)


def _exponents(dim: int, degree: int):
    return [e for e in itertools.product(range(degree + 1), repeat=dim) if sum(e) <= degree]


class PolyBasis:
    """Polynomials of total degree <= ``degree`` in standardised coordinates."""

    def __init__(self, X, degree: int = 3):
        self.center = X.mean(axis=0)
        sd = X.std(axis=0)
        self.active = sd > 1e-12 * max(1.0, float(np.max(np.abs(self.center))))
        self.scale = np.where(self.active, sd, 1.0)
        dim = int(self.active.sum())
        self.exps = _exponents(dim, degree) if dim else [()]

    def __call__(self, X):
        z = ((X - self.center) / self.scale)[:, self.active]
        cols = [np.prod([z[:, j] ** k for j, k in enumerate(e)], axis=0) if e else np.ones(len(X))
                for e in self.exps]
        return np.stack([np.broadcast_to(c, (len(X),)) for c in cols], axis=1)


class HatBasis:
    """Tensor piecewise-linear hat functions on a box of +-4 standard deviations."""

    def __init__(self, X, nodes: int = 24):
        self.center = X.mean(axis=0)
        sd = X.std(axis=0)
        self.active = sd > 1e-12 * max(1.0, float(np.max(np.abs(self.center))))
        self.lo = self.center - 4.0 * sd
        self.step = np.where(self.active, 8.0 * sd / (nodes - 1), 1.0)
        self.nodes = nodes
        self.dim = int(self.active.sum())

    def __call__(self, X):
        if self.dim == 0:
            return np.ones((len(X), 1))
        pos = np.clip((X - self.lo) / self.step, 0.0, self.nodes - 1.0)[:, self.active]
        k = np.minimum(pos.astype(int), self.nodes - 2)
        f = pos - k
        out = np.zeros((len(X),) + (self.nodes,) * self.dim)
        rows = np.arange(len(X))
        for corner in itertools.product((0, 1), repeat=self.dim):
            w = np.prod([f[:, j] if c else 1.0 - f[:, j] for j, c in enumerate(corner)], axis=0)
            idx = tuple(k[:, j] + c for j, c in enumerate(corner))
            np.add.at(out, (rows,) + idx, w)
        return out.reshape(len(X), -1)


def make_basis(X, kind: str = "poly", degree: int = 3, nodes: int = 24):
    if kind == "poly":
        return PolyBasis(X, degree)
    if kind == "local":
        return HatBasis(X, nodes)
    raise ValueError("basis must be 'poly' or 'local'")


def _regress(P, Y):
    """Least squares ``P b ~ Y``; ridge 1e-8 (relative) when P is rank deficient."""
    coef, _, rank, sv = np.linalg.lstsq(P, Y, rcond=None)
    if rank < P.shape[1]:
        warnings.warn("rank-deficient regression; ridge 1e-8 applied", RuntimeWarning)
        PtP = P.T @ P
        lam = RIDGE * np.trace(PtP) / P.shape[1]
        coef = np.linalg.solve(PtP + lam * np.eye(P.shape[1]), P.T @ Y)
    return coef


@dataclass
class BackwardField:
    times: np.ndarray
    Y: np.ndarray  # (M+1, paths, D) fitted values along the paths
    Z: np.ndarray  # (M, paths, D, N)
    coef_Y: list
    coef_Z: list
    approximant: Approximant
    realized: np.ndarray | None = None  # (paths, D) pathwise discounted cost-to-go from t = 0

    @property
    def y0(self) -> np.ndarray:
        return self.Y[0].mean(axis=0)

    def y0_stderr(self) -> np.ndarray:
        """Standard error of the pathwise realised value, whose mean Y_0 estimates."""
        src = self.Y[1] if self.realized is None else self.realized
        return src.std(axis=0, ddof=1) / math.sqrt(src.shape[0])


def solve_backward(bundle: PathBundle, drift, approximant: Approximant, degree: int = 3,
                   basis: str = "poly", nodes: int = 24) -> BackwardField:
    """Backward regression pass.

    ``basis='poly'`` uses polynomials of total degree <= ``degree``;
    ``basis='local'`` uses ``nodes`` hat functions per coordinate, which
    suits the steep gradients produced by rough drifts near the horizon.
    """
    spec = bundle.spectrum
    M = len(bundle.times) - 1
    P_, D = bundle.states.shape[1:]
    N = spec.n_modes
    h = bundle.h
    G = noise_matrix(spec)
    back = _dense(approximant.expm(-h))  # e^{-h A_n}
    Y = np.zeros((M + 1, P_, D))
    Z = np.zeros((M + 1, P_, D, N))
    coef_Y, coef_Z = [None] * (M + 1), [None] * (M + 1)
    pushes = [None] * M
    for i in range(M - 1, -1, -1):
        Xn = bundle.states[i + 1]
        c = drift(np.full(P_, bundle.times[i + 1]), Xn)
        pushes[i] = h * (c @ G.T + np.einsum("pak,pk->pa", Z[i + 1], c))
        raw = Y[i + 1] + pushes[i]
        Pm = make_basis(bundle.states[i], basis, degree, nodes)(bundle.states[i])
        bm = _regress(Pm, raw)
        bY = bm @ back.T
        Y[i] = Pm @ bY
        # control variate: E_i[raw] contributes nothing to E_i[. dW]
        resid = raw - Pm @ bm
        prod = (resid[:, :, None] * bundle.dW[i][:, None, :] / h).reshape(P_, D * N)
        bZ = _regress(Pm, prod)
        Z[i] = np.einsum("ab,pbk->pak", back, (Pm @ bZ).reshape(P_, D, N))
        coef_Y[i], coef_Z[i] = bY, bZ
    realized = np.zeros((P_, D))
    for i in range(M - 1, -1, -1):
        realized = (realized + pushes[i]) @ back.T
    return BackwardField(bundle.times, Y, Z[:M], coef_Y[:M], coef_Z[:M], approximant, realized)


def identification_check(field: BackwardField, u: GridFunction, bundle: PathBundle) -> dict:
    """Relative RMSEs of the identities Y = e^{-(T-t)A_n} u(t, X) and e^{(T-t)A_n} Z = grad^G u(t, X).

    Aggregated over the interior steps 1..M-1; a numerically zero reference
    (mean square below 1e-20) gives the absolute RMSE instead.
    """
    T = field.times[-1]
    M = len(field.times) - 1
    ap = field.approximant
    ey, ny, ez, nz = 0.0, 0.0, 0.0, 0.0
    for i in range(1, M):
        t = field.times[i]
        X = bundle.states[i]
        ref_y = u.u(t, X) @ _dense(ap.expm(-(T - t))).T
        ref_z = u.grad_G(t, X)
        zf = np.einsum("ab,pbk->pak", _dense(ap.expm(T - t)), field.Z[i])
        ey += float(np.sum((field.Y[i] - ref_y) ** 2))
        ny += float(np.sum(ref_y**2))
        ez += float(np.sum((zf - ref_z) ** 2))
        nz += float(np.sum(ref_z**2))
    count = max(1, (M - 1) * bundle.paths)
    floor = 1e-20 * count
    rel = lambda e, n: math.sqrt(e / n) if n > floor else math.sqrt(e / count)
    return {"Y_rmse": rel(ey, ny), "Z_rmse": rel(ez, nz), "relative_Y": ny > floor, "relative_Z": nz > floor}


def bsde_apriori_check(field: BackwardField, drift_sup: float) -> dict:
    """Empirical ``E sup_i |Y_i|^2`` and ``E sum_i h ||Z_i||^2`` and their ratios to ``||C||_inf``."""
    h = float(field.times[1] - field.times[0])
    sup_y = float(np.mean(np.max(np.sum(field.Y**2, axis=-1), axis=0)))
    int_z = float(np.mean(np.sum(h * np.sum(field.Z**2, axis=(-1, -2)), axis=0)))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (sup_y + int_z) / drift_sup if drift_sup > 0 else 0.0
    return {"E_sup_Y2": sup_y, "E_int_Z2": int_z, "ratio_to_drift_sup": float(ratio)}


def martingale_mean(field: BackwardField, bundle: PathBundle):
    """Path mean and standard error of ``sum_i Z_i dW_i``."""
    m = np.einsum("ipak,ipk->pa", field.Z, bundle.dW)
    return m.mean(axis=0), m.std(axis=0, ddof=1) / math.sqrt(m.shape[0])
