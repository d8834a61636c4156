"""Bounded drifts ``C~(s, x)`` mapping flattened modal states to U-coefficients.

Every drift is vectorised: ``drift(s, X)`` takes states of shape (..., D),
with D = n_modes * state_dim, and returns (..., n_modes).  ``modal(s, X)``
returns ``G C~`` in modal coordinates, shape (..., D).
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .spectral import HeatSpectrum, WaveSpectrum, from_physical, interior_grid, to_physical


class Drift:
    spectrum = None
    name = "drift"

    def __call__(self, s, X):
        raise NotImplementedError

    def modal(self, s, X):
        c = self(s, X)
        g = self.spectrum.noise_vectors()
        out = c[..., :, None] * g
        return out.reshape(c.shape[:-1] + (-1,))

    def sup_norm(self) -> float:
        """Declared bound on ``|G C~|_H``."""
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.name}


class ZeroDrift(Drift):
    name = "zero"

    def __init__(self, spectrum):
        self.spectrum = spectrum

    def __call__(self, s, X):
        X = np.asarray(X, dtype=float)
        return np.zeros(X.shape[:-1] + (self.spectrum.n_modes,))

    def sup_norm(self):
        return 0.0


class ConstantDrift(Drift):
    name = "constant"

    def __init__(self, spectrum, c):
        self.spectrum = spectrum
        self.c = np.asarray(c, dtype=float).reshape(spectrum.n_modes)

    def __call__(self, s, X):
        X = np.asarray(X, dtype=float)
        return np.broadcast_to(self.c, X.shape[:-1] + self.c.shape).copy()

    def sup_norm(self):
        return float(np.linalg.norm(self.c * self.spectrum.noise_gain()))

    def describe(self):
        return {"kind": self.name, "c": self.c.tolist()}


class LinearDrift(Drift):
    """``c0 + K x``: smooth, used for consistency checks on bounded boxes."""

    name = "linear"

    def __init__(self, spectrum, c0, K):
        self.spectrum = spectrum
        self.c0 = np.asarray(c0, dtype=float)
        self.K = np.atleast_2d(np.asarray(K, dtype=float))

    def __call__(self, s, X):
        X = np.asarray(X, dtype=float)
        return self.c0 + X @ self.K.T

    def sup_norm(self):
        return np.inf


class ScalarHolder(Drift):
    """``c0 * psi(<x, e>)`` with psi(s) = sign(s) min(|s|, R)^beta on one U-direction.

    A compact beta-Holder drift for low-dimensional solver checks.
    """

    name = "scalar-holder"

    def __init__(self, spectrum, direction, coeffs, beta=0.75, cap=5.0, smooth=0.0):
        self.spectrum = spectrum
        self.e = np.asarray(direction, dtype=float)
        self.coeffs = np.asarray(coeffs, dtype=float).reshape(spectrum.n_modes)
        self.beta = beta
        self.cap = cap
        self.smooth = smooth

    def profile(self, s):
        if self.smooth > 0:
            # Lipschitz regularisation: |s| replaced by sqrt(s^2 + eps^2) - eps
            mag = np.sqrt(s * s + self.smooth**2) - self.smooth
            return np.tanh(s / self.smooth) * np.minimum(mag, self.cap) ** self.beta
        return np.sign(s) * np.minimum(np.abs(s), self.cap) ** self.beta

    def __call__(self, s, X):
        X = np.asarray(X, dtype=float)
        return self.profile(X @ self.e)[..., None] * self.coeffs

    def sup_norm(self):
        return float(np.linalg.norm(self.coeffs * self.spectrum.noise_gain())) * self.cap**self.beta

    def describe(self):
        return {"kind": self.name, "beta": self.beta, "cap": self.cap, "coeffs": self.coeffs.tolist()}


class WaveHolder(Drift):
    """Nemytskii drift ``c(xi, y(xi))`` of the displacement field.

    Default instance ``c = c1 * sign(y) min(|y|, R)^beta + offset``; it is
    evaluated on an interior grid with ``grid_factor`` points per mode and
    projected back onto the sine basis.
    """

    name = "wave-holder"

    def __init__(self, spectrum: WaveSpectrum, beta=0.75, cap=5.0, c1=1.0, offset=0.0, grid_factor=4):
        self.spectrum = spectrum
        self.beta = beta
        self.cap = cap
        self.c1 = c1
        self.offset = offset
        self.grid = interior_grid(grid_factor * spectrum.n_modes)

    def pointwise(self, y):
        return self.c1 * np.sign(y) * np.minimum(np.abs(y), self.cap) ** self.beta + self.offset

    def __call__(self, s, X):
        X = np.asarray(X, dtype=float)
        p = X[..., 0::2]
        y = to_physical(p, self.grid)
        return from_physical(self.pointwise(y), self.grid, self.spectrum.n_modes)

    def sup_norm(self):
        # discrete Parseval: sum c_n^2 <= grid L2 norm^2 <= sup|c|^2
        bound = abs(self.c1) * self.cap**self.beta + abs(self.offset)
        return bound / math.sqrt(self.spectrum.mu[0])

    def describe(self):
        return {"kind": self.name, "beta": self.beta, "cap": self.cap, "c1": self.c1, "offset": self.offset}


def torus_basis(wavevectors, points_per_dim):
    """Real orthonormal trigonometric basis on [0, 2 pi]^d sampled on a tensor grid.

    Lattice vectors whose first nonzero entry is positive get cos(k.xi), the
    others sin(|k|.xi) with the sign flipped; together they form an
    orthonormal system.  Returns (basis (n_modes, P), cell volume).
    """
    ks = np.atleast_2d(wavevectors)
    d = ks.shape[1]
    axis = 2 * np.pi * np.arange(points_per_dim) / points_per_dim
    grid = np.array(list(itertools.product(axis, repeat=d)))
    norm = math.sqrt(2.0 / (2 * np.pi) ** d)
    rows = []
    for k in ks:
        first = k[np.flatnonzero(k)[0]]
        phase = grid @ k
        rows.append(norm * (np.cos(phase) if first > 0 else np.sin(-phase)))
    return np.array(rows), (2 * np.pi / points_per_dim) ** d


class HeatNonlocal(Drift):
    """Rank-one drift ``((-Delta)^{gamma/2} g) * int h (|f| ^ R)^beta``.

    ``g`` is given by modal coefficients (default ``|k|^{-(gamma + d/2 + 0.6)}``)
    and ``h`` by its values on the quadrature grid (default constant
    ``(2 pi)^{-d}``, so the scalar factor is at most ``R^beta``).
    """

    name = "heat-nonlocal"

    def __init__(self, spectrum: HeatSpectrum, beta=0.75, cap=5.0, g=None, h=None, points_per_dim=32, scale=1.0):
        if spectrum.wavevectors is None:
            raise ValueError("HeatNonlocal needs a torus spectrum with wavevectors")
        self.spectrum = spectrum
        self.beta = beta
        self.cap = cap
        d = spectrum.d
        if g is None:
            g = scale * spectrum.alpha_k ** (-(spectrum.gamma + d / 2 + 0.6) / 2)
        self.g = np.asarray(g, dtype=float)
        self.basis, self.cell = torus_basis(spectrum.wavevectors, points_per_dim)
        P = self.basis.shape[1]
        self.h = np.full(P, (2 * np.pi) ** -d) if h is None else np.asarray(h, dtype=float)
        self.direction = spectrum.alpha_k ** (spectrum.gamma / 2) * self.g

    def scalar(self, X):
        f = np.asarray(X, dtype=float) @ self.basis
        return self.cell * (np.minimum(np.abs(f), self.cap) ** self.beta) @ self.h

    def __call__(self, s, X):
        return self.scalar(X)[..., None] * self.direction

    def sup_norm(self):
        return self.cap**self.beta * self.cell * float(np.abs(self.h).sum()) * float(np.linalg.norm(self.g))

    def describe(self):
        return {"kind": self.name, "beta": self.beta, "cap": self.cap, "g": self.g.tolist()}
