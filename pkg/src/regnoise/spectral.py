"""Mode spectra, per-mode semigroup blocks and operator approximants.

Wave states live in H-orthonormal modal coordinates: mode ``n`` carries the
pair ``(p_n, q_n)`` where ``p_n`` is the U-coefficient of the displacement and
``q_n`` is ``mu_n**-0.5`` times the U-coefficient of the velocity.  In these
coordinates the generator block is

    M_n = [[0, sqrt(mu_n)], [-sqrt(mu_n), -rho * mu_n**alpha]]

and the noise enters mode ``n`` along ``g_n = (0, mu_n**-0.5)``.  Heat states
are scalars per lattice mode with generator ``-alpha_k`` and noise gain
``alpha_k**(-gamma/2)``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.linalg

RHO_TOL = 1e-8
DEGENERATE_TOL = 1e-6


@dataclass(frozen=True)
class ModePair:
    lambda_plus: complex
    lambda_minus: complex


@dataclass(frozen=True, eq=False)
class WaveSpectrum:
    """Damped wave spectrum: eigenvalues ``mu`` of the elastic operator.

    Construction rejects ``rho**2 == 4 mu_n**(1 - 2 alpha)`` within a relative
    tolerance of 1e-8, where the two mode eigenvalues would coincide.
    """

    mu: np.ndarray
    alpha: float = 0.0
    rho: float = 1.0
    family: str = "explicit"
    frame: str = "mild"
    state_dim: int = field(default=2, init=False)

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).ravel()
        if mu.size == 0:
            raise ValueError("spectrum needs at least one mode")
        if np.any(mu <= 0) or np.any(np.diff(mu) <= 0):
            raise ValueError("mu must be positive and strictly increasing")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha={self.alpha} outside [0, 1)")
        if self.frame not in ("mild", "energy"):
            raise ValueError("frame must be 'mild' or 'energy'")
        if self.rho <= 0:
            raise ValueError(f"rho={self.rho} must be positive")
        crit = 4.0 * mu ** (1.0 - 2.0 * self.alpha)
        rel = np.abs(self.rho**2 - crit) / crit
        bad = np.flatnonzero(rel < RHO_TOL)
        if bad.size:
            raise ValueError(
                f"rho^2 = 4 mu_n^(1-2 alpha) at mode n={bad[0] + 1}: repeated eigenvalue"
            )
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    @classmethod
    def dirichlet(cls, n_modes: int, alpha: float = 0.0, rho: float = 1.0, frame: str = "mild"):
        """Dirichlet Laplacian on (0, 1): ``mu_n = pi^2 n^2``."""
        n = np.arange(1, n_modes + 1)
        return cls(np.pi**2 * n**2, alpha, rho, family="dirichlet-1d", frame=frame)

    @property
    def n_modes(self) -> int:
        return self.mu.size

    def truncate(self, n_modes: int) -> "WaveSpectrum":
        return WaveSpectrum(self.mu[:n_modes], self.alpha, self.rho, self.family, self.frame)

    @property
    def damping(self) -> np.ndarray:
        return self.rho * self.mu**self.alpha

    def eigenvalues(self):
        """Arrays ``(lambda_plus, lambda_minus)`` over all modes (complex)."""
        b = self.damping
        disc = (b * b - 4.0 * self.mu).astype(complex)
        root = np.sqrt(disc)
        lam_m = (-b - root) / 2.0
        # small real root from the product to avoid cancellation
        lam_p = np.where(disc.real > 0, self.mu / lam_m, (-b + root) / 2.0)
        return lam_p, lam_m

    def discriminant(self) -> np.ndarray:
        return self.damping**2 - 4.0 * self.mu

    def generators(self) -> np.ndarray:
        s = np.sqrt(self.mu)
        out = np.zeros((self.n_modes, 2, 2))
        out[:, 0, 1] = s
        out[:, 1, 0] = -s
        out[:, 1, 1] = -self.damping
        return out

    def noise_vectors(self) -> np.ndarray:
        g = np.zeros((self.n_modes, 2))
        g[:, 1] = self.noise_gain()
        return g

    def noise_gain(self) -> np.ndarray:
        """Scalar gain turning a U-coefficient into the modal noise entry.

        ``mild`` is the state space U x V' used throughout.  ``energy``
        measures the velocity in U instead (space V x U), where every mode
        receives unit noise; it exists for the rate cross-check only, since
        the stochastic convolution is not trace class there.
        """
        if self.frame == "energy":
            return np.ones(self.n_modes)
        return self.mu**-0.5

    def trace_partial_sums(self) -> np.ndarray:
        return np.cumsum(1.0 / self.mu)


@dataclass(frozen=True, eq=False)
class HeatSpectrum:
    """Periodic Laplacian on the torus of side 2 pi, zero mode excluded.

    ``alpha_k = |k|^2`` and the noise is coloured by ``(-Delta)^(-gamma/2)``.
    ``wavevectors`` records the lattice vector behind each real mode.
    """

    alpha_k: np.ndarray
    gamma: float = 0.0
    d: int = 1
    wavevectors: np.ndarray | None = None
    family: str = "explicit"
    state_dim: int = field(default=1, init=False)

    def __post_init__(self):
        a = np.asarray(self.alpha_k, dtype=float).ravel()
        if a.size == 0:
            raise ValueError("spectrum needs at least one mode")
        if np.any(a <= 0) or np.any(np.diff(a) < 0):
            raise ValueError("alpha_k must be positive and non-decreasing")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.d not in (1, 2, 3):
            raise ValueError("dimension d must be 1, 2 or 3")
        a.setflags(write=False)
        object.__setattr__(self, "alpha_k", a)

    @classmethod
    def torus(cls, n_modes: int, gamma: float = 0.0, d: int = 1):
        ks = lattice_modes(d, n_modes)
        alpha = np.sum(ks**2, axis=1).astype(float)
        return cls(alpha, gamma, d, ks, family="torus-d")

    @property
    def n_modes(self) -> int:
        return self.alpha_k.size

    def truncate(self, n_modes: int) -> "HeatSpectrum":
        ks = None if self.wavevectors is None else self.wavevectors[:n_modes]
        return HeatSpectrum(self.alpha_k[:n_modes], self.gamma, self.d, ks, self.family)

    def generators(self) -> np.ndarray:
        return -self.alpha_k[:, None, None].copy()

    def noise_vectors(self) -> np.ndarray:
        return self.noise_gain()[:, None]

    def noise_gain(self) -> np.ndarray:
        return self.alpha_k ** (-self.gamma / 2.0)


def lattice_modes(d: int, n_modes: int) -> np.ndarray:
    """First ``n_modes`` nonzero vectors of Z^d, ordered by |k|^2 then lexicographically."""
    radius = 1
    while True:
        rng = range(-radius, radius + 1)
        ks = [k for k in itertools.product(rng, repeat=d) if any(k)]
        ks.sort(key=lambda k: (sum(c * c for c in k), k))
        # every vector with |k|^2 <= radius^2 is inside the cube
        inside = [k for k in ks if sum(c * c for c in k) <= radius * radius]
        if len(inside) >= n_modes:
            return np.array(inside[:n_modes], dtype=int)
        radius *= 2


def eigenpair(spectrum: WaveSpectrum, n: int) -> ModePair:
    """Eigenvalues of the wave block of mode ``n`` (0-based)."""
    if not 0 <= n < spectrum.n_modes:
        raise IndexError(f"mode {n} outside 0..{spectrum.n_modes - 1}")
    lp, lm = spectrum.eigenvalues()
    return ModePair(complex(lp[n]), complex(lm[n]))


def _sylvester_exp(mats, lam_p, lam_m, t):
    """exp(t*M) for 2x2 blocks with distinct eigenvalues ``lam_p``, ``lam_m``.

    ``mats`` has shape (N, 2, 2), the eigenvalue arrays shape (N,), ``t`` any
    shape; the result has shape t.shape + (N, 2, 2).
    """
    t = np.asarray(t, dtype=float)[..., None]
    ep = np.exp(lam_p * t)[..., None, None]
    em = np.exp(lam_m * t)[..., None, None]
    eye = np.eye(2)
    mp = mats - lam_m[:, None, None] * eye
    mm = mats - lam_p[:, None, None] * eye
    out = (ep * mp - em * mm) / (lam_p - lam_m)[:, None, None]
    return out.real


def _block_exp(mats, lam_p, lam_m, disc_rel, t):
    t = np.asarray(t, dtype=float)
    out = _sylvester_exp(mats, lam_p, lam_m, t)
    near = np.flatnonzero(disc_rel < DEGENERATE_TOL)
    if near.size:
        tt = t[..., None, None, None]
        out[..., near, :, :] = scipy.linalg.expm(tt * mats[near])
    return out


def semigroup_blocks(spectrum, t, modes=None) -> np.ndarray:
    """All blocks of ``exp(t A)``; shape ``t.shape + (N, s, s)``."""
    spec = spectrum if modes is None else spectrum.truncate(modes)
    t = np.asarray(t, dtype=float)
    if isinstance(spec, HeatSpectrum):
        return np.exp(-np.multiply.outer(t, spec.alpha_k))[..., None, None]
    lam_p, lam_m = spec.eigenvalues()
    disc_rel = np.abs(spec.discriminant()) / spec.damping**2
    return _block_exp(spec.generators(), lam_p, lam_m, disc_rel, t)


def semigroup_block(spectrum, n: int, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("semigroup is only defined for t >= 0")
    return semigroup_blocks(spectrum, t)[n]


class Approximant:
    """Group approximating the semigroup: exact, Yosida(m) or projection(keep).

    ``exact`` is only a semigroup, so negative times are refused there.
    """

    def __init__(self, spectrum, kind: str = "exact", index: float | int | None = None):
        if kind not in ("exact", "yosida", "projection"):
            raise ValueError(f"unknown approximant kind {kind!r}")
        self.spectrum = spectrum
        self.kind = kind
        self.index = index
        if kind == "yosida":
            if index is None or index < 1:
                raise ValueError("Yosida index must be >= 1")
            self._yosida_setup(float(index))
        if kind == "projection":
            if index is None or not 0 <= index:
                raise ValueError("projection needs keep >= 0")
            self.keep = min(int(index), spectrum.n_modes)

    def _yosida_setup(self, m):
        spec = self.spectrum
        if isinstance(spec, HeatSpectrum):
            self._rates = -m * spec.alpha_k / (m + spec.alpha_k)
            return
        mats = spec.generators()
        shifted = m * np.eye(2) - mats
        det = np.linalg.det(shifted)
        assert np.all(np.abs(det) > 0), "m I - M singular"
        ym = m * np.linalg.solve(shifted, mats)
        lam_p, lam_m = spec.eigenvalues()
        nu_p = m * lam_p / (m - lam_p)
        nu_m = m * lam_m / (m - lam_m)
        scale = np.maximum(np.abs(nu_p) + np.abs(nu_m), 1e-300)
        self._ymats = ym
        self._nu = (nu_p, nu_m, np.abs(nu_p - nu_m) ** 2 / scale**2)

    def generators(self) -> np.ndarray:
        spec = self.spectrum
        if self.kind == "exact":
            return spec.generators()
        if self.kind == "yosida":
            if isinstance(spec, HeatSpectrum):
                return self._rates[:, None, None].copy()
            return self._ymats.copy()
        out = spec.generators()
        out[self.keep:] = 0.0
        return out

    def expm(self, t) -> np.ndarray:
        """Blocks of ``exp(t A_n)``, shape ``t.shape + (N, s, s)``."""
        t = np.asarray(t, dtype=float)
        spec = self.spectrum
        if self.kind == "exact":
            if np.any(t < 0):
                raise ValueError("exact semigroup is not a group; use an approximant")
            return semigroup_blocks(spec, t)
        if self.kind == "yosida":
            if isinstance(spec, HeatSpectrum):
                return np.exp(np.multiply.outer(t, self._rates))[..., None, None]
            nu_p, nu_m, disc_rel = self._nu
            return _block_exp(self._ymats, nu_p, nu_m, disc_rel, t)
        s = spec.state_dim
        out = np.broadcast_to(np.eye(s), t.shape + (spec.n_modes, s, s)).copy()
        if self.keep:
            kept = spec.truncate(self.keep)
            out[..., : self.keep, :, :] = _group_blocks(kept, t)
        return out

    def describe(self) -> str:
        if self.kind == "exact":
            return "exact"
        return f"{self.kind}({self.index})"


def _group_blocks(spectrum, t):
    """Exponential of ``t M`` for any real t (finite-dimensional blocks)."""
    t = np.asarray(t, dtype=float)
    if isinstance(spectrum, HeatSpectrum):
        return np.exp(-np.multiply.outer(t, spectrum.alpha_k))[..., None, None]
    lam_p, lam_m = spectrum.eigenvalues()
    disc_rel = np.abs(spectrum.discriminant()) / spectrum.damping**2
    return _block_exp(spectrum.generators(), lam_p, lam_m, disc_rel, t)


def yosida_block(spectrum, n: int, m: float, t: float) -> np.ndarray:
    return Approximant(spectrum, "yosida", m).expm(t)[n]


def projection_generator(spectrum, keep: int) -> Approximant:
    if keep > spectrum.n_modes:
        raise ValueError(f"keep={keep} exceeds n_modes={spectrum.n_modes}")
    return Approximant(spectrum, "projection", keep)


def modal_norm(state) -> float:
    return float(np.sqrt(np.sum(np.square(state))))


def _check_grid(grid, n_modes):
    grid = np.asarray(grid, dtype=float)
    m = grid.size
    if m < n_modes:
        raise ValueError(f"grid of {m} points cannot resolve {n_modes} modes (aliasing)")
    expected = np.arange(1, m + 1) / (m + 1)
    if not np.allclose(grid, expected, rtol=0, atol=1e-12):
        raise ValueError("grid must be the uniform interior grid j/(m+1), j=1..m")
    return m


def to_physical(coeffs, grid) -> np.ndarray:
    """Values of ``sum_n c_n sqrt(2) sin(n pi xi)`` on the interior grid.

    ``coeffs`` may carry leading batch axes; the last axis is the mode index.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    m = _check_grid(grid, coeffs.shape[-1])
    pad = np.zeros(coeffs.shape[:-1] + (m,))
    pad[..., : coeffs.shape[-1]] = coeffs
    return scipy.fft.dst(pad, type=1, axis=-1) / math.sqrt(2.0)


def from_physical(values, grid, n_modes: int) -> np.ndarray:
    """Inverse of :func:`to_physical` truncated to ``n_modes`` coefficients."""
    values = np.asarray(values, dtype=float)
    m = _check_grid(grid, n_modes)
    if values.shape[-1] != m:
        raise ValueError("values do not match the grid")
    coeffs = scipy.fft.dst(values, type=1, axis=-1) * math.sqrt(2.0) / (2.0 * (m + 1))
    return coeffs[..., :n_modes]


def interior_grid(m: int) -> np.ndarray:
    return np.arange(1, m + 1) / (m + 1)


def spectrum_from_config(section: dict):
    """Build a spectrum from a TOML ``[spectrum]`` table."""
    allowed = {"family", "alpha", "rho", "gamma", "d", "n_modes", "eigenvalues"}
    unknown = set(section) - allowed
    if unknown:
        raise KeyError(f"unknown key(s) in [spectrum]: {sorted(unknown)}")
    family = section.get("family", "dirichlet-1d")
    n_modes = int(section.get("n_modes", 32))
    if family == "dirichlet-1d":
        return WaveSpectrum.dirichlet(n_modes, section.get("alpha", 0.0), section.get("rho", 1.0))
    if family == "torus-d":
        return HeatSpectrum.torus(n_modes, section.get("gamma", 0.0), int(section.get("d", 1)))
    if family == "explicit":
        eig = section.get("eigenvalues")
        if eig is None:
            raise KeyError("family 'explicit' needs an 'eigenvalues' list")
        if "gamma" in section:
            return HeatSpectrum(np.array(eig), section["gamma"], int(section.get("d", 1)))
        return WaveSpectrum(np.array(eig), section.get("alpha", 0.0), section.get("rho", 1.0))
    raise ValueError(f"unknown spectrum family {family!r}")


def warn_once(message: str):
    warnings.warn(message, RuntimeWarning, stacklevel=3)
