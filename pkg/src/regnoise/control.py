"""Explicit null controls for the damped wave modes.

A control ``v`` with V'-coefficients ``v_n(s)`` enters mode ``n`` as
``(0, v_n(s))`` in modal coordinates, and the target state is
``Ga = (0, a_n)`` with ``a_n`` the V'-coefficients of ``a``.  The control is
``v = v0 + v1'`` with a polynomial bump ``phi_T`` vanishing to second order
at both ends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec
from scipy.special import roots_legendre

from .smoothing import RateFit, fit_loglog, gamma_apply
from .spectral import WaveSpectrum, semigroup_blocks


def bump(t, T):
    """Normalised bump ``30 t^2 (T-t)^2 / T^5``; integrates to one on [0, T]."""
    t = np.asarray(t, dtype=float)
    return 30.0 * t**2 * (T - t) ** 2 / T**5


def bump_prime(t, T):
    t = np.asarray(t, dtype=float)
    return 60.0 * t * (T - t) * (T - 2.0 * t) / T**5


def u_to_vprime(spectrum: WaveSpectrum, a_u):
    """V'-normalised coefficients of a vector given by its U-coefficients."""
    return np.asarray(a_u, dtype=float) * spectrum.mu ** -0.5


@dataclass
class ControlProfile:
    spectrum: WaveSpectrum
    a: np.ndarray
    T: float

    def _parts(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        lp, lm = self.spectrum.eigenvalues()
        ep, em = np.exp(lp * t), np.exp(lm * t)
        den = lm - lp
        c0 = -(lm * ep - lp * em) / den
        c1 = (ep - em) / den
        c1p = (lp * ep - lm * em) / den
        return c0.real, c1.real, c1p.real

    def v0(self, t):
        c0, _, _ = self._parts(t)
        return c0 * self.a * bump(t, self.T)[..., None]

    def v1(self, t):
        _, c1, _ = self._parts(t)
        return c1 * self.a * bump(t, self.T)[..., None]

    def v1_prime(self, t):
        """Analytic derivative of v1 by the product rule."""
        _, c1, c1p = self._parts(t)
        phi = bump(t, self.T)[..., None]
        dphi = bump_prime(t, self.T)[..., None]
        return (c1p * phi + c1 * dphi) * self.a

    def control(self, t):
        return self.v0(t) + self.v1_prime(t)

    def table(self, points=201):
        t = np.linspace(0.0, self.T, points)
        return t, self.v0(t), self.v1(t), self.v1_prime(t)


def synthesize_control(spectrum: WaveSpectrum, a, T: float) -> ControlProfile:
    a = np.asarray(a, dtype=float)
    if a.shape != (spectrum.n_modes,):
        raise ValueError("a needs one V'-coefficient per mode")
    if T <= 0:
        raise ValueError("T must be positive")
    return ControlProfile(spectrum, a, float(T))


def _initial_state(spectrum, a):
    k = np.zeros((spectrum.n_modes, 2))
    k[:, 1] = a
    return k


def _integrand(profile, s, arrangement="v1prime"):
    """``e^{(T-s)M} (0, v(s))`` per mode, shape s.shape + (N, 2)."""
    spec = profile.spectrum
    e = semigroup_blocks(spec, profile.T - np.asarray(s))
    if arrangement == "v1prime":
        w = np.zeros(np.shape(s) + (spec.n_modes, 2))
        w[..., 1] = profile.control(s)
    else:
        # G v0 + M G v1: the integrated-by-parts form
        v0, v1 = profile.v0(s), profile.v1(s)
        mats = spec.generators()
        w = np.zeros(np.shape(s) + (spec.n_modes, 2))
        w[..., 1] = v0
        w = w + mats[:, :, 1] * v1[..., None]
    return np.einsum("...nij,...nj->...ni", e, w)


def control_integral(profile, panels: int | None = None, nodes: int = 8, arrangement="v1prime",
                     epsabs: float = 1e-10, max_panels: int = 2**14):
    """``int_0^T e^{(T-s)M} (0, v(s)) ds`` per mode.

    ``panels=None`` uses adaptive Gauss-Kronrod (``quad_vec``) with the given
    absolute tolerance and panel cap; otherwise a composite Gauss-Legendre
    rule with ``panels`` equal panels of ``nodes`` points each.
    """
    spec = profile.spectrum
    if panels is None:
        f = lambda s: _integrand(profile, s, arrangement).ravel()
        val, err, info = quad_vec(f, 0.0, profile.T, epsabs=epsabs, epsrel=0.0, limit=max_panels,
                                  norm="max", full_output=True)
        if not info.success:
            raise RuntimeError(
                f"quadrature did not converge: error estimate {err:.3e} after {info.intervals.shape[0]} panels"
            )
        return val.reshape(spec.n_modes, 2)
    x, w = roots_legendre(nodes)
    edges = np.linspace(0.0, profile.T, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    s = (mid[:, None] + half[:, None] * x).ravel()
    ws = (half[:, None] * w).ravel()
    return np.einsum("k,kni->ni", ws, _integrand(profile, s, arrangement))


def terminal_state(spectrum, a, T, panels=None, arrangement="v1prime"):
    profile = synthesize_control(spectrum, a, T)
    free = np.einsum("nij,nj->ni", semigroup_blocks(spectrum, T), _initial_state(spectrum, a))
    return free + control_integral(profile, panels, arrangement=arrangement)


def steer_check(spectrum, a, T, order: int | None = None) -> float:
    """``|y(T)|_H`` for the synthesised control (ideally zero).

    ``order`` is the number of composite Gauss-Legendre panels; ``None``
    selects adaptive quadrature.
    """
    return float(np.linalg.norm(terminal_state(spectrum, a, T, order)))


def control_energy(profile: ControlProfile, norm: str = "V'", panels: int = 512) -> float:
    """``int_0^T ||v(s)||^2 ds`` in the V' norm (default) or the U norm."""
    x, w = roots_legendre(8)
    edges = np.linspace(0.0, profile.T, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    s = (mid[:, None] + half[:, None] * x).ravel()
    ws = (half[:, None] * w).ravel()
    v = profile.control(s)
    if norm == "U":
        v = v * np.sqrt(profile.spectrum.mu)
    elif norm != "V'":
        raise ValueError("norm must be \"V'\" or 'U'")
    return float(np.einsum("k,kn->", ws, v * v))


def minimal_energy(spectrum, t, k, norm: str = "U") -> float:
    """Minimal control energy ``|Gamma(t) k|^2`` steering ``k`` to zero in time t.

    ``norm='U'`` measures controls in the noise space U (the Gramian is the
    covariance Q_t of the stochastic convolution).  ``norm="V'"`` measures
    them in V', where each mode receives the input (0, 1).
    """
    if norm == "V'":
        spectrum = WaveSpectrum(spectrum.mu, spectrum.alpha, spectrum.rho, spectrum.family, "energy")
    elif norm != "U":
        raise ValueError("norm must be \"V'\" or 'U'")
    val, _ = gamma_apply(spectrum, t, k)
    return val**2


def energy_rate_fit(spectrum, a, T_grid, norm: str = "V'") -> tuple[RateFit, dict]:
    T_grid = np.asarray(T_grid, dtype=float)
    energy = np.array([control_energy(synthesize_control(spectrum, a, T), norm) for T in T_grid])
    return fit_loglog(T_grid, energy), {"T": T_grid, "energy": energy}
