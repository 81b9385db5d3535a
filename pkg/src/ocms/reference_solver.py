"""
Independent normal-mode eigensolvers used as ground truth.

Two bottom models are supported:

* pressure release: second-order central differences give a symmetric
  tridiagonal eigenproblem whose eigenvalues are ``k_m**2``;
* fluid halfspace: the shooting solution is matched to a decaying
  exponential in the bottom and the resulting characteristic function is
  root-bracketed on a fine grid, then refined with a bracketing solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from .errors import NoPropagatingModes, RootBracketingFailed
from .shooting import ModeFunction, ModeSet, count_mode_number, mode_labels, normalize, shoot_many
from .waveguide import RHO_WATER, Environment, FluidHalfspace, PressureRelease, search_bounds


@dataclass(frozen=True, eq=False)
class OracleModeSet(ModeSet):
    bottom: object = None
    h: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def within(self, xi_min, xi_max=np.inf) -> "OracleModeSet":
        """Modes with ``xi_min <= k_m <= xi_max`` (the propagating band)."""
        keep = [m for m in self.modes if xi_min <= m.xi <= xi_max]
        if not keep:
            raise NoPropagatingModes("no oracle modes inside the requested band")
        return OracleModeSet(keep, self.env_fingerprint, self.bottom, self.h, dict(self.diagnostics))

    def gram(self) -> np.ndarray:
        P = self.matrix
        return P.T @ P * self.h


def _orient(psi):
    # match the shooting convention phi(h) > 0
    nz = np.flatnonzero(np.abs(psi) > 1e-300)
    if nz.size and psi[nz[0]] < 0:
        return -psi
    return psi


def solve_modes_dirichlet(env: Environment) -> OracleModeSet:
    """All modes with real wavenumber for a pressure-release top and bottom.

    Requires the water depth to fall on the grid (``H = L*h``); the unknowns
    are the interior samples z_1..z_{L-1} and psi(z_L) = 0.
    """
    h, L = env.depth_step_h, env.L
    if abs(L * h - env.water_depth_H) > 1e-9 * env.water_depth_H:
        raise ValueError("pressure-release oracle needs H to be a multiple of h")
    d = -2.0 / h ** 2 + env.k2[: L - 1]
    e = np.full(L - 2, 1.0 / h ** 2)
    vals, vecs = eigh_tridiagonal(d, e, select="v", select_range=(0.0, np.inf))
    if vals.size == 0:
        raise NoPropagatingModes("no eigenvalue with k_m^2 > 0")
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    modes = []
    for j, lam in enumerate(vals):
        psi = np.append(vecs[:, j] / np.sqrt(h), 0.0)
        psi = _orient(psi)
        modes.append(ModeFunction(float(np.sqrt(lam)), psi, count_mode_number(psi)))
    return OracleModeSet(modes, env.fingerprint(), env.bottom, h,
                         {"method": "tridiagonal", "n_modes": len(modes)})


def _bottom_state(env, xis):
    """phi(H) and phi'(H) from the local cell solution about z_L."""
    h, L = env.depth_step_h, env.L
    phi = shoot_many(env, xis)
    p_lm1 = phi[L - 2]
    p_l = phi[L - 1]
    t = env.water_depth_H - L * h
    q = env.k2[L - 1] - np.asarray(xis) ** 2
    kap = np.sqrt(np.abs(q))
    prop = q >= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        C_h = np.where(prop, np.cos(kap * h), np.cosh(kap * h))
        S_h = np.where(kap > 0, np.where(prop, np.sin(kap * h), np.sinh(kap * h)) / kap, h)
        C_t = np.where(prop, np.cos(kap * t), np.cosh(kap * t))
        S_t = np.where(kap > 0, np.where(prop, np.sin(kap * t), np.sinh(kap * t)) / kap, t)
        dC_t = np.where(prop, -kap * np.sin(kap * t), kap * np.sinh(kap * t))
        dS_t = np.where(prop, np.cos(kap * t), np.cosh(kap * t))
    B = (p_l * C_h - p_lm1) / S_h
    return p_l * C_t + B * S_t, p_l * dC_t + B * dS_t


def halfspace_characteristic(env: Environment, xis) -> np.ndarray:
    """``phi'(H) + (rho_w/rho_b) * gamma_b * phi(H)``; zero at the eigenvalues."""
    xis = np.atleast_1d(np.asarray(xis, dtype=float))
    bottom = env.bottom
    gamma = np.sqrt(np.maximum(xis ** 2 - (env.omega / bottom.c_b) ** 2, 0.0))
    phi_H, dphi_H = _bottom_state(env, xis)
    return dphi_H + (RHO_WATER / bottom.rho_b) * gamma * phi_H


def solve_modes_halfspace(env: Environment, n_bracket: int = 20000, xtol: float = 1e-13) -> OracleModeSet:
    """Trapped modes over a fluid halfspace, k_m in (omega/c_b, omega/min c)."""
    if not isinstance(env.bottom, FluidHalfspace):
        raise ValueError("halfspace solver needs a FluidHalfspace bottom")
    xi_min, xi_max = search_bounds(env)
    pad = 1e-12 * xi_max
    grid = np.linspace(xi_min + pad, xi_max - pad, n_bracket)
    F = halfspace_characteristic(env, grid)
    if not np.all(np.isfinite(F)):
        raise RootBracketingFailed("characteristic function not finite on the bracket grid")
    scale = np.abs(F).max()
    brackets = np.flatnonzero(np.sign(F[:-1]) * np.sign(F[1:]) < 0)
    roots = []
    for i in brackets:
        f = lambda x: halfspace_characteristic(env, [x])[0] / scale  # noqa: E731
        roots.append(brentq(f, grid[i], grid[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps))
    if not roots:
        raise NoPropagatingModes("no trapped mode between omega/c_b and omega/min(c)")
    roots = np.sort(np.array(roots))[::-1]
    psi = normalize(shoot_many(env, roots), env.depth_step_h)
    labels = mode_labels(env, roots, psi)
    modes = [ModeFunction(float(x), psi[:, j], int(labels[j])) for j, x in enumerate(roots)]
    labels = [m.mode_number for m in modes]
    if labels != list(range(1, len(modes) + 1)):
        raise RootBracketingFailed(f"mode numbering has gaps {labels}; refine n_bracket")
    return OracleModeSet(modes, env.fingerprint(), env.bottom, env.depth_step_h,
                         {"method": "halfspace-shooting", "n_modes": len(modes), "n_bracket": n_bracket})


def solve_modes(env: Environment) -> OracleModeSet:
    if isinstance(env.bottom, PressureRelease):
        return solve_modes_dirichlet(env)
    return solve_modes_halfspace(env)


def propagating_modes(env: Environment) -> OracleModeSet:
    """Oracle modes inside the wavenumber search band of ``env``."""
    xi_min, xi_max = search_bounds(env)
    return solve_modes(env).within(xi_min, xi_max)
