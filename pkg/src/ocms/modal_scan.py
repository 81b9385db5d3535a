"""
Orthogonality scan: build the candidate mode set Phi(z, xi_1).

Starting from a trial first-mode wavenumber ``xi_1`` the correlation
``c(xi) = |<psi(xi_1), psi(xi)>|`` is evaluated on the band grid below
``xi_1``; strict local minima below ``tau`` are taken as the wavenumbers of
the other modes. The set is returned ordered by decreasing wavenumber.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NoMinimaFound
from .shooting import ModeSet, mode_set_from_xis, normalize, shoot_many, shoot_raw
from .waveguide import Environment, search_bounds


@dataclass(frozen=True)
class ScanConfig:
    xi_min: float
    xi_max: float
    delta_xi: float = 1e-4
    ortho_threshold_tau: float = 0.2
    max_modes: int = 64
    refine_minima: bool = True

    def __post_init__(self):
        if not self.xi_min < self.xi_max:
            raise ConfigError("xi_min must be below xi_max")
        if not 0 < self.delta_xi < self.xi_max - self.xi_min:
            raise ConfigError("delta_xi must be positive and smaller than the band")
        if not 0 < self.ortho_threshold_tau < 1:
            raise ConfigError("tau must lie in (0, 1)")
        if self.max_modes < 1:
            raise ConfigError("max_modes must be positive")

    @classmethod
    def for_env(cls, env: Environment, **kwargs) -> "ScanConfig":
        xi_min, xi_max = search_bounds(env)
        return cls(xi_min, xi_max, **kwargs)

    def grid(self) -> np.ndarray:
        n = int(np.floor((self.xi_max - self.xi_min) / self.delta_xi + 1e-9)) + 1
        return self.xi_min + np.arange(n) * self.delta_xi


@dataclass(frozen=True, eq=False)
class CorrelationCurve:
    xi_grid: np.ndarray
    c_values: np.ndarray


def _grid_index(grid, xi, delta):
    """Index of ``xi`` if it sits on the grid, else None."""
    j = int(round((xi - grid[0]) / delta))
    if 0 <= j < grid.size and abs(grid[j] - xi) <= 1e-9 * delta:
        return j
    return None


def scan_minima(c_signed, grid, n_below, delta, tau, max_modes, refine=True):
    """Wavenumbers of orthogonality minima below the anchor.

    ``c_signed[:n_below]`` are correlations with the anchor on ``grid[:n_below]``,
    all strictly below it; the anchor itself (c = 1) closes the sequence on
    top. Returns at most ``max_modes - 1`` wavenumbers in decreasing order.
    """
    if n_below < 2:
        return np.empty(0)
    c = np.empty(n_below + 1)
    c[:n_below] = np.abs(c_signed[:n_below])
    c[n_below] = 1.0
    mid = c[1:-1]
    is_min = (mid < c[:-2]) & (mid < c[2:]) & (mid < tau)
    j = np.flatnonzero(is_min)[::-1] + 1
    j = j[: max(max_modes - 1, 0)]
    xs = grid[j].astype(float)
    if refine and j.size:
        # parabola through c^2; exact when the correlation crosses zero linearly
        inner = j + 1 < n_below
        jj = j[inner]
        y0, y1, y2 = c[jj - 1] ** 2, c[jj] ** 2, c[jj + 1] ** 2
        den = y0 - 2.0 * y1 + y2
        with np.errstate(divide="ignore", invalid="ignore"):
            off = np.where(den > 0, 0.5 * (y0 - y2) / den, 0.0)
        xs[inner] = grid[jj] + np.clip(off, -0.5, 0.5) * delta
    return xs


def correlation_curve(env: Environment, xi_ref: float, config: ScanConfig) -> CorrelationCurve:
    if not config.xi_min <= xi_ref <= config.xi_max:
        raise ConfigError("xi_ref outside [xi_min, xi_max]")
    grid = config.grid()
    h = env.depth_step_h
    ref = normalize(shoot_raw(env, xi_ref), h)
    psi = normalize(shoot_many(env, grid), h)
    return CorrelationCurve(grid, np.abs(ref @ psi) * h)


class ScanGrid:
    """Normalized shooting functions on the band grid of one environment.

    Scanning from many anchors (every outer grid point, or a continuous
    refinement of one) reuses these columns instead of re-shooting them.
    """

    def __init__(self, env: Environment, config: ScanConfig):
        self.env = env
        self.config = config
        self.grid = config.grid()
        self.h = env.depth_step_h
        self.psi = np.asfortranarray(normalize(shoot_many(env, self.grid), self.h))
        self._gram = None

    @property
    def gram(self) -> np.ndarray:
        """Signed correlations between all band-grid functions."""
        if self._gram is None:
            self._gram = self.psi.T @ self.psi * self.h
        return self._gram

    def n_below(self, xi_1: float) -> int:
        on = _grid_index(self.grid, xi_1, self.config.delta_xi)
        return on if on is not None else int(np.searchsorted(self.grid, xi_1))

    def minima_from(self, c_signed, n_below: int) -> np.ndarray:
        cfg = self.config
        return scan_minima(c_signed, self.grid, n_below, cfg.delta_xi, cfg.ortho_threshold_tau,
                           cfg.max_modes, cfg.refine_minima)

    def wavenumbers(self, xi_1: float) -> np.ndarray:
        """[xi_1, minima...]; only xi_1 when no minimum is found."""
        cfg = self.config
        if not cfg.xi_min <= xi_1 <= cfg.xi_max + 1e-12:
            raise ConfigError("xi_1 outside [xi_min, xi_max]")
        nb = self.n_below(xi_1)
        if nb == 0:
            return np.array([xi_1])
        on = _grid_index(self.grid, xi_1, cfg.delta_xi)
        if on is not None:
            c = self.psi[:, on] @ self.psi[:, :nb] * self.h
        else:
            ref = normalize(shoot_raw(self.env, xi_1), self.h)
            c = ref @ self.psi[:, :nb] * self.h
        return np.concatenate([[xi_1], self.minima_from(c, nb)])

    def cell_wavenumbers(self, j: int) -> np.ndarray:
        """Wavenumbers of the set anchored at grid point ``j`` (uses the Gram matrix)."""
        return np.concatenate([[self.grid[j]], self.minima_from(self.gram[j, :j], j)])


def mode_set_wavenumbers(env: Environment, xi_1: float, config: ScanConfig) -> np.ndarray:
    """Wavenumbers of Phi(z, xi_1) without building the mode functions."""
    if not config.xi_min <= xi_1 <= config.xi_max + 1e-12:
        raise ConfigError("xi_1 outside [xi_min, xi_max]")
    grid = config.grid()
    on = _grid_index(grid, xi_1, config.delta_xi)
    n_below = on if on is not None else int(np.searchsorted(grid, xi_1))
    h = env.depth_step_h
    ref = normalize(shoot_raw(env, xi_1), h)
    below = grid[:n_below]
    c = ref @ normalize(shoot_many(env, below), h) * h if n_below else np.empty(0)
    xs = scan_minima(c, grid, n_below, config.delta_xi, config.ortho_threshold_tau,
                     config.max_modes, config.refine_minima)
    if xs.size == 0:
        raise NoMinimaFound(f"no orthogonality minimum below xi_1={xi_1:.7f}; "
                            "raise tau or refine delta_xi")
    return np.concatenate([[xi_1], xs])


def build_mode_set(env: Environment, xi_1: float, config: ScanConfig) -> ModeSet:
    """Candidate mode set Phi(z, xi_1), ordered by decreasing wavenumber."""
    return mode_set_from_xis(env, mode_set_wavenumbers(env, xi_1, config))


def mode_number_diagnostic(modes: ModeSet) -> list:
    """Positions where mode numbers fail to increase by one from 1."""
    return [i for i, m in enumerate(modes.mode_numbers) if m != i + 1]
