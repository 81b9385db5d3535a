"""
Range-independent waveguide and receiver-array data model.

The water column is described by a sound speed profile pre-sampled on the
uniform grid ``z_l = l*h`` (l = 1..L) with ``z_L <= H < z_{L+1}``. Density is
constant in the water column.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .errors import ConfigError, TiltOutOfRange

#: Water density used by the fluid-halfspace boundary condition (kg/m^3).
RHO_WATER = 1000.0


@dataclass(frozen=True)
class PressureRelease:
    """Pressure-release (phi = 0) bottom at z = H.

    ``xi_min_fraction`` sets the lower end of the wavenumber search band as a
    fraction of ``omega / min(c)``; modes below it are treated as not
    propagating.
    """

    xi_min_fraction: float = 0.90

    kind = "pressure_release"


@dataclass(frozen=True)
class FluidHalfspace:
    """Homogeneous fluid halfspace below z = H."""

    c_b: float
    rho_b: float

    kind = "fluid_halfspace"


Bottom = Union[PressureRelease, FluidHalfspace]


def grid_size(water_depth: float, h: float) -> int:
    """Number of grid points L with ``L*h <= H < (L+1)*h``."""
    return int(np.floor(water_depth / h + 1e-9))


@dataclass(frozen=True, eq=False)
class Environment:
    frequency_hz: float
    depth_step_h: float
    water_depth_H: float
    ssp: np.ndarray
    bottom: Bottom = field(default_factory=PressureRelease)

    def __post_init__(self):
        ssp = np.array(self.ssp, dtype=float)
        ssp.setflags(write=False)
        object.__setattr__(self, "ssp", ssp)
        if self.frequency_hz <= 0:
            raise ConfigError("frequency_hz must be positive")
        if self.depth_step_h <= 0 or self.water_depth_H <= 0:
            raise ConfigError("depth_step_h and water depth must be positive")
        L = grid_size(self.water_depth_H, self.depth_step_h)
        if L < 2:
            raise ConfigError("water column must hold at least two grid points")
        if ssp.shape != (L,):
            raise ConfigError(f"ssp must have {L} samples on the depth grid, got {ssp.shape}")
        if np.any(ssp <= 0) or not np.all(np.isfinite(ssp)):
            raise ConfigError("sound speeds must be finite and positive")
        if isinstance(self.bottom, FluidHalfspace):
            if self.bottom.c_b <= ssp.max():
                raise ConfigError("halfspace sound speed must exceed max water sound speed")
            if self.bottom.rho_b <= 0:
                raise ConfigError("halfspace density must be positive")
        elif isinstance(self.bottom, PressureRelease):
            if not 0 < self.bottom.xi_min_fraction < 1:
                raise ConfigError("xi_min_fraction must lie in (0, 1)")
        else:
            raise ConfigError(f"unknown bottom model {self.bottom!r}")

    @classmethod
    def from_profile(cls, frequency_hz, depth_step_h, water_depth, depths, speeds,
                     bottom=None):
        """Build an environment from an SSP tabulated at arbitrary depths.

        The table is linearly interpolated onto the grid, holding the end
        values constant outside the tabulated range.
        """
        depths = np.asarray(depths, dtype=float)
        speeds = np.asarray(speeds, dtype=float)
        order = np.argsort(depths)
        L = grid_size(water_depth, depth_step_h)
        z = np.arange(1, L + 1) * depth_step_h
        ssp = np.interp(z, depths[order], speeds[order])
        return cls(frequency_hz, depth_step_h, water_depth, ssp,
                   bottom if bottom is not None else PressureRelease())

    @property
    def L(self) -> int:
        return self.ssp.shape[0]

    @property
    def omega(self) -> float:
        return 2.0 * np.pi * self.frequency_hz

    @property
    def z(self) -> np.ndarray:
        return np.arange(1, self.L + 1) * self.depth_step_h

    @property
    def k2(self) -> np.ndarray:
        """Squared medium wavenumber ``(omega/c(z_l))**2`` on the grid."""
        return (self.omega / self.ssp) ** 2

    def fingerprint(self) -> str:
        h = hashlib.sha1()
        h.update(np.float64([self.frequency_hz, self.depth_step_h, self.water_depth_H]).tobytes())
        h.update(self.ssp.tobytes())
        h.update(repr(self.bottom).encode())
        return h.hexdigest()[:16]

    def with_ssp(self, ssp) -> "Environment":
        return replace(self, ssp=np.asarray(ssp, dtype=float))


def isovelocity(frequency_hz=500.0, c=1500.0, water_depth=50.0, h=0.1, bottom=None):
    L = grid_size(water_depth, h)
    return Environment(frequency_hz, h, water_depth, np.full(L, float(c)),
                       bottom if bottom is not None else PressureRelease())


def thermocline(frequency_hz=500.0, water_depth=50.0, h=0.1, c_top=1530.0, c_bottom=1500.0,
                z_top=15.0, z_bottom=25.0, bottom=None):
    """Two-layer profile with a linear thermocline between ``z_top`` and ``z_bottom``."""
    depths = [0.0, z_top, z_bottom, water_depth]
    speeds = [c_top, c_top, c_bottom, c_bottom]
    return Environment.from_profile(frequency_hz, h, water_depth, depths, speeds, bottom)


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    nominal_depths: np.ndarray
    nominal_range: float
    tilt_deg: float = 0.0

    def __post_init__(self):
        z = np.array(self.nominal_depths, dtype=float)
        z.setflags(write=False)
        object.__setattr__(self, "nominal_depths", z)
        if z.ndim != 1 or z.size < 2:
            raise ConfigError("array needs at least two elements")
        if z[0] <= 0 or np.any(np.diff(z) <= 0):
            raise ConfigError("element depths must be positive and strictly increasing")
        if self.nominal_range <= 0:
            raise ConfigError("nominal range must be positive")

    @property
    def N(self) -> int:
        return self.nominal_depths.size

    @classmethod
    def uniform(cls, z_first, z_last, n_elements, nominal_range, tilt_deg=0.0):
        return cls(np.linspace(z_first, z_last, n_elements), nominal_range, tilt_deg)


@dataclass(frozen=True, eq=False)
class ElementPositions:
    depths: np.ndarray
    ranges: np.ndarray


def apply_tilt(geometry: ArrayGeometry, H: float) -> ElementPositions:
    """Actual element positions of an array tilted by ``geometry.tilt_deg``.

    The array pivots about its anchor at the bottom, so depths move down
    towards H and ranges grow with height above the bottom.
    """
    theta_deg = geometry.tilt_deg
    if not 0.0 <= theta_deg < 90.0:
        raise TiltOutOfRange(f"tilt {theta_deg} deg outside [0, 90)")
    theta = np.deg2rad(theta_deg)
    z = geometry.nominal_depths
    depths = z * np.cos(theta) + H * (1.0 - np.cos(theta))
    ranges = geometry.nominal_range + (H - z) * np.sin(theta)
    return ElementPositions(depths, ranges)


def perturb_ssp(env: Environment, alpha: float, seed: int, mode: str = "per_point") -> Environment:
    """Add uniform sound-speed uncertainty ``eta * alpha`` with eta ~ U[-1, 1].

    ``mode="per_point"`` draws eta independently at every grid depth;
    ``mode="per_profile"`` draws a single eta for the whole profile.
    """
    if alpha < 0:
        raise ConfigError("alpha must be non-negative")
    rng = np.random.default_rng(seed)
    if mode == "per_point":
        eta = rng.uniform(-1.0, 1.0, size=env.L)
    elif mode == "per_profile":
        eta = np.full(env.L, rng.uniform(-1.0, 1.0))
    else:
        raise ConfigError(f"unknown ssp perturbation mode {mode!r}")
    return env.with_ssp(env.ssp + eta * alpha)


def search_bounds(env: Environment) -> tuple[float, float]:
    xi_max = env.omega / env.ssp.min()
    if isinstance(env.bottom, FluidHalfspace):
        xi_min = env.omega / env.bottom.c_b
    else:
        xi_min = env.bottom.xi_min_fraction * xi_max
    return xi_min, xi_max
