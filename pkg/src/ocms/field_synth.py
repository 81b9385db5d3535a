"""
Single-frequency modal field on a vertical line array.

The pressure at element n is a finite sum of modes

    p_n = sum_m a_m(r_n) psi_m(z_n),
    a_m(r) = (i/4) S psi_m(z_s) H0(k_m r),

with the Hankel function replaced by its far-field form
``sqrt(2/(pi k r)) exp(i(k r - pi/4))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, RangeTooShort
from .shooting import ModeSet, interpolation_weights, sample_at
from .waveguide import ArrayGeometry, ElementPositions, Environment, apply_tilt

#: Smallest k*r accepted by the asymptotic Hankel form.
MIN_KR = 10.0


@dataclass(frozen=True)
class SourceSpec:
    depth_z_s: float
    range_r: float
    spectrum_S: complex = 1.0 + 0.0j

    def __post_init__(self):
        if self.depth_z_s <= 0:
            raise ConfigError("source depth must be positive")
        if self.range_r <= 0:
            raise ConfigError("source range must be positive")


@dataclass(frozen=True, eq=False)
class Snapshot:
    """Complex pressures on the array plus provenance.

    ``nominal_depths`` are the depths the array reports; with tilt they
    differ from ``element_positions.depths``, which are the true ones.
    """

    pressures: np.ndarray
    element_positions: ElementPositions
    frequency_hz: float
    noise_epsilon: float = 0.0
    seed: Optional[int] = None
    snr_db: Optional[float] = None
    nominal_depths: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        p = np.array(self.pressures, dtype=complex)
        p.setflags(write=False)
        object.__setattr__(self, "pressures", p)
        if p.ndim != 1 or p.size != np.asarray(self.element_positions.depths).size:
            raise ConfigError("pressure vector length must match the element count")
        if not self.noise_epsilon >= 0:
            raise ConfigError("noise_epsilon must be non-negative")
        if self.nominal_depths is None:
            object.__setattr__(self, "nominal_depths", np.asarray(self.element_positions.depths, dtype=float))

    @property
    def N(self) -> int:
        return self.pressures.size

    def scaled(self, c: float) -> "Snapshot":
        """Snapshot with pressures and noise level multiplied by ``c > 0``."""
        return replace(self, pressures=self.pressures * c, noise_epsilon=self.noise_epsilon * c)


def hankel_far_field(kr) -> np.ndarray:
    """Large-argument form of H0^(1)(kr)."""
    kr = np.asarray(kr, dtype=float)
    return np.sqrt(2.0 / (np.pi * kr)) * np.exp(1j * (kr - np.pi / 4))


def _source_values(modes: ModeSet, depth: float, h: float) -> np.ndarray:
    P = modes.matrix
    l = int(round(depth / h))
    if not 1 <= l <= P.shape[0]:
        raise ConfigError(f"source depth {depth} m is outside the sampled water column")
    return P[l - 1]


def mode_amplitudes(modes: ModeSet, source: SourceSpec, h: float, ranges=None) -> np.ndarray:
    """Modal excitation amplitudes a_m.

    With ``ranges`` (one per element) the result has shape (N, M); otherwise
    the source range is used and the shape is (M,). The source depth is looked
    up at the nearest grid sample.
    """
    k = modes.xis
    r = source.range_r if ranges is None else np.asarray(ranges, dtype=float)[:, None]
    kr = k * r
    if np.any(kr < MIN_KR):
        raise RangeTooShort(f"k*r = {np.min(kr):.3g} < {MIN_KR}; far-field Hankel form invalid")
    psi_s = _source_values(modes, source.depth_z_s, h)
    return 0.25j * source.spectrum_S * psi_s * hankel_far_field(kr)


def sample_modes_at(modes: ModeSet, depths, h: float) -> np.ndarray:
    """Mode functions at arbitrary depths by linear interpolation, shape (N, M)."""
    P = modes.matrix
    idx, w = interpolation_weights(depths, h, P.shape[0])
    return sample_at(P, idx, w)


def synthesize(modes: ModeSet, source: SourceSpec, geometry: ArrayGeometry, env: Environment,
               phase_per_element: bool = True) -> Snapshot:
    """Noise-free snapshot on the (possibly tilted) array.

    With ``phase_per_element`` each element uses its own horizontal range in
    the Hankel factor (source range plus the tilt offset of the element);
    otherwise all elements use the source range.
    """
    if not source.depth_z_s < env.water_depth_H:
        raise ConfigError("source must lie inside the water column")
    pos = apply_tilt(geometry, env.water_depth_H)
    h = env.depth_step_h
    Psi = sample_modes_at(modes, pos.depths, h)
    if phase_per_element:
        ranges = source.range_r + (pos.ranges - geometry.nominal_range)
        a = mode_amplitudes(modes, source, h, ranges=ranges)
        p = np.sum(a * Psi, axis=1)
    else:
        p = Psi @ mode_amplitudes(modes, source, h)
    return Snapshot(p, pos, env.frequency_hz, 0.0, None, None, geometry.nominal_depths)


def noise_norm(signal_norm: float, snr_db: float, convention: str = "norm") -> float:
    """Noise l2 norm giving ``snr_db``.

    ``norm``: snr = 10 log10(|p|/|n|); ``energy``: snr = 10 log10(|p|^2/|n|^2).
    """
    if convention == "norm":
        return signal_norm * 10.0 ** (-snr_db / 10.0)
    if convention == "energy":
        return signal_norm * 10.0 ** (-snr_db / 20.0)
    raise ConfigError(f"unknown snr convention {convention!r}")


def add_noise(snapshot: Snapshot, snr_db: float, seed: int, convention: str = "norm") -> Snapshot:
    """Add complex white Gaussian noise scaled to an exact SNR."""
    p = snapshot.pressures
    p_norm = np.linalg.norm(p)
    if p_norm == 0:
        raise ConfigError("cannot set an SNR on an all-zero snapshot")
    rng = np.random.default_rng(seed)
    n = rng.standard_normal(p.size) + 1j * rng.standard_normal(p.size)
    target = noise_norm(p_norm, snr_db, convention)
    n *= target / np.linalg.norm(n)
    return replace(snapshot, pressures=p + n, noise_epsilon=float(np.linalg.norm(n)),
                   seed=seed, snr_db=float(snr_db))
