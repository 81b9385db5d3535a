"""
Mode depth functions by shooting the three-point modal recurrence.

For a trial horizontal wavenumber ``xi`` the recurrence

    phi(z + h) = 2 cos(sqrt(k(z)^2 - xi^2) h) phi(z) - phi(z - h)

is marched down from ``phi(0) = 0, phi(h) = 1``. Where ``k(z) < xi`` the
cosine of the imaginary argument is evaluated as a cosh.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DepthOutOfGrid, GridMismatch, NonFiniteRecurrence, ZeroFunction


@njit(cache=True)
def _step_factor(k2, x2, h):
    q = k2 - x2
    if q >= 0.0:
        return 2.0 * np.cos(np.sqrt(q) * h)
    return 2.0 * np.cosh(np.sqrt(-q) * h)


@njit(cache=True)
def _node_label(buf, k2, x2, h, cut):
    """Sign changes whose remaining phase to the bottom is at least ``cut``, plus one.

    The phase is accumulated over propagating cells only, so crossings in an
    evanescent tail or right at a pressure-release bottom are not counted.
    """
    L = buf.shape[0]
    tail = np.empty(L)
    acc = 0.0
    for l in range(L - 1, -1, -1):
        tail[l] = acc
        q = k2[l] - x2
        if q > 0.0:
            acc += np.sqrt(q) * h
    count = 0
    last = 0.0
    ilast = -1
    for l in range(L):
        v = buf[l]
        if v != 0.0:
            if last != 0.0 and (v > 0.0) != (last > 0.0):
                # linear crossing position between samples ilast and l
                f = last / (last - v)
                ph = tail[ilast] + (tail[l] - tail[ilast]) * f
                if ph >= cut:
                    count += 1
            last = v
            ilast = l
    return count + 1


@njit(cache=True)
def _labels_block(phi, k2, xis, h, cut):
    n = xis.shape[0]
    out = np.empty(n, dtype=np.int64)
    for j in range(n):
        out[j] = _node_label(phi[:, j], k2, xis[j] * xis[j], h, cut)
    return out


@njit(cache=True)
def _shoot_block(k2, xis, h):
    L = k2.shape[0]
    n = xis.shape[0]
    out = np.empty((L, n))
    for j in range(n):
        x2 = xis[j] * xis[j]
        prev = 0.0
        cur = 1.0
        out[0, j] = cur
        for l in range(1, L):
            nxt = _step_factor(k2[l - 1], x2, h) * cur - prev
            prev = cur
            cur = nxt
            out[l, j] = cur
    return out


@njit(cache=True)
def _shoot_sampled(k2, xis, h, idx, w, cut):
    """Normalized functions sampled at off-grid depths, plus node counts.

    ``idx[n]`` is the 0-based grid sample just above depth n (-1 for the
    surface, where phi = 0) and ``w[n]`` the linear weight of the sample below.
    """
    L = k2.shape[0]
    n = xis.shape[0]
    N = idx.shape[0]
    out = np.empty((N, n))
    nodes = np.empty(n, dtype=np.int64)
    buf = np.empty(L)
    for j in range(n):
        x2 = xis[j] * xis[j]
        prev = 0.0
        cur = 1.0
        buf[0] = cur
        ss = 1.0
        for l in range(1, L):
            nxt = _step_factor(k2[l - 1], x2, h) * cur - prev
            prev = cur
            cur = nxt
            buf[l] = cur
            ss += cur * cur
        scale = 1.0 / np.sqrt(ss * h)
        nodes[j] = _node_label(buf, k2, x2, h, cut)
        for m in range(N):
            i = idx[m]
            lo = 0.0 if i < 0 else buf[i]
            hi = buf[i + 1] if i + 1 < L else 0.0
            out[m, j] = ((1.0 - w[m]) * lo + w[m] * hi) * scale
    return out, nodes


def shoot_many(env, xis) -> np.ndarray:
    """Raw shooting solutions for many trial wavenumbers, shape (L, len(xis))."""
    xis = np.atleast_1d(np.asarray(xis, dtype=float))
    phi = _shoot_block(env.k2, xis, env.depth_step_h)
    if not np.all(np.isfinite(phi)):
        raise NonFiniteRecurrence("shooting recurrence overflowed; trial wavenumber far outside band")
    return phi


def shoot_raw(env, xi: float) -> np.ndarray:
    """Samples phi(z_l), l = 1..L, for a single trial wavenumber."""
    if xi <= 0:
        raise ValueError("trial wavenumber must be positive")
    return shoot_many(env, [xi])[:, 0]


def normalize(phi, h: float) -> np.ndarray:
    """Scale so that ``sum(psi**2) * h == 1`` (column-wise for 2-D input)."""
    phi = np.asarray(phi, dtype=float)
    norm = np.sqrt(np.sum(phi ** 2, axis=0) * h)
    if np.any(norm == 0):
        raise ZeroFunction("cannot normalize an all-zero function")
    return phi / norm


def _samples(psi):
    return psi.psi if isinstance(psi, ModeFunction) else np.asarray(psi, dtype=float)


#: Minimum phase between a node and the bottom for the node to count.
NODE_PHASE_CUT = np.pi / 4


def count_mode_number(psi, zero_tol: float = 1e-9) -> int:
    """Strict sign changes between consecutive nonzero samples, plus one.

    Samples with ``|psi| <= zero_tol * max|psi|`` count as zeros, so a
    round-off residue at a sampled node does not add a crossing.
    """
    v = _samples(psi)
    amax = np.abs(v).max() if v.size else 0.0
    s = np.sign(np.where(np.abs(v) <= zero_tol * amax, 0.0, v))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1])) + 1


def mode_labels(env, xis, phi) -> np.ndarray:
    """Mode numbers of shooting solutions ``phi`` (L, n) from their node phase.

    A crossing closer than a phase of pi/4 to the bottom is not counted: at a
    pressure-release bottom the m-th mode has its last node exactly at H and
    the sign of the bottom sample is round-off.
    """
    xis = np.atleast_1d(np.asarray(xis, dtype=float))
    phi = np.asarray(phi, dtype=float).reshape(env.L, -1)
    return _labels_block(phi, env.k2, xis, env.depth_step_h, NODE_PHASE_CUT)


def inner_product(a, b, h: float) -> float:
    a, b = _samples(a), _samples(b)
    if a.shape != b.shape:
        raise GridMismatch(f"grid lengths differ: {a.shape} vs {b.shape}")
    return float(np.dot(a, b) * h)


@dataclass(frozen=True, eq=False)
class ModeFunction:
    xi: float
    psi: np.ndarray
    mode_number: int
    norm_applied: bool = True


@dataclass(frozen=True, eq=False)
class ModeSet:
    modes: tuple
    env_fingerprint: str = ""

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        xis = self.xis
        if np.any(np.diff(xis) >= 0):
            raise ValueError("mode wavenumbers must be strictly decreasing")
        if len({m.psi.shape for m in self.modes}) > 1:
            raise GridMismatch("modes do not share a grid")

    def __len__(self):
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __getitem__(self, i):
        return self.modes[i]

    @property
    def xis(self) -> np.ndarray:
        return np.array([m.xi for m in self.modes], dtype=float)

    @property
    def mode_numbers(self) -> np.ndarray:
        return np.array([m.mode_number for m in self.modes], dtype=int)

    @property
    def matrix(self) -> np.ndarray:
        """Mode samples as columns, shape (L, M)."""
        return np.column_stack([m.psi for m in self.modes])


def mode_set_from_xis(env, xis) -> ModeSet:
    """Shoot, normalize and label a sequence of trial wavenumbers."""
    xis = np.atleast_1d(np.asarray(xis, dtype=float))
    psi = normalize(shoot_many(env, xis), env.depth_step_h)
    labels = mode_labels(env, xis, psi)
    modes = [ModeFunction(float(x), psi[:, j], int(labels[j])) for j, x in enumerate(xis)]
    return ModeSet(modes, env.fingerprint())


def interpolation_weights(depths, h: float, L: int):
    """Linear-interpolation indices/weights of arbitrary depths on the grid."""
    depths = np.asarray(depths, dtype=float)
    z_L = L * h
    if np.any(depths <= 0) or np.any(depths > z_L * (1 + 1e-12)):
        raise DepthOutOfGrid(f"depths must lie in (0, {z_L}] m")
    pos = np.minimum(depths / h, float(L))
    lo = np.floor(pos + 1e-9).astype(np.int64)
    w = np.clip(pos - lo, 0.0, 1.0)
    w[np.abs(w) < 1e-9] = 0.0
    # sample l (1-based) lives at array index l-1; index -1 is the surface zero
    return lo - 1, w


def sample_at(psi_matrix: np.ndarray, idx: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Interpolate grid columns (L, M) at depths encoded by ``idx, w``."""
    L = psi_matrix.shape[0]
    padded = np.vstack([psi_matrix, np.zeros((1, psi_matrix.shape[1]))])
    lo = padded[idx]  # idx = -1 picks the zero row
    hi_idx = np.where(idx + 1 < L, idx + 1, L)
    hi = padded[hi_idx]
    return (1.0 - w)[:, None] * lo + w[:, None] * hi


def shoot_sampled(env, xis, idx, w):
    """Normalized shooting functions at element depths plus mode numbers."""
    xis = np.atleast_1d(np.asarray(xis, dtype=float))
    out, nodes = _shoot_sampled(env.k2, xis, env.depth_step_h, idx, w, NODE_PHASE_CUT)
    if not np.all(np.isfinite(out)):
        raise NonFiniteRecurrence("shooting recurrence overflowed")
    return out, nodes
