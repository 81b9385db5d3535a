"""
Orthogonality-constrained modal search over the first-mode wavenumber.

For every trial ``xi_1`` on the outer grid the candidate mode set is built
by the orthogonality scan, sampled at the nominal element depths, and the
snapshot is fitted by basis pursuit denoising. The estimate is the feasible
grid point with the smallest l1 objective.

The sweep runs in three passes:

1. least-squares residual of every grid cell (cheap, precomputed bases);
2. continuous refinement of the anchor inside the best few residual basins,
   since the residual is a narrow V in ``xi_1`` and a grid point can sit
   far up its wall;
3. BPDN on every cell whose residual meets the working epsilon.
"""

from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigError, DidNotConverge, EmptyTrialSet, NoFeasiblePoint
from .field_synth import Snapshot
from .modal_scan import ScanConfig, ScanGrid
from .shooting import ModeSet, interpolation_weights, mode_set_from_xis, shoot_sampled
from .sparse_solver import BpdnProblem, check_dictionary_rank, solve_bpdn
from .waveguide import ArrayGeometry, Environment, search_bounds

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FromSnapshot:
    """Use the noise norm recorded in the snapshot."""

    kind = "from_snapshot"


@dataclass(frozen=True)
class Fraction:
    """``epsilon = gamma * ||p||`` for data with unknown noise level."""

    gamma: float = 0.05
    kind = "fraction"


@dataclass(frozen=True)
class FixedEpsilon:
    value: float
    kind = "fixed"


EpsilonPolicy = Union[FromSnapshot, Fraction, FixedEpsilon]


@dataclass(frozen=True)
class OcmsConfig:
    """Search settings.

    ``residual_floor_slack`` lifts epsilon to ``(1 + slack) * rho_min`` where
    ``rho_min`` is the best least-squares residual over the sweep; the forward
    model never matches the data exactly, so a bare noise-level epsilon can
    leave no feasible point. ``None`` disables the floor.

    ``objective_tie_rel``: feasible points whose objective is within this
    relative margin of the minimum count as tied, and the tie goes to the
    smallest residual. Anchors below k_1 build sets that lack the weakly
    excited top modes; their l1 objective can undercut the complete set by
    noise-level amounts while their fit is worse. 0 gives the strict argmin.
    """

    xi_min: float
    xi_max: float
    delta_xi: float = 1e-4
    scan: Optional[ScanConfig] = None
    epsilon_policy: EpsilonPolicy = field(default_factory=FromSnapshot)
    residual_floor_slack: Optional[float] = 0.5
    n_polish: int = 8
    objective_tie_rel: float = 1e-2
    bpdn_max_iter: int = 20000
    bpdn_tol: float = 1e-8

    def __post_init__(self):
        if self.scan is None:
            object.__setattr__(self, "scan", ScanConfig(self.xi_min, self.xi_max, self.delta_xi))
        if (self.scan.xi_min, self.scan.xi_max, self.scan.delta_xi) != (self.xi_min, self.xi_max, self.delta_xi):
            raise ConfigError("outer grid and scan grid must share xi_min, xi_max and delta_xi")
        if self.residual_floor_slack is not None and self.residual_floor_slack < 0:
            raise ConfigError("residual_floor_slack must be non-negative")
        if self.objective_tie_rel < 0:
            raise ConfigError("objective_tie_rel must be non-negative")
        if self.n_polish < 0:
            raise ConfigError("n_polish must be non-negative")
        if isinstance(self.epsilon_policy, Fraction) and not self.epsilon_policy.gamma >= 0:
            raise ConfigError("gamma must be non-negative")

    @classmethod
    def for_env(cls, env: Environment, delta_xi: float = 1e-4, tau: float = 0.2, **kwargs) -> "OcmsConfig":
        xi_min, xi_max = search_bounds(env)
        scan = ScanConfig(xi_min, xi_max, delta_xi, ortho_threshold_tau=tau)
        return cls(xi_min, xi_max, delta_xi, scan, **kwargs)


@dataclass(frozen=True, eq=False)
class ObjectiveCurve:
    """Per grid point: ``e = ||a||_1`` (inf if infeasible), residual and anchor used."""

    xi_grid: np.ndarray
    e: np.ndarray
    feasible: np.ndarray
    residual: np.ndarray
    anchor: np.ndarray


@dataclass(frozen=True, eq=False)
class EstimateResult:
    k_hat: np.ndarray
    mode_numbers: np.ndarray
    mdfs: ModeSet
    objective_curve: ObjectiveCurve
    winning_index: int
    coefficients: np.ndarray
    epsilon: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def xi_1(self) -> float:
        return float(self.k_hat[0])

    def k_by_mode(self) -> dict:
        """Estimated wavenumber per mode label (first occurrence wins)."""
        out = {}
        for m, k in zip(self.mode_numbers, self.k_hat):
            out.setdefault(int(m), float(k))
        return out


class _Table:
    """Per (environment, scan, element depths) data shared across snapshots."""

    def __init__(self, env: Environment, scan: ScanConfig, depths: np.ndarray):
        self.env = env
        self.sg = ScanGrid(env, scan)
        self.idx, self.w = interpolation_weights(depths, env.depth_step_h, env.L)
        J = self.sg.grid.size
        self.xis = [self.sg.cell_wavenumbers(j) for j in range(J)]
        flat = np.concatenate(self.xis)
        sampled, labels = shoot_sampled(env, flat, self.idx, self.w)
        self.dicts, self.bases = [], []
        pos = 0
        for x in self.xis:
            A = sampled[:, pos:pos + x.size]
            pos += x.size
            self.dicts.append(A)
            self.bases.append(_basis(A) if x.size >= 2 else None)

    def fit(self, anchor: float):
        """(residual basis, dictionary, wavenumbers) for a continuous anchor."""
        xis = self.sg.wavenumbers(anchor)
        if xis.size < 2:
            return None, None, xis
        A, _ = shoot_sampled(self.env, xis, self.idx, self.w)
        return _basis(A), A, xis


def _basis(A):
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    return U[:, s > 1e-12 * s[0]]


def _residual(Q, p) -> float:
    if Q is None:
        return np.inf
    return float(np.linalg.norm(p - Q @ (Q.T @ p)))


_TABLES: "OrderedDict[tuple, _Table]" = OrderedDict()
_TABLE_CACHE_SIZE = 8


def _table(env: Environment, scan: ScanConfig, depths: np.ndarray) -> _Table:
    key = (env.fingerprint(), scan, np.asarray(depths, dtype=float).tobytes())
    tab = _TABLES.get(key)
    if tab is None:
        tab = _Table(env, scan, depths)
        _TABLES[key] = tab
        if len(_TABLES) > _TABLE_CACHE_SIZE:
            _TABLES.popitem(last=False)
    else:
        _TABLES.move_to_end(key)
    return tab


def policy_epsilon(policy: EpsilonPolicy, snapshot: Snapshot) -> float:
    if isinstance(policy, FromSnapshot):
        return float(snapshot.noise_epsilon)
    if isinstance(policy, Fraction):
        return float(policy.gamma * np.linalg.norm(snapshot.pressures))
    if isinstance(policy, FixedEpsilon):
        return float(policy.value)
    raise ConfigError(f"unknown epsilon policy {policy!r}")


def _local_minima(r):
    """Indices of finite grid-local minima of ``r`` (plateaus take the first point)."""
    J = r.size
    out = []
    for j in range(J):
        if not np.isfinite(r[j]):
            continue
        left = r[j - 1] if j > 0 else np.inf
        right = r[j + 1] if j + 1 < J else np.inf
        if r[j] < left and r[j] <= right:
            out.append(j)
    return np.array(out, dtype=int)


def estimate(snapshot: Snapshot, env: Environment, geometry: Optional[ArrayGeometry],
             config: OcmsConfig) -> EstimateResult:
    """Estimate modal wavenumbers and depth functions from one snapshot.

    The mode sets are always sampled at the nominal element depths (from
    ``geometry`` if given, else from the snapshot); any tilt is unknown to
    the estimator.
    """
    if abs(snapshot.frequency_hz - env.frequency_hz) > 1e-9 * env.frequency_hz:
        raise ConfigError("snapshot and environment frequencies differ")
    depths = np.asarray(geometry.nominal_depths if geometry is not None else snapshot.nominal_depths, float)
    p = snapshot.pressures
    if depths.size != p.size:
        raise ConfigError("element count of geometry and snapshot differ")
    if p.size < 2:
        raise ConfigError("need at least two elements")

    tab = _table(env, config.scan, depths)
    grid, dxi = tab.sg.grid, config.delta_xi
    J = grid.size

    # pass 1: residual at every grid anchor
    residual = np.array([_residual(Q, p) for Q in tab.bases])
    anchor = grid.copy()
    cell_dict = list(tab.dicts)
    cell_xis = list(tab.xis)

    # pass 2: refine the anchor continuously in the best residual basins
    cands = _local_minima(residual)
    cands = cands[np.argsort(residual[cands], kind="stable")][: config.n_polish]
    n_evals = 0
    for j in cands:
        def f(x):
            Q, _, _ = tab.fit(x)
            return _residual(Q, p)

        lo, hi = max(grid[j] - dxi, config.xi_min), min(grid[j] + dxi, config.xi_max)
        opt = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10, "maxiter": 200})
        n_evals += opt.nfev
        if not opt.fun < residual[j]:
            continue
        x = float(opt.x)
        jc = int(np.clip(np.rint((x - grid[0]) / dxi), 0, J - 1))
        if opt.fun < residual[jc]:
            _, A, xis = tab.fit(x)
            residual[jc], anchor[jc], cell_dict[jc], cell_xis[jc] = opt.fun, x, A, xis

    finite = np.isfinite(residual)
    if not finite.any():
        raise NoFeasiblePoint("the scan found no multimode set anywhere in the band")
    rho_min = float(residual[finite].min())
    eps_policy = policy_epsilon(config.epsilon_policy, snapshot)
    eps = eps_policy
    if config.residual_floor_slack is not None:
        eps = max(eps, (1.0 + config.residual_floor_slack) * rho_min)

    # pass 3: l1 objective on every cell the residual admits
    e = np.full(J, np.inf)
    coefs = {}
    iters = 0
    for j in np.flatnonzero(residual <= eps * (1 + 1e-12)):
        prob = BpdnProblem(cell_dict[j], p, eps)
        try:
            res = solve_bpdn(prob, config.bpdn_max_iter, config.bpdn_tol)
        except DidNotConverge as exc:
            res = exc.result
            log.debug("BPDN did not converge at xi_1=%.7f", anchor[j])
        iters += res.iterations
        if res.feasible:
            e[j] = res.objective
            coefs[j] = res.coefficients
    feasible = np.isfinite(e)
    if not feasible.any():
        raise NoFeasiblePoint(f"no feasible grid point at epsilon={eps:.3g}")
    e_min = float(e[feasible].min())
    tied = np.flatnonzero(e <= e_min * (1.0 + config.objective_tie_rel))
    win = int(tied[np.lexsort((-grid[tied], residual[tied]))[0]])

    xis = cell_xis[win]
    mdfs = mode_set_from_xis(env, xis)
    rank = check_dictionary_rank(cell_dict[win])
    curve = ObjectiveCurve(grid, e, feasible, residual, anchor)
    diag = {"epsilon_policy": eps_policy, "rho_min": rho_min, "n_feasible": int(feasible.sum()),
            "n_polish_evals": int(n_evals), "bpdn_iterations": int(iters), "n_tied": int(tied.size), "rank": rank.rank,
            "condition": rank.condition, "n_modes": int(xis.size)}
    return EstimateResult(np.asarray(xis, float), mdfs.mode_numbers, mdfs, curve, win,
                          coefs[win], float(eps), diag)


def relative_error(k_true: float, k_hat: float) -> float:
    """``|k_true - k_hat| / |k_true|``."""
    if k_true == 0:
        raise ConfigError("k_true must be non-zero")
    return abs(k_true - k_hat) / abs(k_true)


@dataclass(frozen=True)
class ModeAggregate:
    mode: int
    k_true: float
    n_trials: int
    n_missing: int
    mean_k_hat: float
    delta_k: float
    sigma: float
    mean_abs_rel_error: float


def aggregate_trials(trial_results: Sequence, k_true: Sequence[float]) -> list:
    """Per-mode statistics over trials.

    Each trial is an EstimateResult, a ``{mode: k_hat}`` mapping, or None for
    a failed trial. ``delta_k`` is the relative error of the trial mean;
    ``sigma`` is the sample standard deviation (n - 1 denominator); trials
    lacking a mode are excluded for that mode and counted in ``n_missing``.
    """
    trial_results = list(trial_results)
    if not trial_results:
        raise EmptyTrialSet("no trials to aggregate")
    maps = []
    for t in trial_results:
        if t is None:
            maps.append({})
        elif isinstance(t, EstimateResult):
            maps.append(t.k_by_mode())
        else:
            maps.append({int(m): float(k) for m, k in dict(t).items()})
    out = []
    for i, kt in enumerate(k_true):
        m = i + 1
        vals = np.array([mp[m] for mp in maps if m in mp], dtype=float)
        n = vals.size
        if n:
            mean = float(vals.mean())
            sigma = float(vals.std(ddof=1)) if n > 1 else float("nan")
            mare = float(np.mean(np.abs(vals - kt) / abs(kt)))
            dk = relative_error(kt, mean)
        else:
            mean = sigma = mare = dk = float("nan")
        out.append(ModeAggregate(m, float(kt), n, len(maps) - n, mean, dk, sigma, mare))
    return out
