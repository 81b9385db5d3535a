"""
Basis pursuit denoising with complex coefficients over a real dictionary.

    minimize  sum_m |a_m|   subject to  ||p - Psi a||_2 <= eps

Solved by ADMM on the splitting a = z: the a-step projects onto the residual
ellipsoid (via the SVD of Psi and a scalar secular equation), the z-step
soft-thresholds the complex moduli.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit
from scipy.optimize import root

from .errors import ConfigError, DidNotConverge

#: Relative slack when deciding feasibility of a returned iterate.
FEAS_REL = 1e-6
FEAS_ABS = 1e-12
#: KKT residual below which a polished support solution counts as converged.
POLISH_KKT = 1e-8


@dataclass(frozen=True, eq=False)
class BpdnProblem:
    dictionary: np.ndarray
    observation: np.ndarray
    epsilon: float

    def __post_init__(self):
        Psi = np.asarray(self.dictionary, dtype=float)
        p = np.asarray(self.observation, dtype=complex)
        object.__setattr__(self, "dictionary", Psi)
        object.__setattr__(self, "observation", p)
        if Psi.ndim != 2 or min(Psi.shape) < 1:
            raise ConfigError("dictionary must be a non-empty 2-D array")
        if p.shape != (Psi.shape[0],):
            raise ConfigError("observation length must match dictionary rows")
        if not self.epsilon >= 0:
            raise ConfigError("epsilon must be non-negative")
        if np.any(np.all(Psi == 0, axis=0)):
            raise ConfigError("dictionary has an all-zero column")


@dataclass(frozen=True, eq=False)
class SparseSolveResult:
    coefficients: np.ndarray
    objective: float
    residual_norm: float
    feasible: bool
    iterations: int
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RankDiagnostic:
    rank: int
    condition: float
    singular_values: np.ndarray = field(compare=False, default=None)


def check_dictionary_rank(Psi, rel_tol: float = 1e-10) -> RankDiagnostic:
    """Numerical rank (singular values above ``rel_tol * s_max``) and 2-norm condition."""
    s = np.linalg.svd(np.asarray(Psi, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return RankDiagnostic(0, np.inf, s)
    rank = int(np.count_nonzero(s > rel_tol * s[0]))
    cond = s[0] / s[-1] if s[-1] > 0 and rank == s.size else np.inf
    return RankDiagnostic(rank, float(cond), s)


@njit(cache=True)
def _project(v, V, s, q, eps_r):
    """Project complex ``v`` onto {a : ||q - diag(s) V^T a|| <= eps_r}."""
    r = s.shape[0]
    t = np.zeros(r, dtype=np.complex128)
    for i in range(r):
        acc = 0j
        for m in range(v.shape[0]):
            acc += V[m, i] * v[m]
        t[i] = acc
    d2 = np.empty(r)
    tot = 0.0
    for i in range(r):
        dd = s[i] * t[i] - q[i]
        d2[i] = dd.real * dd.real + dd.imag * dd.imag
        tot += d2[i]
    if tot <= eps_r * eps_r:
        return v.copy()
    if eps_r <= 0.0:
        b = q / s
    else:
        # Newton on f(mu) = sum d2 / (1 + mu s^2)^2 - eps^2, convex and decreasing,
        # so iterates from mu = 0 increase monotonically to the root
        mu = 0.0
        target = eps_r * eps_r
        for _ in range(200):
            f = -target
            df = 0.0
            for i in range(r):
                den = 1.0 + mu * s[i] * s[i]
                f += d2[i] / (den * den)
                df -= 2.0 * d2[i] * s[i] * s[i] / (den * den * den)
            if f <= 1e-15 * target or df == 0.0:
                break
            step = f / df
            mu -= step
            if -step <= 1e-15 * (1.0 + mu):
                break
        b = np.empty(r, dtype=np.complex128)
        for i in range(r):
            b[i] = (t[i] + mu * s[i] * q[i]) / (1.0 + mu * s[i] * s[i])
    out = v.copy()
    for m in range(v.shape[0]):
        acc = 0j
        for i in range(r):
            acc += V[m, i] * (b[i] - t[i])
        out[m] += acc
    return out


@njit(cache=True)
def _soft(w, kappa):
    out = np.zeros_like(w)
    for m in range(w.shape[0]):
        mag = abs(w[m])
        if mag > kappa:
            out[m] = w[m] * (1.0 - kappa / mag)
    return out


@njit(cache=True)
def _admm(V, s, q, eps_r, z0, rho, max_iter, tol):
    M = z0.shape[0]
    z = z0.copy()
    u = np.zeros(M, dtype=np.complex128)
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        x = _project(z - u, V, s, q, eps_r)
        z_old = z
        z = _soft(x + u, 1.0 / rho)
        u = u + x - z
        r_pri = 0.0
        r_dual = 0.0
        scale = 0.0
        for m in range(M):
            r_pri += abs(x[m] - z[m]) ** 2
            r_dual += abs(z[m] - z_old[m]) ** 2
            scale += abs(z[m]) ** 2
        r_pri = np.sqrt(r_pri)
        r_dual = rho * np.sqrt(r_dual)
        tol_abs = tol * max(1.0, np.sqrt(scale))
        if r_pri <= tol_abs and r_dual <= tol_abs:
            converged = True
            break
        # residual balancing; the scaled dual variable follows rho
        if it % 10 == 0:
            if r_pri > 10.0 * r_dual:
                rho *= 2.0
                u = u / 2.0
            elif r_dual > 10.0 * r_pri:
                rho /= 2.0
                u = u * 2.0
    return z, it, converged


def _finish(Psi, p, a, eps, iterations, converged, **diag):
    res = float(np.linalg.norm(p - Psi @ a))
    feasible = res <= eps * (1 + FEAS_REL) + FEAS_ABS
    return SparseSolveResult(a, float(np.sum(np.abs(a))), res, bool(feasible), iterations, converged, diag)


@njit(cache=True)
def _phase_fixed_point(Ginv, A, a_ls, slack2, u, max_iter):
    """Iterate ``a = a_ls - G^-1 u / mu``, ``u = a/|a|`` to a fixed point."""
    k = u.shape[0]
    aS = a_ls.copy()
    for _ in range(max_iter):
        w = Ginv.astype(np.complex128) @ u
        Aw = A.astype(np.complex128) @ w
        nrm = np.sqrt(np.sum(Aw.real ** 2 + Aw.imag ** 2))
        inv_mu = np.sqrt(slack2) / nrm
        aS = a_ls - inv_mu * w
        change = 0.0
        for i in range(k):
            mag = abs(aS[i])
            if mag == 0.0:
                return aS, False
            un = aS[i] / mag
            change = max(change, abs(un - u[i]))
            u[i] = un
        if change < 1e-14:
            return aS, True
    return aS, False


def _phases_on_support(Ginv, A, a_ls, slack2, u0, max_iter):
    """Coefficients on a fixed support whose phases agree with ``u``.

    The fixed-point iteration is fast but can oscillate when an entry is
    tiny; a root solve on the phase angles is the fallback.
    """
    aS, ok = _phase_fixed_point(Ginv, A, a_ls, slack2, u0.copy(), max_iter)
    if ok and np.all(np.real(aS * np.conj(aS / np.abs(aS))) > 0):
        return aS

    def amplitudes(theta):
        u = np.exp(1j * theta)
        w = Ginv @ u
        inv_mu = np.sqrt(slack2) / np.linalg.norm(A @ w)
        return a_ls - inv_mu * w, u, inv_mu * np.abs(w)

    def mismatch(theta):
        a, u, scale = amplitudes(theta)
        return np.imag(a * np.conj(u)) / (np.abs(a_ls) + scale)

    sol = root(mismatch, np.angle(u0), method="hybr", options={"xtol": 1e-15})
    a, u, _ = amplitudes(sol.x)
    if np.max(np.abs(mismatch(sol.x))) < 1e-12 and np.all(np.real(a * np.conj(u)) > 0):
        return a
    return None


def _polish_support(Psi, p, eps, a, support_tol=1e-6, max_iter=500):
    """Solve the optimality conditions exactly on an active set grown from ``a``.

    With the constraint active and phases u fixed, stationarity gives
    ``a_S = G^-1 (Psi_S^T p - u / mu)`` and the residual norm fixes mu in
    closed form; the phases are then solved for. A column whose dual value
    exceeds one joins the set and the solve repeats, so entries too small
    to pass ``support_tol`` are still placed where optimality needs them.
    Returns None when the conditions have no consistent solution.
    """
    S = list(support_of(a, support_tol))
    if not S:
        return None
    u = a[S] / np.abs(a[S])
    M = Psi.shape[1]
    for _ in range(M):
        A = Psi[:, S]
        G = A.T @ A
        try:
            Ginv = np.linalg.inv(G)
        except np.linalg.LinAlgError:
            return None
        a_ls = Ginv @ (A.T @ p)
        slack2 = eps ** 2 - float(np.linalg.norm(p - A @ a_ls) ** 2)
        if slack2 <= 0:
            return None
        aS = _phases_on_support(Ginv.astype(float), A, a_ls.astype(np.complex128), slack2,
                                u.astype(np.complex128), max_iter)
        if aS is None:
            return None
        out = np.zeros(M, dtype=complex)
        out[S] = aS
        r = Psi @ out - p
        g = Psi.T @ r / np.linalg.norm(r)
        uS = aS / np.abs(aS)
        lam = max(0.0, -float(np.real(np.vdot(g[S], uS))) / float(np.vdot(g[S], g[S]).real))
        off = np.setdiff1d(np.arange(M), S)
        if off.size == 0:
            return out
        dual = lam * np.abs(g[off])
        if dual.max() <= 1.0 + 1e-9:
            return out
        j = int(off[np.argmax(dual)])
        S.append(j)
        u = np.append(uS, -g[j] / abs(g[j]))
    return None


def solve_bpdn(problem: BpdnProblem, max_iter: int = 5000, tol: float = 1e-8,
               raise_on_failure: bool = True) -> SparseSolveResult:
    """Minimum complex-l1 coefficients with residual at most ``epsilon``.

    The problem is scaled to ``||p|| = 1`` internally; the returned iterate is
    the projection of the sparse ADMM variable onto the feasible set. If even
    least squares cannot reach ``epsilon`` the least-squares fit is returned
    with ``feasible=False``.
    """
    Psi, p, eps = problem.dictionary, problem.observation, float(problem.epsilon)
    M = Psi.shape[1]
    p_norm = float(np.linalg.norm(p))
    if eps >= p_norm:
        return _finish(Psi, p, np.zeros(M, dtype=complex), eps, 0, True)

    U, s, Vt = np.linalg.svd(Psi, full_matrices=False)
    keep = s > 1e-12 * s[0]
    U, s, V = U[:, keep], s[keep], Vt[keep].T.copy()
    pu = p / p_norm
    q = U.T @ pu
    perp2 = max(1.0 - float(np.vdot(q, q).real), 0.0)
    eps_u = eps / p_norm
    if perp2 > eps_u ** 2:
        a_ls = V @ (q / s) * p_norm
        return _finish(Psi, p, a_ls, eps, 0, True, reason="least-squares residual exceeds epsilon")
    eps_r = np.sqrt(eps_u ** 2 - perp2)

    z0 = np.zeros(M, dtype=np.complex128)
    z, it, converged = _admm(V, s, q.astype(np.complex128), eps_r, z0, 1.0, int(max_iter), float(tol))
    a = _project(z, V, s, q.astype(np.complex128), eps_r) * p_norm
    result = _finish(Psi, p, a, eps, int(it), bool(converged))
    polished = _polish_support(Psi, p, eps, z * p_norm)
    if polished is not None:
        prob = BpdnProblem(Psi, p, eps)
        kkt = kkt_residual(prob, polished)
        # an exact certificate on the support also settles a stalled run
        cand = _finish(Psi, p, polished, eps, int(it), bool(converged) or kkt <= POLISH_KKT,
                       polished=True, kkt=kkt)
        if (cand.feasible and cand.objective <= result.objective * (1 + 1e-9)
                and kkt <= kkt_residual(prob, a)):
            result = cand
    converged = result.converged
    if not converged and raise_on_failure:
        raise DidNotConverge(f"BPDN stopped after {it} iterations", result=result)
    return result


def support_of(a, rel_tol: float = 1e-6) -> np.ndarray:
    """Indices with ``|a_m| > rel_tol * max|a|``."""
    mag = np.abs(np.asarray(a))
    if mag.size == 0 or mag.max() == 0:
        return np.empty(0, dtype=int)
    return np.flatnonzero(mag > rel_tol * mag.max())


def kkt_residual(problem: BpdnProblem, a, support_tol: float = 1e-6) -> float:
    """Infinity-norm violation of the optimality conditions at ``a``.

    With an active constraint, optimality requires a multiplier lam >= 0 with
    ``a_m/|a_m| + lam g_m = 0`` on the support and ``lam |g_m| <= 1`` off it,
    where ``g = Psi^T r / ||r||`` and ``r = Psi a - p``. The multiplier is the
    least-squares fit on the support.
    """
    Psi, p, eps = problem.dictionary, problem.observation, problem.epsilon
    a = np.asarray(a, dtype=complex)
    S = support_of(a, support_tol)
    r = Psi @ a - p
    rn = np.linalg.norm(r)
    if S.size == 0:
        if np.linalg.norm(p) <= eps * (1 + FEAS_REL):
            return 0.0
        # a = 0 is optimal only if it is feasible
        return float(np.linalg.norm(p) - eps)
    if rn < eps - 1e-6 * max(eps, np.linalg.norm(p) * 1e-3):
        # inactive constraint: zero must be a subgradient of the l1 norm
        return 1.0
    g = Psi.T @ r / rn
    u = a[S] / np.abs(a[S])
    gS = g[S]
    lam = max(0.0, -float(np.real(np.vdot(gS, u))) / float(np.vdot(gS, gS).real))
    on = np.abs(u + lam * gS).max()
    off_idx = np.setdiff1d(np.arange(a.size), S)
    off = max(0.0, float((lam * np.abs(g[off_idx])).max() - 1.0)) if off_idx.size else 0.0
    return float(max(on, off))


def brute_force_support(problem: BpdnProblem, max_size: int = 2) -> Optional[np.ndarray]:
    """Smallest support whose least-squares fit meets ``epsilon``.

    Among feasible supports of the smallest size the one with the smallest
    residual is returned; None if no support up to ``max_size`` is feasible.
    """
    from itertools import combinations

    Psi, p, eps = problem.dictionary, problem.observation, problem.epsilon
    if np.linalg.norm(p) <= eps:
        return np.empty(0, dtype=int)
    for size in range(1, max_size + 1):
        best, best_res = None, np.inf
        for S in combinations(range(Psi.shape[1]), size):
            A = Psi[:, S]
            coef = np.linalg.lstsq(A, p, rcond=None)[0]
            res = np.linalg.norm(p - A @ coef)
            if res <= eps and res < best_res:
                best, best_res = np.array(S), res
        if best is not None:
            return best
    return None
