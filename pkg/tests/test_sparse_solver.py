import numpy as np
import pytest
from numpy.testing import assert_allclose

from ocms.errors import ConfigError, DidNotConverge
from ocms.field_synth import sample_modes_at
from ocms.sparse_solver import (BpdnProblem, brute_force_support, check_dictionary_rank, kkt_residual,
                                solve_bpdn, support_of)


def random_problem(rng, eps=1e-6, n=8, m=3):
    Psi = rng.standard_normal((n, m))
    a = np.zeros(m, dtype=complex)
    j = rng.integers(m)
    a[j] = rng.standard_normal() + 1j * rng.standard_normal()
    return BpdnProblem(Psi, Psi @ a, eps), a


def test_rank_diagnostics(thermo_modes, full_array):
    d = check_dictionary_rank(np.eye(6)[:, :4])
    assert d.rank == 4 and d.condition == pytest.approx(1.0)
    A = np.random.default_rng(0).standard_normal((10, 3))
    d = check_dictionary_rank(np.column_stack([A, A[:, 1]]))
    assert d.rank == 3 and np.isinf(d.condition)
    Psi = sample_modes_at(thermo_modes, full_array.nominal_depths, 0.1)
    assert check_dictionary_rank(Psi).rank == 11


def test_problem_validation():
    with pytest.raises(ConfigError):
        BpdnProblem(np.ones((3, 2)), np.ones(4), 0.1)
    with pytest.raises(ConfigError):
        BpdnProblem(np.ones((3, 2)), np.ones(3), -1.0)
    with pytest.raises(ConfigError):
        BpdnProblem(np.column_stack([np.ones(3), np.zeros(3)]), np.ones(3), 0.1)


def test_large_epsilon_gives_zero():
    p = np.array([1.0, 2.0, 2.0], dtype=complex)
    res = solve_bpdn(BpdnProblem(np.eye(3), p, 3.0))
    assert np.all(res.coefficients == 0)
    assert res.objective == 0 and res.feasible


def test_orthonormal_single_atom():
    Q = np.linalg.qr(np.random.default_rng(3).standard_normal((20, 5)))[0] * 2.0
    p = Q[:, 0].astype(complex)
    eps = 0.01 * np.linalg.norm(p)
    res = solve_bpdn(BpdnProblem(Q, p, eps))
    a = res.coefficients
    a1 = abs(a[0])
    assert a1 >= 0.99 * (1 - eps / np.linalg.norm(p)) * np.linalg.norm(p) / 2.0
    assert np.all(np.abs(a[1:]) < 0.05 * a1)
    assert res.feasible and res.converged


def test_orthonormal_closed_form():
    # with orthonormal columns the solution shrinks coefficient moduli uniformly
    Q = np.linalg.qr(np.random.default_rng(4).standard_normal((12, 4)))[0]
    c = np.array([3.0, -1.0 + 1.0j, 0.2, 0.0])
    p = Q @ c
    eps = 0.5
    res = solve_bpdn(BpdnProblem(Q, p, eps))
    # soft threshold t with ||c - soft(c, t)|| = eps
    from scipy.optimize import brentq
    mag = np.abs(c)
    t = brentq(lambda t: np.linalg.norm(np.minimum(mag, t)) - eps, 0, mag.max())
    expected = np.where(mag > t, c * (1 - t / np.where(mag > 0, mag, 1)), 0)
    assert_allclose(res.coefficients, expected, atol=1e-6)


def test_random_one_sparse_recovery_matches_brute_force():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        prob, a_true = random_problem(rng)
        res = solve_bpdn(prob)
        S = support_of(res.coefficients)
        assert list(S) == list(brute_force_support(prob))
        assert list(S) == list(np.flatnonzero(a_true))
        assert np.max(np.abs(res.coefficients - a_true)) < 1e-4
        assert kkt_residual(prob, res.coefficients) < 1e-4


def test_least_squares_infeasible_flagged():
    rng = np.random.default_rng(5)
    Psi = rng.standard_normal((8, 2))
    p = rng.standard_normal(8) + 0j
    res = solve_bpdn(BpdnProblem(Psi, p, 1e-9))
    assert not res.feasible
    assert brute_force_support(BpdnProblem(Psi, p, 1e-9)) is None


def test_did_not_converge_carries_iterate():
    rng = np.random.default_rng(6)
    Psi = rng.standard_normal((30, 12))
    p = Psi @ (rng.standard_normal(12) + 1j * rng.standard_normal(12))
    prob = BpdnProblem(Psi, p, 0.3 * np.linalg.norm(p))
    with pytest.raises(DidNotConverge) as info:
        solve_bpdn(prob, max_iter=1, tol=1e-16)
    assert info.value.result is not None
    assert info.value.result.coefficients.shape == (12,)
    res = solve_bpdn(prob, max_iter=1, tol=1e-16, raise_on_failure=False)
    assert res.iterations <= 1


def test_against_generic_conic_solver():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(7)
    for _ in range(5):
        Psi = rng.standard_normal((15, 8))
        a = np.zeros(8, dtype=complex)
        a[[1, 4, 6]] = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        p = Psi @ a + 0.05 * (rng.standard_normal(15) + 1j * rng.standard_normal(15))
        eps = 0.1 * np.linalg.norm(p)
        x = cp.Variable(8, complex=True)
        cp.Problem(cp.Minimize(cp.norm1(x)), [cp.norm2(p - Psi @ x) <= eps]).solve()
        res = solve_bpdn(BpdnProblem(Psi, p, eps))
        assert res.feasible
        assert_allclose(res.objective, np.sum(np.abs(x.value)), rtol=1e-5)
