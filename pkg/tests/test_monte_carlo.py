"""Monte Carlo oracle on closed-form instances."""
import numpy as np
import pytest
import scipy.sparse as sp

from stochafem.fem import AssemblyPattern, element_stiffness_list, nodal_load_vector, solve_spd
from stochafem.monte_carlo import MonteCarloError, mc_solve
from stochafem.random_field import Marginal, SampleSet, draw_samples
from stochafem.stochastic_system import StochasticSystem


def diagonal_system(xi, eta, kdiag, fvecs):
    """K(theta) = sum_i xi_i diag(kdiag[i]); F = sum_l eta_l fvecs[l]; xi, eta without the ones column."""
    n = len(kdiag[0])
    pattern = AssemblyPattern([np.array([i]) for i in range(n)], n)
    K_data = np.array([pattern.data([[[v]] for v in row]) for row in kdiag])
    return StochasticSystem(pattern, K_data, np.array(fvecs), SampleSet(np.asarray(xi), np.asarray(eta), 0))


def test_one_dof_spring():
    # k = xi * 2, f = 6, xi = 3  ->  u = 1
    s = diagonal_system([[3.0]], np.zeros((1, 0)), [[0.0], [2.0]], [[6.0]])
    assert mc_solve(s).responses[0, 0] == pytest.approx(1.0, rel=1e-15)


def test_diagonal_closed_form(rng):
    R, n = 300, 4
    xi = rng.uniform(0.5, 2.0, (R, 2))
    eta = rng.standard_normal((R, 1))
    k = [np.ones(n), rng.uniform(1, 3, n), rng.uniform(0, 0.2, n)]
    f = [rng.uniform(1, 2, n), rng.uniform(-1, 1, n)]
    s = diagonal_system(xi, eta, k, f)
    U = mc_solve(s).responses
    K = k[0] + xi @ np.array(k[1:])
    F = f[0] + eta @ np.array(f[1:])
    assert np.abs(U - F / K).max() <= 1e-12 * np.abs(F / K).max()


def test_deterministic_rows_identical(pylon):
    mesh, dm = pylon
    K = dm.pattern.data(element_stiffness_list(mesh))
    F = nodal_load_vector(mesh, dm)
    s = StochasticSystem(dm.pattern, K[None], F[None], draw_samples(0, 0, 20, seed=0))
    U = mc_solve(s).responses
    u = solve_spd(s.K_list[0], F)
    assert np.all(U == U[0]) and np.allclose(U[0], u, rtol=1e-12)


def test_thread_count_does_not_change_results(pylon):
    mesh, dm = pylon
    K = dm.pattern.data(element_stiffness_list(mesh))
    F = nodal_load_vector(mesh, dm)
    samples = draw_samples(1, 0, 600, seed=2, marginals=Marginal("lognormal", 0.0, 0.3))
    s = StochasticSystem(dm.pattern, np.array([0 * K, K]), F[None], samples)
    a = mc_solve(s, threads=1, chunk=64)
    b = mc_solve(s, threads=4, chunk=64)
    assert a.responses.tobytes() == b.responses.tobytes()
    sub = mc_solve(s, rows=[5, 2], dofs=[dm.index(33, "y")])
    assert np.array_equal(sub.responses[:, 0], a.responses[[5, 2], dm.index(33, "y")])


def test_rejection_policy():
    xi = np.ones((200, 1))
    xi[:1] = -1.0
    s = diagonal_system(xi, np.zeros((200, 0)), [[0.0], [1.0]], [[1.0]])
    res = mc_solve(s)
    assert res.rejected == 1 and np.isnan(res.responses[0, 0]) and res.accepted.sum() == 199
    xi[:5] = -1.0
    with pytest.raises(MonteCarloError, match="rejected"):
        mc_solve(diagonal_system(xi, np.zeros((200, 0)), [[0.0], [1.0]], [[1.0]]))

