"""KL discretization and sampling."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from stochafem.fem import Element, Mesh, PropertyGroup
from stochafem.random_field import (
    CovarianceKernel,
    KLError,
    Marginal,
    assemble_covariance_problem,
    draw_samples,
    evaluate_field,
    kl_expansion,
    solve_kl_eigenproblem,
    truncation_energy,
)


def line_mesh(n, length=1.0):
    x = np.linspace(0.0, length, n)
    nodes = {i + 1: np.array([v, 0.0]) for i, v in enumerate(x)}
    elems = [Element(i, "bar", (i, i + 1), 1) for i in range(1, n)]
    return Mesh(nodes, elems, {1: PropertyGroup(E=1.0)})


def square_mesh(n=6):
    nodes, elems = {}, []
    nid = lambda i, j: i * n + j + 1
    for i in range(n):
        for j in range(n):
            nodes[nid(i, j)] = np.array([float(i), float(j)])
    k = 1
    for i in range(n - 1):
        for j in range(n - 1):
            elems.append(Element(k, "tri3", (nid(i, j), nid(i + 1, j), nid(i + 1, j + 1)), 1))
            elems.append(Element(k + 1, "tri3", (nid(i, j), nid(i + 1, j + 1), nid(i, j + 1)), 1))
            k += 2
    return Mesh(nodes, elems, {1: PropertyGroup(E=1.0)})


def analytic_exponential_eigenvalues(corr_len, half_width, count):
    """Eigenvalues of exp(-|x1 - x2| / l) on [-a, a]: lam = 2c / (w^2 + c^2), c = 1/l.

    w solves c - w tan(w a) = 0 (even modes) or w + c tan(w a) = 0 (odd modes).
    """
    c, a = 1.0 / corr_len, half_width
    eps = 1e-12
    roots = []
    for k in range(count):
        lo, hi = k * np.pi / a, (k * np.pi + np.pi / 2) / a
        roots.append(brentq(lambda w: c - w * np.tan(w * a), lo + eps, hi - eps))
        lo, hi = (k * np.pi + np.pi / 2) / a, (k + 1) * np.pi / a
        roots.append(brentq(lambda w: w + c * np.tan(w * a), lo + eps, hi - eps))
    w = np.sort(roots)[:count]
    return 2 * c / (w**2 + c**2)


def test_kernel_entries():
    k = CovarianceKernel(0.15, (24.0,))
    assert k([[3.0, 4.0]], [[3.0, 4.0]])[0, 0] == pytest.approx(0.15)
    C, _ = assemble_covariance_problem(line_mesh(3, 2.0), CovarianceKernel(1.0, (1.0,)))
    assert C[0, 2] == pytest.approx(np.exp(-2.0))
    assert np.allclose(C, C.T)


def test_kernel_validation():
    with pytest.raises(KLError):
        CovarianceKernel(0.0, (1.0,))
    with pytest.raises(KLError):
        CovarianceKernel(1.0, (1.0, -2.0))


def test_lumped_weights_sum_to_measure():
    _, W = assemble_covariance_problem(square_mesh(6), CovarianceKernel(1.0, (2.0,)))
    assert W.sum() == pytest.approx(25.0)
    _, W = assemble_covariance_problem(line_mesh(11), CovarianceKernel(1.0, (2.0,)))
    assert W[0] == pytest.approx(0.05) and W[5] == pytest.approx(0.1)


def test_analytic_eigenvalues_1d():
    kl = kl_expansion(line_mesh(200), CovarianceKernel(1.0, (1.0,)), M=5)
    ref = analytic_exponential_eigenvalues(1.0, 0.5, 5)
    assert np.all(np.abs(kl.eigenvalues - ref) <= 0.02 * ref)


def test_orthonormality_and_ordering():
    kl = kl_expansion(square_mesh(7), CovarianceKernel(2.0, (3.0, 1.5)), M=12)
    G = kl.eigenvectors.T @ (kl.weight_vector[:, None] * kl.eigenvectors)
    assert np.abs(G - np.eye(12)).max() <= 1e-8
    assert np.all(np.diff(kl.eigenvalues) <= 0) and kl.eigenvalues[-1] >= 0


def test_trace_identity_at_full_rank():
    mesh = square_mesh(5)
    kl = kl_expansion(mesh, CovarianceKernel(0.7, (2.0,)), M=mesh.n_nodes)
    assert kl.eigenvalues.sum() == pytest.approx(0.7 * kl.weight_vector.sum(), rel=1e-8)
    assert truncation_energy(kl, kl.M) == pytest.approx(1.0, abs=1e-8)
    assert truncation_energy(kl, 0) == 0.0


def test_five_modes_capture_most_energy_when_l_is_domain_length():
    kl = kl_expansion(line_mesh(200), CovarianceKernel(1.0, (1.0,)), M=5)
    assert truncation_energy(kl, 5) > 0.9


def test_sign_convention():
    kl = kl_expansion(square_mesh(5), CovarianceKernel(1.0, (2.0,)), M=6)
    for col in kl.eigenvectors.T:
        first = col[np.flatnonzero(np.abs(col) > 1e-10)[0]]
        assert first > 0


def test_clamp_and_rejection():
    # rank-one PSD matrix: tiny negative eigenvalues are clamped to zero
    v = np.array([1.0, 2.0, 3.0])
    kl = solve_kl_eigenproblem(np.outer(v, v), np.ones(3), 3)
    assert np.all(kl.eigenvalues >= 0.0)
    with pytest.raises(KLError, match="semidefinite"):
        solve_kl_eigenproblem(np.array([[1.0, 2.0], [2.0, 1.0]]), np.ones(2), 2)
    with pytest.raises(KLError):
        solve_kl_eigenproblem(np.eye(2), np.ones(2), 3)


def test_covariance_reconstruction_improves_with_M():
    mesh = square_mesh(6)
    kernel = CovarianceKernel(1.0, (2.0,))
    C, W = assemble_covariance_problem(mesh, kernel)
    full = kl_expansion(mesh, kernel, M=mesh.n_nodes)
    errs = []
    for M in (2, 5, 10, 20, mesh.n_nodes):
        modes = full.scaled_modes()[:, :M]
        errs.append(np.linalg.norm(C - modes @ modes.T))
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-8


def test_evaluate_field_cases():
    kl = kl_expansion(square_mesh(5), CovarianceKernel(1.0, (2.0,)), M=3, mean=2.5)
    assert np.array_equal(evaluate_field(kl, np.zeros(3)), kl.mean_values)
    one = kl.truncate(1)
    assert np.allclose(evaluate_field(one, [1.0]), 2.5 + np.sqrt(one.eigenvalues[0]) * one.eigenvectors[:, 0])
    with pytest.raises(KLError):
        evaluate_field(kl, np.zeros(2))


def test_empirical_covariance_matches_kernel():
    mesh = square_mesh(5)
    kernel = CovarianceKernel(1.0, (3.0,))
    C, W = assemble_covariance_problem(mesh, kernel)
    M = 8
    kl = kl_expansion(mesh, kernel, M=M)
    s = draw_samples(M, 0, 10000, seed=7)
    fields = evaluate_field(kl, s.xi)
    emp = np.cov(fields, rowvar=False)
    # in the W-weighted inner product the nuclear norm of C - C_M is the eigenvalue tail
    full = kl_expansion(mesh, kernel, M=mesh.n_nodes).eigenvalues
    tail = full[M:].sum()
    sw = np.sqrt(W)
    err = np.linalg.svd(sw[:, None] * (emp - C) * sw[None, :], compute_uv=False).sum()
    # sampling error of an R-sample covariance on the retained part, about sqrt(2/R) per unit trace
    assert err <= tail + 3 * np.sqrt(2 / 10000) * full[:M].sum()
    exact = np.linalg.svd(sw[:, None] * (kl.scaled_modes() @ kl.scaled_modes().T - C) * sw[None, :], compute_uv=False).sum()
    assert exact == pytest.approx(tail, rel=1e-8)


def test_draw_samples_moments_and_determinism():
    R = 10000
    a = draw_samples(4, 2, R, seed=11)
    b = draw_samples(4, 2, R, seed=11)
    assert np.array_equal(a.xi, b.xi) and np.array_equal(a.eta, b.eta)
    assert np.all(np.abs(a.xi.mean(axis=0)) < 4 / np.sqrt(R))
    assert np.all(np.abs(a.xi.var(axis=0) - 1) < 0.05)
    assert not np.array_equal(a.xi, draw_samples(4, 2, R, seed=12).xi)


def test_lognormal_marginal():
    m = Marginal("lognormal", 0.0, 0.3)
    s = draw_samples(3, 0, 10000, seed=3, marginals=m)
    assert np.all(s.xi > 0)
    assert np.log(s.xi).std() == pytest.approx(0.3, rel=0.03)
    assert s.xi.mean() == pytest.approx(m.mean(), rel=0.01)


def test_unknown_marginal():
    with pytest.raises(KLError, match="unknown marginal"):
        draw_samples(1, 0, 10, seed=0, marginals="uniform")


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(0, 3))
def test_sampling_shapes_and_seed_identity(seed, M, Q):
    a = draw_samples(M, Q, 50, seed)
    assert a.xi.shape == (50, M) and a.eta.shape == (50, Q)
    assert np.array_equal(a.xi, draw_samples(M, Q, 50, seed).xi)
