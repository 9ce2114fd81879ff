"""Affine stochastic system construction and evaluation."""
import numpy as np
import pytest
import scipy.sparse as sp

from stochafem import meshgen
from stochafem.config import build_problem, load_config
from stochafem.fem import DofMap, element_stiffness_list
from stochafem.random_field import CovarianceKernel, KLExpansion, Marginal, SampleSet, draw_samples, kl_expansion
from stochafem.stochastic_system import (
    StochasticSystem,
    StochasticSystemError,
    build_from_load_field,
    build_from_modulus_field,
    centroid_field_weights,
    screen_positive_field,
)

CONFIGS = __import__("pathlib").Path(__file__).resolve().parents[1] / "configs"


def constant_kl(mesh, mean, modes, eigenvalues):
    n = mesh.n_nodes
    vecs = np.column_stack([np.full(n, c) for c in modes]) if modes else np.zeros((n, 0))
    return KLExpansion(np.full(n, float(mean)), np.asarray(eigenvalues, float), vecs, np.ones(n), 1.0, list(mesh.node_ids))


@pytest.fixture(scope="module")
def small_tunnel():
    m = meshgen.tunnel_like_mesh(half_width=16.0, n_theta=32, grid=4.0)
    return m, DofMap(m)


def test_mean_only_field_is_deterministic(small_tunnel):
    mesh, dm = small_tunnel
    K_data = build_from_modulus_field(mesh, dm, constant_kl(mesh, 1.0, [], []))
    assert K_data.shape[0] == 1
    ref = dm.pattern.data(element_stiffness_list(mesh))
    assert np.allclose(K_data[0], ref, rtol=1e-14, atol=0)


def test_constant_mode_is_proportional(small_tunnel):
    mesh, dm = small_tunnel
    c, lam = 0.3, 0.04
    K_data = build_from_modulus_field(mesh, dm, constant_kl(mesh, 1.0, [c], [lam]))
    ref = c * np.sqrt(lam) * K_data[0]
    assert np.abs(K_data[1] - ref).max() <= 1e-13 * np.abs(ref).max()


def test_non_positive_mean_rejected(small_tunnel):
    mesh, dm = small_tunnel
    with pytest.raises(StochasticSystemError, match="non-positive"):
        build_from_modulus_field(mesh, dm, constant_kl(mesh, -1.0, [], []))


def test_pylon_affine_family():
    p = build_problem(load_config(CONFIGS / "pylon_like.yaml"))
    s = p.system
    assert s.M == 4 and s.Q == 2 and len(s.K_list) == 5 and len(s.F_list()) == 3
    assert np.all(s.K_data[0] == 0.0)
    mesh, dm = p.mesh, p.dofmap
    axial = dm.pattern.data(element_stiffness_list(mesh, part="axial"))
    bending = dm.pattern.data(element_stiffness_list(mesh, part="bending"))
    assert np.allclose(s.K_data[1], axial) and np.allclose(s.K_data[2], 0.2 * axial)
    assert np.allclose(s.K_data[3], bending) and np.allclose(s.K_data[4], 0.2 * bending)
    # (1 + xi5 + xi6) P with P = 1000 N downward at the arm tip
    tip = dm.index(33, "y")
    for F in s.F_list():
        assert F[tip] == -1000.0 and np.count_nonzero(F) == 1
    assert np.all(s.xi[:, 1:] > 0)
    assert np.allclose(s.eta[:, 1:].std(axis=0), 0.1, rtol=0.03)


def test_roof_load_field_mean():
    cfg = load_config(CONFIGS / "roof_like.yaml")
    p = build_problem(cfg)
    s = p.system
    top = meshgen.roof_top_nodes(p.mesh)
    loaded = [p.dofmap.index(n, "z") for n in top if p.dofmap.index(n, "z") >= 0]
    # 10 kN downward at every free top DOF
    assert np.allclose(s.F[0, loaded], -10_000.0)
    assert np.count_nonzero(s.F[0]) == len(loaded)
    assert np.allclose(s.combine_F(np.r_[1.0, np.zeros(s.Q)]), s.F[0])
    assert s.M == 0 and s.Q == 10


def test_load_field_mean_only():
    mesh = meshgen.roof_like_mesh(nx=4, ny=4)
    dm = DofMap(mesh)
    kl = kl_expansion(mesh.submesh(meshgen.roof_top_nodes(mesh)), CovarianceKernel(1.0, (5.0,)), 0, mean=2.0)
    F = build_from_load_field(mesh, dm, kl, letter="z", sign=-1.0)
    assert F.shape == (1, dm.N)


def _tiny_system(rng, M=2, R=5):
    mesh = meshgen.smoke_mesh()
    dm = DofMap(mesh)
    base = dm.pattern.data(element_stiffness_list(mesh))
    K_data = np.array([base] + [rng.uniform(0.1, 0.5) * base for _ in range(M)])
    return StochasticSystem(dm.pattern, K_data, np.array([[1.0]]), draw_samples(M, 0, R, seed=1))


def test_evaluate_at_sample(pylon, rng):
    mesh, dm = pylon
    base = dm.pattern.data(element_stiffness_list(mesh))
    K1 = dm.pattern.data(element_stiffness_list(mesh, part="axial"))
    s = StochasticSystem(dm.pattern, np.array([base, K1]), np.ones((1, dm.N)), SampleSet(np.array([[0.0], [2.0]]), np.zeros((2, 0)), 0))
    K, F = s.evaluate_at_sample(0)
    assert np.array_equal(K.toarray(), dm.pattern.matrix(base).toarray())
    K, _ = s.evaluate_at_sample(1)
    assert np.allclose(K.toarray(), dm.pattern.matrix(base + 2 * K1).toarray())
    assert abs(K - K.T).max() <= 1e-12 * abs(K).max()
    assert np.array_equal(K.indices, dm.pattern.indices)
    with pytest.raises(IndexError):
        s.evaluate_at_sample(2)


def test_affine_in_xi(rng):
    s = _tiny_system(rng)
    a, b = rng.standard_normal(3), rng.standard_normal(3)
    lhs = s.combine_K(0.4 * a + 1.3 * b).toarray()
    rhs = 0.4 * s.combine_K(a).toarray() + 1.3 * s.combine_K(b).toarray()
    assert np.allclose(lhs, rhs, rtol=1e-13)


def test_non_positive_diagonal_warns(rng):
    s = _tiny_system(rng, M=1, R=1)
    s.xi[0, 1] = -1e3
    with pytest.warns(RuntimeWarning, match="non-positive"):
        s.evaluate_at_sample(0)


def test_shape_mismatch_rejected(rng):
    s = _tiny_system(rng, M=2)
    with pytest.raises(StochasticSystemError):
        StochasticSystem(s.pattern, s.K_data, s.F, draw_samples(3, 0, 5, seed=0))


def test_positivity_screen(small_tunnel):
    mesh, dm = small_tunnel
    kl = kl_expansion(mesh, CovarianceKernel(0.5, (5.0,)), M=3, mean=1.0)
    w = centroid_field_weights(mesh, kl)
    samples = draw_samples(3, 0, 2000, seed=5)
    screened, redraws = screen_positive_field(samples, w, ["standard-normal"] * 3)
    field = w[:, 0] + screened.xi @ w[:, 1:].T
    assert redraws > 0 and np.all(field > 0)
    again, n2 = screen_positive_field(samples, w, ["standard-normal"] * 3)
    assert n2 == redraws and np.array_equal(again.xi, screened.xi)


def test_residuals_of_exact_solutions(rng):
    s = _tiny_system(rng, M=2, R=5)
    U = np.array([[s.combine_F(s.eta[r])[0] / s.combine_K(s.xi[r]).toarray()[0, 0]] for r in range(5)])
    assert np.all(s.residuals(U) < 1e-14)
