"""Affine stochastic system  (sum_i xi_i K_i) u = sum_l eta_l F_l.

All K_i share one sparsity pattern, so they are stored as rows of a dense
(M+1) x nnz data block and any combination sum_i a_i K_i is a single
vector-matrix product on that block.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .fem.assembly import AssemblyPattern, DofMap, element_stiffness_list
from .fem.mesh import Mesh
from .random_field import KLExpansion, Marginal, SampleSet

log = logging.getLogger(__name__)


class StochasticSystemError(ValueError):
    pass


@dataclass
class StochasticSystem:
    pattern: AssemblyPattern
    K_data: np.ndarray  # (M+1) x nnz
    F: np.ndarray  # (Q+1) x N
    samples: SampleSet
    rejected: int = 0

    def __post_init__(self):
        self.K_data = np.atleast_2d(np.asarray(self.K_data, dtype=float))
        self.F = np.atleast_2d(np.asarray(self.F, dtype=float))
        if self.K_data.shape[1] != self.pattern.nnz:
            raise StochasticSystemError("stiffness data does not match the sparsity pattern")
        if self.F.shape[1] != self.pattern.n:
            raise StochasticSystemError("load vectors do not match the DOF count")
        R = self.samples.R
        if self.samples.xi.shape[1] != self.M or self.samples.eta.shape[1] != self.Q:
            raise StochasticSystemError(
                f"sample set has {self.samples.xi.shape[1]}+{self.samples.eta.shape[1]} variables, "
                f"system needs {self.M}+{self.Q}"
            )
        self.xi = np.hstack([np.ones((R, 1)), self.samples.xi])
        self.eta = np.hstack([np.ones((R, 1)), self.samples.eta])
        self._K_list = None

    @property
    def N(self) -> int:
        return self.pattern.n

    @property
    def M(self) -> int:
        return self.K_data.shape[0] - 1

    @property
    def Q(self) -> int:
        return self.F.shape[0] - 1

    @property
    def R(self) -> int:
        return self.samples.R

    @property
    def K_list(self):
        if self._K_list is None:
            self._K_list = [self.pattern.matrix(d) for d in self.K_data]
        return self._K_list

    def F_list(self):
        return list(self.F)

    def combine_K(self, coef):
        """Sparse matrix sum_i coef_i K_i over the shared pattern."""
        return self.pattern.matrix(np.asarray(coef, dtype=float) @ self.K_data)

    def combine_F(self, coef):
        return np.asarray(coef, dtype=float) @ self.F

    def mean_matrix(self):
        """Stiffness at the sample-mean input, sum_i E[xi_i] K_i."""
        return self.combine_K(self.xi.mean(axis=0))

    def evaluate_at_sample(self, r: int):
        if not 0 <= r < self.R:
            raise IndexError(f"sample {r} out of range [0, {self.R})")
        K = self.combine_K(self.xi[r])
        if np.any(K.diagonal() <= 0.0):
            warnings.warn(f"sample {r}: non-positive stiffness diagonal, matrix is not SPD", RuntimeWarning)
        return K, self.combine_F(self.eta[r])

    def residuals(self, U, rows=None, chunk=512):
        """Relative residuals ||K(theta_r) u_r - F(theta_r)|| / ||F(theta_r)|| for rows of U."""
        rows = np.arange(self.R) if rows is None else np.asarray(rows)
        out = np.empty(len(rows))
        Ks = self.K_list
        for s in range(0, len(rows), chunk):
            idx = rows[s : s + chunk]
            u = U[s : s + chunk]
            Ku = np.zeros_like(u)
            for i, K in enumerate(Ks):
                Ku += self.xi[idx, i : i + 1] * (K @ u.T).T
            f = self.eta[idx] @ self.F
            out[s : s + chunk] = np.linalg.norm(Ku - f, axis=1) / np.linalg.norm(f, axis=1)
        return out


def centroid_field_weights(mesh: Mesh, kl: KLExpansion) -> np.ndarray:
    """Per-element centroid values: column 0 the mean, column i the scaled mode sqrt(lam_i) w_i.

    The centroid value of a linear interpolant is the average of its nodal values.
    """
    index = {n: a for a, n in enumerate(kl.node_ids or mesh.node_ids)}
    nodal = np.hstack([kl.mean_values[:, None], kl.scaled_modes()])
    out = np.empty((len(mesh.elements), nodal.shape[1]))
    for k, e in enumerate(mesh.elements):
        out[k] = nodal[[index[n] for n in e.nodes]].mean(axis=0)
    return out


def build_from_modulus_field(mesh: Mesh, dofmap: DofMap, kl: KLExpansion) -> np.ndarray:
    """Stiffness data block [K_0, K_1, ..., K_M] for a modulus field D0 * (w0 + sum xi sqrt(lam) w).

    Element matrices use the field value at the element centroid.
    """
    weights = centroid_field_weights(mesh, kl)
    bad = np.flatnonzero(weights[:, 0] <= 0.0)
    if bad.size:
        raise StochasticSystemError(f"modulus field mean is non-positive at element {mesh.elements[bad[0]].id}")
    pattern = dofmap.pattern
    unit = element_stiffness_list(mesh)
    return np.array([pattern.data([w * k for w, k in zip(weights[:, i], unit)]) for i in range(weights.shape[1])])


def build_from_load_field(
    mesh: Mesh, dofmap: DofMap, kl: KLExpansion, letter: str = "z", sign: float = -1.0, scale: float = 1.0
) -> np.ndarray:
    """Load vectors [F_0, ..., F_M] from a nodal load field acting along DOF ``letter``.

    F_0 carries the mean values, F_i the scaled modes; ``scale`` converts field units to force.
    """
    nodal = np.hstack([kl.mean_values[:, None], kl.scaled_modes()]) * (sign * scale)
    F = np.zeros((nodal.shape[1], dofmap.N))
    for a, nid in enumerate(kl.node_ids):
        i = dofmap.index(nid, letter)
        if i >= 0:
            F[:, i] += nodal[a]
    return F


def screen_positive_field(samples: SampleSet, weights: np.ndarray, marginals, max_rounds: int = 1000):
    """Redraw stiffness rows whose field value is non-positive at any element centroid.

    Replacement rows come from a stream derived from the sample seed, so the
    screened set stays reproducible. Returns (screened samples, number of redraws).
    """
    marginals = [Marginal.parse(m) for m in marginals]
    xi = samples.xi.copy()
    rng = np.random.default_rng([samples.seed, 2])
    redraws = 0
    for _ in range(max_rounds):
        field = weights[:, 0] + xi @ weights[:, 1:].T
        bad = np.flatnonzero(np.any(field <= 0.0, axis=1))
        if bad.size == 0:
            break
        redraws += bad.size
        z = rng.standard_normal((bad.size, xi.shape[1]))
        for i, m in enumerate(marginals):
            xi[bad, i] = m.transform(z[:, i])
    else:
        raise StochasticSystemError("could not draw enough admissible samples; field variance too large")
    if redraws:
        log.warning("rejected and redrew %d samples with non-positive modulus", redraws)
    return SampleSet(xi, samples.eta, samples.seed), redraws
