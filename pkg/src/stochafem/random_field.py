"""Karhunen-Loeve discretization of random fields on a finite element mesh.

The Fredholm eigenproblem is collocated at mesh nodes with lumped integration
weights W, giving  diag(W) C diag(W) w = lam diag(W) w.  The similarity
transform diag(sqrt W) C diag(sqrt W) turns it into a standard symmetric
eigenproblem.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .fem.mesh import ELEMENT_NODES, Mesh, MeshError, element_measure

DENSE_EIGEN_LIMIT = 2000
CLAMP_RTOL = 1e-12


class KLError(ValueError):
    pass


@dataclass(frozen=True)
class CovarianceKernel:
    """Separable exponential kernel  sigma2 * exp(-sum_d |dx_d| / l_d)."""

    sigma2: float
    corr_len: tuple[float, ...]
    kind: str = "separable-exponential"

    def __post_init__(self):
        if self.kind != "separable-exponential":
            raise KLError(f"unsupported kernel {self.kind!r}")
        if not self.sigma2 > 0:
            raise KLError("sigma2 must be positive")
        object.__setattr__(self, "corr_len", tuple(float(v) for v in np.atleast_1d(self.corr_len)))
        if any(not l > 0 for l in self.corr_len):
            raise KLError("correlation lengths must be positive")

    def __call__(self, x1, x2):
        x1 = np.atleast_2d(np.asarray(x1, dtype=float))
        x2 = np.atleast_2d(np.asarray(x2, dtype=float))
        lengths = self._lengths(x1.shape[1])
        d = np.zeros((x1.shape[0], x2.shape[0]))
        for ax, l in enumerate(lengths):
            d += np.abs(x1[:, ax, None] - x2[None, :, ax]) / l
        return self.sigma2 * np.exp(-d)

    def _lengths(self, dim):
        if len(self.corr_len) == 1:
            return self.corr_len * dim
        if len(self.corr_len) < dim:
            raise KLError(f"kernel has {len(self.corr_len)} correlation lengths for a {dim}D mesh")
        return self.corr_len[:dim]


@dataclass
class KLExpansion:
    mean_values: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # n_nodes x M, columns are modes
    weight_vector: np.ndarray
    total_variance: float  # sum_a W[a] * sigma2, the trace of the weighted operator
    node_ids: list = field(default_factory=list)

    @property
    def M(self) -> int:
        return len(self.eigenvalues)

    def truncate(self, M: int) -> "KLExpansion":
        if M > self.M:
            raise KLError(f"expansion has only {self.M} modes")
        return KLExpansion(
            self.mean_values,
            self.eigenvalues[:M].copy(),
            self.eigenvectors[:, :M].copy(),
            self.weight_vector,
            self.total_variance,
            self.node_ids,
        )

    def with_mean(self, mean) -> "KLExpansion":
        mean = np.broadcast_to(np.asarray(mean, dtype=float), self.weight_vector.shape).copy()
        return KLExpansion(mean, self.eigenvalues, self.eigenvectors, self.weight_vector, self.total_variance, self.node_ids)

    def scaled_modes(self) -> np.ndarray:
        """Columns sqrt(lam_i) * w_i."""
        return self.eigenvectors * np.sqrt(self.eigenvalues)


def lumped_weights(mesh: Mesh) -> np.ndarray:
    """Node integration weights: each element gives measure / n_nodes to each of its nodes."""
    W = np.zeros(mesh.n_nodes)
    for e in mesh.elements:
        m = element_measure(mesh.element_coords(e))
        if m <= 0.0:
            raise MeshError(f"element {e.id}: degenerate geometry (zero measure)")
        for a in mesh.element_node_index(e):
            W[a] += m / ELEMENT_NODES[e.kind]
    return W


def assemble_covariance_problem(mesh: Mesh, kernel: CovarianceKernel):
    """Return (C, W): kernel evaluated between all node pairs and lumped node weights."""
    if mesh.n_nodes < 2:
        raise KLError("mesh needs at least 2 nodes")
    C = kernel(mesh.coords, mesh.coords)
    C = 0.5 * (C + C.T)
    return C, lumped_weights(mesh)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    for i in range(vectors.shape[1]):
        col = vectors[:, i]
        nz = np.flatnonzero(np.abs(col) > 1e-10)
        if nz.size and col[nz[0]] < 0:
            vectors[:, i] = -col
    return vectors


def solve_kl_eigenproblem(C, W, M: int, total_variance: float | None = None) -> KLExpansion:
    """M largest eigenpairs of the node-collocated Fredholm problem, W-orthonormal modes."""
    C = np.asarray(C, dtype=float)
    W = np.asarray(W, dtype=float)
    n = C.shape[0]
    if not 0 <= M <= n:
        raise KLError(f"truncation order M={M} must lie in [0, {n}]")
    if np.any(W <= 0):
        raise KLError("node weights must be strictly positive (unattached node?)")
    sw = np.sqrt(W)
    S = sw[:, None] * C * sw[None, :]
    if total_variance is None:
        total_variance = float(np.trace(S))
    if M == 0:
        return KLExpansion(np.zeros(n), np.zeros(0), np.zeros((n, 0)), W, total_variance)
    try:
        if n <= DENSE_EIGEN_LIMIT or M >= n - 1:
            vals, vecs = sla.eigh(S, subset_by_index=[n - M, n - 1])
            lam_max = vals[-1]
        else:
            vals, vecs = spla.eigsh(S, k=M, which="LA", v0=np.ones(n) / np.sqrt(n))
            lam_max = vals.max()
    except (np.linalg.LinAlgError, spla.ArpackNoConvergence) as exc:
        raise KLError(f"eigen-solver did not converge: {exc}") from None
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    tol = CLAMP_RTOL * max(lam_max, 0.0)
    if np.any(vals < -tol):
        raise KLError("negative eigenvalue: kernel is not positive semidefinite on this mesh")
    vals = np.where(vals < 0.0, 0.0, vals)
    modes = _fix_signs(vecs / sw[:, None])
    return KLExpansion(np.zeros(n), vals, modes, W, total_variance)


def kl_expansion(mesh: Mesh, kernel: CovarianceKernel, M: int, mean=0.0) -> KLExpansion:
    C, W = assemble_covariance_problem(mesh, kernel)
    kl = solve_kl_eigenproblem(C, W, M, total_variance=float(W.sum() * kernel.sigma2))
    kl = kl.with_mean(mean)
    kl.node_ids = list(mesh.node_ids)
    return kl


def evaluate_field(kl: KLExpansion, xi_row) -> np.ndarray:
    """Field values at every node: mean + sum_i xi_i sqrt(lam_i) w_i.

    ``xi_row`` may also be an R x M matrix, giving one field per row.
    """
    xi = np.asarray(xi_row, dtype=float)
    if xi.shape[-1] != kl.M:
        raise KLError(f"expected {kl.M} coefficients, got {xi.shape[-1]}")
    return kl.mean_values + xi @ kl.scaled_modes().T


def truncation_energy(kl: KLExpansion, M: int) -> float:
    if M < 0 or M > kl.M:
        raise KLError(f"M={M} outside the available {kl.M} modes")
    if kl.total_variance <= 0:
        return 0.0
    return float(np.sum(kl.eigenvalues[:M]) / kl.total_variance)


# ---------------------------------------------------------------------------
# sampling of the expansion variables

MARGINALS = ("standard-normal", "normal", "lognormal")


@dataclass(frozen=True)
class Marginal:
    """Distribution of one input variable.

    For ``lognormal``, ``mu`` and ``sigma`` are the mean and standard deviation
    of log(xi); ``sigma`` is a standard deviation, not a variance.
    """

    kind: str = "standard-normal"
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in MARGINALS:
            raise KLError(f"unknown marginal {self.kind!r}; expected one of {MARGINALS}")
        if self.sigma < 0:
            raise KLError("marginal sigma must be non-negative")

    @classmethod
    def parse(cls, spec) -> "Marginal":
        if isinstance(spec, Marginal):
            return spec
        if isinstance(spec, str):
            return cls(spec)
        spec = dict(spec)
        return cls(spec.pop("kind", "standard-normal"), float(spec.pop("mu", 0.0)), float(spec.pop("sigma", 1.0)))

    def transform(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "standard-normal":
            return z
        if self.kind == "normal":
            return self.mu + self.sigma * z
        return np.exp(self.mu + self.sigma * z)

    def mean(self) -> float:
        if self.kind == "standard-normal":
            return 0.0
        if self.kind == "normal":
            return self.mu
        return float(np.exp(self.mu + 0.5 * self.sigma**2))


@dataclass
class SampleSet:
    xi: np.ndarray  # R x M
    eta: np.ndarray  # R x Q
    seed: int

    @property
    def R(self) -> int:
        return self.xi.shape[0]


def _marginal_list(marginals, n):
    if marginals is None or isinstance(marginals, (str, Marginal, dict)):
        return [Marginal.parse(marginals or "standard-normal")] * n
    marginals = [Marginal.parse(m) for m in marginals]
    if len(marginals) != n:
        raise KLError(f"expected {n} marginals, got {len(marginals)}")
    return marginals


def draw_samples(M: int, Q: int, R: int, seed: int, marginals=None, load_marginals=None) -> SampleSet:
    """R independent realizations of M stiffness and Q load variables.

    All M + Q columns come from one standard-normal block drawn from
    ``numpy.random.default_rng(seed)`` and are mapped through their marginals.
    """
    if R < 1:
        raise KLError("R must be >= 1")
    mx = _marginal_list(marginals, M)
    me = _marginal_list(load_marginals if load_marginals is not None else marginals, Q) if Q else []
    z = np.random.default_rng(seed).standard_normal((R, M + Q))
    xi = np.empty((R, M))
    eta = np.empty((R, Q))
    for i, m in enumerate(mx):
        xi[:, i] = m.transform(z[:, i])
    for l, m in enumerate(me):
        eta[:, l] = m.transform(z[:, M + l])
    return SampleSet(xi, eta, seed)
