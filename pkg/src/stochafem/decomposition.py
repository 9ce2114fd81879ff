"""Sample-based separated solver for  K(theta) u(theta) = F(theta).

The response is built as u_k(theta) = sum_j lam_j(theta) d_j with unit,
mutually orthogonal vectors d_j and sample-uncorrelated scalars lam_j.
Each new couple alternates between

* a deterministic Galerkin solve for d_k given the samples of lam_k,
* a per-sample scalar update of lam_k given d_k,

with Gram-Schmidt orthogonalization against the accepted couples after each
half-step. All expectations are sample means over the same R realizations
that carry lam.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .fem.linalg import NotPositiveDefinite, SPDFactor
from .stochastic_system import StochasticSystem

log = logging.getLogger(__name__)

# couples whose energy fraction is below this are numerically null and discarded
NULL_ENERGY = 1e-20
FLAG_LIMIT = 0.01
DENOM_RTOL = 1e-12


class SolverError(RuntimeError):
    pass


class BasisExhausted(SolverError):
    pass


@dataclass
class SolverConfig:
    eps_global: float = 1e-6
    eps_local: float = 1e-6
    k_max: int = 20
    j_max: int = 50
    R: int = 10000
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.eps_global < 1:
            raise ValueError("eps_global must lie in (0, 1)")
        if not self.eps_local > 0:
            raise ValueError("eps_local must be positive")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.j_max < 2:
            raise ValueError("j_max must be >= 2")
        if self.R < 1:
            raise ValueError("R must be >= 1")


@dataclass
class Couple:
    d: np.ndarray
    lam: np.ndarray
    kappa: float


@dataclass
class SolutionExpansion:
    couples: list[Couple] = field(default_factory=list)
    history: list[dict] = field(default_factory=list)
    converged: bool = False

    @property
    def k(self) -> int:
        return len(self.couples)

    @property
    def D(self) -> np.ndarray:
        """N x k matrix of basis vectors."""
        if not self.couples:
            return np.zeros((0, 0))
        return np.column_stack([c.d for c in self.couples])

    @property
    def lambdas(self) -> np.ndarray:
        """R x k matrix of coefficient samples."""
        if not self.couples:
            return np.zeros((0, 0))
        return np.column_stack([c.lam for c in self.couples])

    @property
    def kappas(self) -> np.ndarray:
        return np.array([c.kappa for c in self.couples])


def sample_mean(x, axis=0):
    # numpy's pairwise summation: fixed order, independent of thread count
    return np.add.reduce(x, axis=axis) / x.shape[axis]


def estimate_cijk(xi, lambdas, i, j, k) -> float:
    """Sample mean of xi_i * lam_j * lam_k; ``xi`` includes the constant column 0."""
    return float(sample_mean(xi[:, i] * lambdas[:, j] * lambdas[:, k]))


def estimate_bkl(eta, lam_k, l) -> float:
    """Sample mean of eta_l * lam_k; ``eta`` includes the constant column 0."""
    return float(sample_mean(eta[:, l] * lam_k))


def _prior(prior, n):
    if prior is None:
        return np.zeros((n, 0))
    prior = np.asarray(prior, dtype=float)
    return prior.reshape(n, -1)


def deterministic_step(sys: StochasticSystem, prior_d, prior_lam, lam_k, KD=None):
    """Raw (unnormalized) d_k solving

        (sum_i c_ikk K_i) d_k = sum_l b_kl F_l - sum_i sum_{j<k} c_ijk K_i d_j.

    ``KD`` optionally caches K_i @ prior_d as an (M+1) x N x (k-1) array.
    """
    N, R = sys.N, sys.R
    prior_d = _prior(prior_d, N)
    prior_lam = _prior(prior_lam, R)
    lam_k = np.asarray(lam_k, dtype=float)
    c_kk = sys.xi.T @ (lam_k * lam_k) / R
    b = sys.eta.T @ lam_k / R
    rhs = b @ sys.F
    if prior_d.shape[1]:
        c_jk = sys.xi.T @ (prior_lam * lam_k[:, None]) / R
        if KD is None:
            KD = np.stack([K @ prior_d for K in sys.K_list])
        rhs = rhs - np.einsum("inj,ij->n", KD, c_jk)
    A = sys.combine_K(c_kk)
    try:
        factor = SPDFactor(A)
    except NotPositiveDefinite:
        raise SolverError(
            f"Galerkin matrix sum_i c_ikk K_i is not positive definite (c_ikk = {np.array2string(c_kk, precision=4)})"
        ) from None
    return factor.solve(rhs)


def gram_schmidt_d(d_raw, prior_d=None):
    """Orthogonalize against the prior unit vectors, then normalize."""
    d = np.array(d_raw, dtype=float)
    n0 = np.linalg.norm(d)
    prior_d = _prior(prior_d, d.shape[0])
    if n0 == 0.0:
        raise BasisExhausted("basis exhausted: zero direction")
    # second pass restores orthogonality lost to cancellation
    for _ in range(2 if prior_d.shape[1] else 0):
        d -= prior_d @ (prior_d.T @ d)
    n1 = np.linalg.norm(d)
    if n1 < 1e-12 * n0:
        raise BasisExhausted("basis exhausted: new direction lies in the span of prior couples")
    return d / n1


def _g_terms(sys: StochasticSystem, d_k, KD):
    rows = np.repeat(np.arange(sys.N), np.diff(sys.pattern.indptr))
    g_kk = sys.K_data @ (d_k[rows] * d_k[sys.pattern.indices])
    g_jk = np.einsum("inj,n->ij", KD, d_k) if KD is not None and KD.shape[2] else np.zeros((sys.M + 1, 0))
    h = sys.F @ d_k
    return g_kk, g_jk, h


def lambda_step(sys: StochasticSystem, prior_d, prior_lam, d_k, KD=None, return_flags=False):
    """Per-sample scalar update

        lam_k(r) = [sum_l h_kl eta_l(r) - sum_i sum_{j<k} g_ijk xi_i(r) lam_j(r)] / sum_i g_ikk xi_i(r)

    with g_ijk = d_k^T K_i d_j and h_kl = d_k^T F_l. Samples whose denominator
    vanishes are set to zero; more than 1 % of them is an error.
    """
    N, R = sys.N, sys.R
    prior_d = _prior(prior_d, N)
    prior_lam = _prior(prior_lam, R)
    d_k = np.asarray(d_k, dtype=float)
    if KD is None and prior_d.shape[1]:
        KD = np.stack([K @ prior_d for K in sys.K_list])
    g_kk, g_jk, h = _g_terms(sys, d_k, KD)
    num = sys.eta @ h
    if prior_d.shape[1]:
        num = num - np.sum((sys.xi @ g_jk) * prior_lam, axis=1)
    den = sys.xi @ g_kk
    tol = DENOM_RTOL * abs(float(sample_mean(sys.xi) @ g_kk))
    flagged = np.abs(den) <= tol
    n_flag = int(flagged.sum())
    if n_flag > FLAG_LIMIT * R:
        raise SolverError(f"{n_flag} of {R} samples have a vanishing scalar-equation denominator")
    lam = np.divide(num, den, out=np.zeros(R), where=~flagged)
    return (lam, n_flag) if return_flags else lam


def gram_schmidt_lambda(lam_k, prior_lam=None):
    """lam_k - sum_i (E[lam_k lam_i] / E[lam_i^2]) lam_i, expectations as sample means."""
    lam = np.array(lam_k, dtype=float)
    prior_lam = _prior(prior_lam, lam.shape[0])
    if not prior_lam.shape[1]:
        return lam
    kappa = sample_mean(prior_lam * prior_lam)
    if np.any(kappa < 1e-300):
        raise SolverError("degenerate prior couple with zero second moment")
    for _ in range(2):
        lam -= prior_lam @ ((prior_lam.T @ lam) / lam.shape[0] / kappa)
    return lam


def local_error(d_new, d_old) -> float:
    return float(np.linalg.norm(np.asarray(d_new) - np.asarray(d_old)))


def global_error(kappas) -> float:
    """Energy fraction of the newest couple, kappa_k / sum_{i<=k} kappa_i."""
    kappas = np.asarray(kappas, dtype=float)
    total = kappas.sum()
    return float(kappas[-1] / total) if total > 0 else 0.0


def global_error_full(D, lambdas) -> float:
    """Unsimplified ratio E|lam_k d_k|^2 / E|u_k|^2 without assuming bi-orthogonality (audit)."""
    L = np.asarray(lambdas)
    D = np.asarray(D)
    G = sample_mean(L[:, :, None] * L[:, None, :])
    total = float(np.sum(G * (D.T @ D)))
    last = float(G[-1, -1] * (D[:, -1] @ D[:, -1]))
    return last / total if total > 0 else 0.0


def _sign_convention(d, lam):
    nz = np.flatnonzero(np.abs(d) > 1e-10)
    if nz.size and d[nz[0]] < 0:
        return -d, -lam
    return d, lam


def solve(sys: StochasticSystem, config: SolverConfig) -> SolutionExpansion:
    """Build couples one at a time until the newest couple's energy fraction is below eps_global.

    A SolverError raised mid-run carries the partial expansion as ``exc.partial``.
    """
    out = SolutionExpansion()
    try:
        return _solve(sys, config, out)
    except SolverError as exc:
        exc.partial = out
        raise


def _solve(sys: StochasticSystem, config: SolverConfig, out: SolutionExpansion) -> SolutionExpansion:
    rng = np.random.default_rng([config.seed, 1])
    N, R = sys.N, sys.R
    D = np.zeros((N, 0))
    L = np.zeros((R, 0))
    KD = np.zeros((sys.M + 1, N, 0))
    for k in range(1, config.k_max + 1):
        lam = gram_schmidt_lambda(rng.standard_normal(R), L)
        d_old = None
        trace = []
        flagged = 0
        inner_ok = False
        exhausted = False
        for j in range(1, config.j_max + 1):
            try:
                d = gram_schmidt_d(deterministic_step(sys, D, L, lam, KD), D)
            except BasisExhausted:
                exhausted = True
                break
            lam, n_flag = lambda_step(sys, D, L, d, KD, return_flags=True)
            flagged = max(flagged, n_flag)
            lam = gram_schmidt_lambda(lam, L)
            err = float("inf") if d_old is None else local_error(d, d_old)
            # first iterate has no predecessor; recorded as None
            trace.append(None if d_old is None else err)
            if err <= config.eps_local:
                inner_ok = True
                break
            d_old = d
        record = {"k": k, "iterations": len(trace), "local_errors": trace, "flagged_samples": flagged}
        if exhausted:
            record.update(status="exhausted", global_error=0.0)
            out.history.append(record)
            out.converged = True
            log.info("couple %d: basis exhausted, stopping", k)
            break
        kappa = float(sample_mean(lam * lam))
        total = float(np.sum(out.kappas)) + kappa if out.couples else kappa
        eps_g = kappa / total if total > 0 else 0.0
        if out.couples and eps_g < NULL_ENERGY:
            record.update(status="null", global_error=eps_g, kappa=kappa)
            out.history.append(record)
            out.converged = True
            log.info("couple %d: numerically null contribution, stopping", k)
            break
        if k == 1 and kappa == 0.0:
            record.update(status="null", global_error=0.0, kappa=0.0)
            out.history.append(record)
            out.converged = True
            break
        if not inner_ok:
            warnings.warn(f"couple {k}: inner iteration hit j_max={config.j_max}", RuntimeWarning)
        d, lam = _sign_convention(d, lam)
        out.couples.append(Couple(d, lam, kappa))
        record.update(status="accepted" if inner_ok else "accepted-jmax", global_error=eps_g, kappa=kappa)
        out.history.append(record)
        log.info("couple %d: %d inner iterations, global error %.3e", k, len(trace), eps_g)
        D = np.column_stack([D, d])
        L = np.column_stack([L, lam])
        KD = np.concatenate([KD, np.stack([K @ d for K in sys.K_list])[:, :, None]], axis=2)
        if eps_g <= config.eps_global:
            out.converged = True
            break
    return out


def evaluate_solution(expansion: SolutionExpansion, rows=None, dofs=None) -> np.ndarray:
    """Response samples u_k(theta_r) = sum_j lam_j(theta_r) d_j, restricted to rows and DOFs."""
    if not expansion.couples:
        raise ValueError("empty expansion")
    L = expansion.lambdas
    D = expansion.D
    if rows is not None:
        L = L[rows]
    if dofs is not None:
        D = D[dofs]
    return L @ D.T
