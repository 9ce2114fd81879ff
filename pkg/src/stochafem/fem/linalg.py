"""Symmetric positive definite factor-and-solve."""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_LIMIT = 200


class NotPositiveDefinite(np.linalg.LinAlgError):
    pass


class SPDFactor:
    """Reusable factorization of an SPD matrix.

    Small systems use a dense Cholesky factor. Larger ones use SuperLU in
    symmetric mode with diagonal pivoting only, so the factorization is an
    LDL^T in disguise and positive pivots certify positive definiteness.
    """

    def __init__(self, K):
        self.K = K
        n = K.shape[0]
        self.n = n
        if n <= DENSE_LIMIT:
            A = K.toarray() if sp.issparse(K) else np.asarray(K, dtype=float)
            try:
                self._cho = sla.cho_factor(A, lower=True, check_finite=True)
            except np.linalg.LinAlgError:
                raise NotPositiveDefinite("matrix not positive definite") from None
            if not np.all(np.diag(self._cho[0]) > 0.0):
                raise NotPositiveDefinite("matrix not positive definite")
            self._lu = None
        else:
            A = sp.csc_matrix(K)
            try:
                lu = spla.splu(
                    A,
                    permc_spec="MMD_AT_PLUS_A",
                    diag_pivot_thresh=0.0,
                    options={"SymmetricMode": True},
                )
            except RuntimeError:
                raise NotPositiveDefinite("matrix not positive definite") from None
            if not np.array_equal(lu.perm_r, lu.perm_c) or not np.all(lu.U.diagonal() > 0.0):
                raise NotPositiveDefinite("matrix not positive definite")
            self._lu = lu
            self._cho = None

    def _raw_solve(self, b):
        if self._lu is not None:
            return self._lu.solve(b)
        return sla.cho_solve(self._cho, b, check_finite=False)

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        x = self._raw_solve(b)
        r = b - self.K @ x
        nb = np.linalg.norm(b)
        if nb > 0 and np.linalg.norm(r) > 1e-12 * nb:
            x = x + self._raw_solve(r)
        return x


def solve_spd(K, f):
    """Solve K u = f for symmetric positive definite K."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] != K.shape[0]:
        raise ValueError("right-hand side length does not match matrix size")
    return SPDFactor(K).solve(f)
