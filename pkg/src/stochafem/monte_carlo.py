"""Brute-force reference: factor and solve the full system for every sample."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .fem.linalg import NotPositiveDefinite, SPDFactor
from .stochastic_system import StochasticSystem

log = logging.getLogger(__name__)

REJECT_LIMIT = 0.01


class MonteCarloError(RuntimeError):
    pass


@dataclass
class MCResult:
    responses: np.ndarray  # R x len(dofs); rejected rows are NaN
    rejected: int
    wall_time: float
    rows: np.ndarray
    dofs: np.ndarray

    @property
    def accepted(self) -> np.ndarray:
        return ~np.isnan(self.responses).any(axis=1)


def _solve_rows(sys, rows, dofs):
    out = np.full((len(rows), len(dofs)), np.nan)
    rejected = 0
    for a, r in enumerate(rows):
        K = sys.combine_K(sys.xi[r])
        f = sys.combine_F(sys.eta[r])
        try:
            u = SPDFactor(K).solve(f)
        except NotPositiveDefinite:
            rejected += 1
            continue
        out[a] = u[dofs]
    return out, rejected


def mc_solve(sys: StochasticSystem, rows=None, dofs=None, threads: int = 1, chunk: int = 256) -> MCResult:
    """Solve K(theta_r) u = F(theta_r) for each requested sample; keep the requested DOFs.

    Work is split into fixed chunks of sample indices and reassembled in index
    order, so the result does not depend on ``threads``.
    """
    rows = np.arange(sys.R) if rows is None else np.asarray(rows, dtype=np.int64)
    dofs = np.arange(sys.N) if dofs is None else np.asarray(dofs, dtype=np.int64)
    t0 = time.perf_counter()
    chunks = [rows[s : s + chunk] for s in range(0, len(rows), chunk)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _solve_rows(sys, c, dofs), chunks))
    else:
        parts = [_solve_rows(sys, c, dofs) for c in chunks]
    responses = np.vstack([p[0] for p in parts]) if parts else np.zeros((0, len(dofs)))
    rejected = sum(p[1] for p in parts)
    wall = time.perf_counter() - t0
    if rejected:
        log.warning("%d of %d samples gave a non-SPD stiffness and were rejected", rejected, len(rows))
    if rejected > REJECT_LIMIT * len(rows):
        raise MonteCarloError(f"{rejected} of {len(rows)} samples rejected as non-SPD; inputs implausible")
    return MCResult(responses, rejected, wall, rows, dofs)
