"""Moments, kernel density estimates and distribution distances."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid

GRID_POINTS = 512


class DegenerateSample(ValueError):
    pass


@dataclass
class PdfEstimate:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float


def moment_fields(responses):
    """Per-column sample mean and unbiased variance of an R x n response matrix."""
    x = np.asarray(responses, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    # shift by the first row so constant columns give exactly zero variance
    y = x - x[0]
    ybar = y.mean(axis=0)
    var = ((y - ybar) ** 2).sum(axis=0) / (x.shape[0] - 1)
    return x[0] + ybar, var


def silverman_bandwidth(samples) -> float:
    x = np.asarray(samples, dtype=float)
    return 1.06 * float(np.std(x, ddof=1)) * len(x) ** (-0.2)


def _kde(samples, h, grid, chunk=64):
    x = np.asarray(samples, dtype=float)
    out = np.empty(len(grid))
    norm = 1.0 / (len(x) * h * np.sqrt(2.0 * np.pi))
    for s in range(0, len(grid), chunk):
        z = (grid[s : s + chunk, None] - x[None, :]) / h
        out[s : s + chunk] = np.exp(-0.5 * z * z).sum(axis=1) * norm
    return out


def _check(samples):
    x = np.asarray(samples, dtype=float).ravel()
    if len(x) < 2 or np.ptp(x) == 0.0:
        raise DegenerateSample("degenerate sample: zero spread")
    return x


def estimate_pdf(samples) -> PdfEstimate:
    """Gaussian KDE, Silverman bandwidth 1.06 sd R^(-1/5), on 512 points over [min - 3h, max + 3h]."""
    x = _check(samples)
    h = silverman_bandwidth(x)
    grid = np.linspace(x.min() - 3 * h, x.max() + 3 * h, GRID_POINTS)
    return PdfEstimate(grid, _kde(x, h, grid), h)


def paired_pdfs(a, b):
    """Both KDEs (own Silverman bandwidths) on one grid spanning both samples plus 3 h_max."""
    a = _check(a)
    b = _check(b)
    ha, hb = silverman_bandwidth(a), silverman_bandwidth(b)
    h = max(ha, hb)
    grid = np.linspace(min(a.min(), b.min()) - 3 * h, max(a.max(), b.max()) + 3 * h, GRID_POINTS)
    return grid, _kde(a, ha, grid), _kde(b, hb, grid)


def pdf_distance(a, b):
    """(L1 distance between the two KDEs on a merged grid, two-sample KS statistic)."""
    grid, pa, pb = paired_pdfs(a, b)
    l1 = float(trapezoid(np.abs(pa - pb), grid))
    # only the statistic is used; the asymptotic p-value path avoids the exact enumeration
    ks = float(stats.ks_2samp(np.ravel(a), np.ravel(b), method="asymp").statistic)
    return l1, ks
