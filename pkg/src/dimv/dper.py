"""Direct maximum-likelihood estimation of mean and covariance (DPER).

Each off-diagonal covariance is estimated from its own feature pair: the
bivariate normal likelihood, profiled over the means and variances, leaves a
function ``eta`` of the covariance whose stationary points are the real roots
of a cubic. The admissible root with the largest ``eta`` wins; ties go to the
root closest to the pairwise case-deletion estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import MaskedMatrix, available_moments
from .errors import DomainError

__all__ = [
    "PairStats",
    "GaussianEstimate",
    "pair_stats",
    "eta",
    "cubic_coefficients",
    "solve_sigma12",
    "case_deletion_cov",
    "dper_fit",
]

# relative gap kept between a clipped covariance and the correlation-one boundary
BOUNDARY_SHRINK = 1e-12
ETA_TIE_RTOL = 1e-9
# roots with larger imaginary parts are treated as genuinely complex
_IMAG_TOL = 1e-6


@dataclass(frozen=True)
class PairStats:
    """Co-observed sufficient statistics for one feature pair (centered data)."""

    s11: float
    s12: float
    s22: float
    m: int
    n: int
    l_other: int


class GaussianEstimate(NamedTuple):
    mean: np.ndarray
    cov: np.ndarray


def pair_stats(x: MaskedMatrix, i: int, j: int) -> PairStats:
    """Sufficient statistics of features ``i`` and ``j`` of centered data."""
    if i == j:
        raise ValueError("pair_stats needs two distinct features")
    both = x.mask[:, i] & x.mask[:, j]
    xi = x.values[both, i]
    xj = x.values[both, j]
    return PairStats(
        s11=float(xi @ xi),
        s12=float(xi @ xj),
        s22=float(xj @ xj),
        m=int(both.sum()),
        n=int(x.mask[:, i].sum()),
        l_other=int(x.mask[:, j].sum()),
    )


def eta(sigma12: float, stats: PairStats, sigma11: float, sigma22: float) -> float:
    """Profiled log-likelihood in the pair covariance, additive constant dropped."""
    if sigma11 <= 0 or sigma22 <= 0:
        raise DomainError("eta needs positive variances")
    cond = sigma22 - sigma12**2 / sigma11
    if not cond > 0:
        raise DomainError(
            f"conditional variance {cond!r} is not positive for sigma12={sigma12!r}"
        )
    quad = (
        stats.s22
        - 2.0 * sigma12 / sigma11 * stats.s12
        + sigma12**2 / sigma11**2 * stats.s11
    )
    return -0.5 * stats.m * math.log(cond) - 0.5 * quad / cond


def cubic_coefficients(stats: PairStats, sigma11: float, sigma22: float) -> np.ndarray:
    """Coefficients (highest degree first) of the stationarity cubic in sigma12."""
    m, s11, s12, s22 = stats.m, stats.s11, stats.s12, stats.s22
    return np.array(
        [
            m,
            -s12,
            s22 * sigma11 + s11 * sigma22 - m * sigma11 * sigma22,
            -s12 * sigma11 * sigma22,
        ],
        dtype=float,
    )


def _eta_batch(r, m, s11, s12, s22, sigma11, sigma22):
    # r is sigma12 / sqrt(sigma11 * sigma22); invalid entries come back as nan
    t = np.sqrt(sigma11 * sigma22)
    sig12 = r * t
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = sigma22 * (1.0 - r * r)
        quad = s22 - 2.0 * sig12 / sigma11 * s12 + sig12**2 / sigma11**2 * s11
        return -0.5 * m * np.log(cond) - 0.5 * quad / cond


def _solve_batch(m, s11, s12, s22, sigma11, sigma22, fallback):
    """Vectorized root selection; every argument is a 1-d array of equal length."""
    m = np.asarray(m, dtype=float)
    s11, s12, s22 = (np.asarray(a, dtype=float) for a in (s11, s12, s22))
    sigma11 = np.asarray(sigma11, dtype=float)
    sigma22 = np.asarray(sigma22, dtype=float)
    fallback = np.asarray(fallback, dtype=float)
    k = m.shape[0]
    out = np.zeros(k)
    live = m > 0
    if not live.any():
        return out

    mm, a11, a12, a22 = m[live], s11[live], s12[live], s22[live]
    v1, v2, fb = sigma11[live], sigma22[live], fallback[live]
    t = np.sqrt(v1 * v2)

    # monic cubic in r = sigma12 / t; admissible band becomes |r| < 1
    b2 = -a12 / (mm * t)
    b1 = (a22 * v1 + a11 * v2 - mm * v1 * v2) / (mm * t * t)
    b0 = -a12 / (mm * t)
    comp = np.zeros((mm.shape[0], 3, 3))
    comp[:, 0, 0] = -b2
    comp[:, 0, 1] = -b1
    comp[:, 0, 2] = -b0
    comp[:, 1, 0] = 1.0
    comp[:, 2, 1] = 1.0
    roots = np.linalg.eigvals(comp)

    re = roots.real.copy()
    im = np.abs(roots.imag)
    real_like = im <= _IMAG_TOL * (1.0 + np.abs(re))
    # a real cubic always has a real root: keep the least-complex one regardless
    real_like[np.arange(re.shape[0]), np.argmin(im, axis=1)] = True

    def g(r):
        return ((r + b2[:, None]) * r + b1[:, None]) * r + b0[:, None]

    def dg(r):
        return (3.0 * r + 2.0 * b2[:, None]) * r + b1[:, None]

    for _ in range(3):
        with np.errstate(divide="ignore", invalid="ignore"):
            step = g(re) / dg(re)
        cand = re - step
        better = np.isfinite(cand) & (np.abs(g(cand)) < np.abs(g(re)))
        re = np.where(better, cand, re)

    admissible = real_like & (np.abs(re) < 1.0)
    et = _eta_batch(
        re, mm[:, None], a11[:, None], a12[:, None], a22[:, None], v1[:, None], v2[:, None]
    )
    et = np.where(admissible & np.isfinite(et), et, -np.inf)
    best = et.max(axis=1)
    has = np.isfinite(best)
    tol = ETA_TIE_RTOL * np.maximum(1.0, np.abs(np.where(has, best, 0.0)))
    top = np.isfinite(et) & (et >= (best - tol)[:, None])
    dist = np.where(top, np.abs(re * t[:, None] - fb[:, None]), np.inf)
    pick = np.argmin(dist, axis=1)
    chosen = re[np.arange(re.shape[0]), pick] * t

    edge = t * (1.0 - BOUNDARY_SHRINK)
    clipped_fb = np.clip(fb, -edge, edge)
    out[live] = np.where(has, chosen, clipped_fb)
    return out


def solve_sigma12(stats: PairStats, sigma11: float, sigma22: float, fallback: float) -> float:
    """Maximum-likelihood covariance of one pair given the two variances.

    Returns the admissible real root of the stationarity cubic with the
    largest ``eta``; among near-equal maxima the root closest to
    ``fallback`` (the case-deletion estimate) is chosen. With no co-observed
    rows the answer is 0.0; with no admissible root it is ``fallback`` clipped
    into the open correlation band.
    """
    if sigma11 <= 0 or sigma22 <= 0:
        raise DomainError("solve_sigma12 needs positive variances")
    res = _solve_batch(
        np.array([stats.m]),
        np.array([stats.s11]),
        np.array([stats.s12]),
        np.array([stats.s22]),
        np.array([sigma11]),
        np.array([sigma22]),
        np.array([fallback]),
    )
    return float(res[0])


def case_deletion_cov(x: MaskedMatrix, i: int, j: int) -> float:
    """Uncorrected covariance over rows where both features are observed."""
    both = x.mask[:, i] & x.mask[:, j]
    m = int(both.sum())
    if m < 2:
        return 0.0
    xi = x.values[both, i]
    xj = x.values[both, j]
    return float(np.mean((xi - xi.mean()) * (xj - xj.mean())))


def _pairwise_sums(x: MaskedMatrix):
    # values under the mask are zero, so plain products restrict to co-observed rows
    obs = x.mask.astype(float)
    xv = np.where(x.mask, x.values, 0.0)
    m = obs.T @ obs
    s12 = xv.T @ xv
    sq = (xv * xv).T @ obs  # sq[i, j] = sum of x_i^2 over rows with i and j observed
    lin = xv.T @ obs  # lin[i, j] = sum of x_i over rows with i and j observed
    return m, s12, sq, lin


def _case_deletion_matrix(m, s12, lin):
    with np.errstate(divide="ignore", invalid="ignore"):
        mean_ij = lin / m
        cov = s12 / m - mean_ij * mean_ij.T
    return np.where(m >= 2, cov, 0.0)


def _clip_to_band(cov: np.ndarray) -> np.ndarray:
    d = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    bound = np.outer(d, d) * (1.0 - BOUNDARY_SHRINK)
    out = np.clip(cov, -bound, bound)
    np.fill_diagonal(out, np.diag(cov))
    return out


def _symmetric_from_upper(p, iu, ju, vals, diag):
    cov = np.zeros((p, p))
    cov[iu, ju] = vals
    cov[ju, iu] = vals
    cov[np.arange(p), np.arange(p)] = diag
    return cov


def dper_fit(x: MaskedMatrix) -> GaussianEstimate:
    """Estimate mean vector and covariance matrix from randomly missing data.

    Means and variances come from all available entries of each feature;
    each covariance from the pairwise maximum-likelihood cubic. The result is
    exactly symmetric and every entry obeys |s_ij| <= sqrt(s_ii s_jj), but it
    is not guaranteed to be positive semidefinite.
    """
    mu, var = available_moments(x)
    centered = MaskedMatrix(x.values - mu, x.mask)
    p = x.p
    m, s12, sq, lin = _pairwise_sums(centered)
    iu, ju = np.triu_indices(p, k=1)

    fallback = _case_deletion_matrix(m, s12, lin)[iu, ju]
    v1, v2 = var[iu], var[ju]
    degenerate = (v1 <= 0) | (v2 <= 0)
    pairs_m = np.where(degenerate, 0.0, m[iu, ju])
    vals = _solve_batch(
        pairs_m,
        sq[iu, ju],
        s12[iu, ju],
        sq[ju, iu],
        np.where(degenerate, 1.0, v1),
        np.where(degenerate, 1.0, v2),
        fallback,
    )
    cov = _symmetric_from_upper(p, iu, ju, vals, var)
    return GaussianEstimate(mu, _clip_to_band(cov))


def complete_case_fit(x: MaskedMatrix) -> GaussianEstimate:
    """Same layout as :func:`dper_fit` but with pairwise case-deletion covariances."""
    mu, var = available_moments(x)
    centered = MaskedMatrix(x.values - mu, x.mask)
    p = x.p
    m, s12, _, lin = _pairwise_sums(centered)
    iu, ju = np.triu_indices(p, k=1)
    vals = _case_deletion_matrix(m, s12, lin)[iu, ju]
    vals = np.where((var[iu] <= 0) | (var[ju] <= 0), 0.0, vals)
    cov = _symmetric_from_upper(p, iu, ju, vals, var)
    return GaussianEstimate(mu, _clip_to_band(cov))
