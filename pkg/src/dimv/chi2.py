"""Chi-square upper quantiles by bracketed inversion of the regularized gamma CDF."""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammainc, gammaincc

__all__ = ["chi2_cdf", "chi2_sf", "chi2_upper_quantile"]


def chi2_cdf(x: float, dof: int) -> float:
    if x <= 0:
        return 0.0
    return float(gammainc(dof / 2.0, x / 2.0))


def chi2_sf(x: float, dof: int) -> float:
    if x <= 0:
        return 1.0
    return float(gammaincc(dof / 2.0, x / 2.0))


def chi2_upper_quantile(sig_level: float, dof: int, xtol: float = 1e-12) -> float:
    """Return q with P(chi2_dof > q) = sig_level."""
    if not 0.0 < sig_level < 1.0:
        raise ValueError(f"sig_level must lie in (0, 1), got {sig_level!r}")
    if dof < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {dof!r}")

    def f(x):
        return chi2_sf(x, dof) - sig_level

    hi = max(1.0, 2.0 * dof)
    while f(hi) > 0:
        hi *= 2.0
    return float(brentq(f, 0.0, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500))
