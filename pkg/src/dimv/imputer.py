"""Conditional-Gaussian imputation with feature selection and ridge shrinkage (DIMV).

All computations happen in standardized space: the training data are
centered (and by default scaled) with available-entry moments, so a missing
feature ``f`` of a sample is predicted by the regularized conditional mean

    x_f = Sigma[f, F] (Sigma[F, F] + alpha I)^-1 x_F

where ``F`` are the selected observed predictors. Samples sharing compatible
missing patterns are stacked into blocks and solved together.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .chi2 import chi2_upper_quantile
from .core import (
    MaskedMatrix,
    MissingPattern,
    Standardizer,
    apply_standardizer,
    fit_standardizer,
)
from .dper import GaussianEstimate, dper_fit
from .errors import (
    DimensionError,
    DomainError,
    SelectionError,
    SingularityError,
    ValidationError,
)

log = logging.getLogger(__name__)

__all__ = [
    "ImputationConfig",
    "Block",
    "ConditionalGaussian",
    "CoefficientReport",
    "RedundantFeatureReport",
    "EllipsoidSpec",
    "ImputationResult",
    "DimvModel",
    "correlation",
    "select_features",
    "conditional_ridge_mean",
    "conditional_covariance",
    "conditional_gaussian",
    "coefficients",
    "confidence_region",
    "redundant_feature_delta",
    "fit_model",
    "plan_blocks",
    "impute",
    "impute_with_model",
]

# reciprocal condition number below which (Sigma_F + alpha I) counts as singular
RCOND_LIMIT = 1e-10
NEG_VAR_TOL = 1e-9


@dataclass(frozen=True)
class ImputationConfig:
    tau: float = 0.0
    k: int = 1
    alpha: float = 0.0
    init_with_zero: bool = False
    standardize: bool = True

    def __post_init__(self):
        if not 0.0 <= self.tau < 1.0:
            raise ValidationError(f"tau must lie in [0, 1), got {self.tau!r}")
        if int(self.k) != self.k or self.k < 1:
            raise ValidationError(f"k must be a positive integer, got {self.k!r}")
        if not self.alpha >= 0.0:
            raise ValidationError(f"alpha must be nonnegative, got {self.alpha!r}")

    def with_alpha(self, alpha: float) -> "ImputationConfig":
        return replace(self, alpha=float(alpha))

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "k": self.k,
            "alpha": self.alpha,
            "init_with_zero": self.init_with_zero,
            "standardize": self.standardize,
        }


@dataclass(frozen=True, eq=False)
class Block:
    feature: int
    predictors: tuple[int, ...]
    row_ids: np.ndarray
    z_obs: np.ndarray
    seed_pattern: MissingPattern


@dataclass(frozen=True, eq=False)
class ConditionalGaussian:
    mean: np.ndarray
    cov: np.ndarray
    alpha: float = 0.0


@dataclass(frozen=True, eq=False)
class CoefficientReport:
    feature: int
    predictors: tuple[int, ...]
    beta: np.ndarray
    alpha_used: float

    def to_dict(self) -> dict:
        return {
            "feature": int(self.feature),
            "predictors": [int(j) for j in self.predictors],
            "beta": [float(b) for b in self.beta],
            "alpha_used": float(self.alpha_used),
        }


@dataclass(frozen=True)
class RedundantFeatureReport:
    delta: float
    gamma: float
    numerator_corr_part: float
    numerator_resid_part: float


@dataclass(frozen=True, eq=False)
class EllipsoidSpec:
    """Solid ellipsoid {u : (u - center)^T shape_inverse (u - center) <= threshold}."""

    center: np.ndarray
    shape_inverse: np.ndarray
    threshold: float
    sig_level: float

    @property
    def dof(self) -> int:
        return self.center.shape[0]

    def quadratic_form(self, u) -> float:
        d = np.asarray(u, dtype=float) - self.center
        return float(d @ self.shape_inverse @ d)

    def contains(self, u) -> bool:
        return self.quadratic_form(u) <= self.threshold

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "shape_inverse": self.shape_inverse.tolist(),
            "threshold": self.threshold,
            "sig_level": self.sig_level,
            "dof": self.dof,
        }


@dataclass(eq=False)
class ImputationResult:
    imputed: np.ndarray
    coefficients: list[CoefficientReport] = field(default_factory=list)
    blocks: list[Block] = field(default_factory=list)
    # conditional variance of the target per block, in standardized units
    conditional_variances: list[float] | None = None


class _RidgeSystem:
    """Eigen-factorization of a symmetric predictor covariance, reusable across alphas."""

    def __init__(self, gram: np.ndarray):
        self.w, self.v = np.linalg.eigh(gram)

    def rcond(self, alpha: float) -> float:
        shifted = np.abs(self.w + alpha)
        top = shifted.max()
        return 0.0 if top == 0 else float(shifted.min() / top)

    def solve(self, rhs: np.ndarray, alpha: float) -> np.ndarray:
        if self.rcond(alpha) <= RCOND_LIMIT:
            raise SingularityError(
                f"predictor covariance + {alpha:g} I is singular "
                "(collinear or constant predictors); use a ridge alpha > 0"
            )
        proj = self.v.T @ rhs
        if proj.ndim == 1:
            return self.v @ (proj / (self.w + alpha))
        return self.v @ (proj / (self.w + alpha)[:, None])


def _system(sigma, predictors, cache=None) -> _RidgeSystem:
    key = tuple(predictors)
    if cache is not None and key in cache:
        return cache[key]
    idx = np.asarray(key, dtype=int)
    sysm = _RidgeSystem(sigma[np.ix_(idx, idx)])
    if cache is not None:
        cache[key] = sysm
    return sysm


def correlation(sigma: np.ndarray, i: int, j: int) -> float:
    d = sigma[i, i] * sigma[j, j]
    if sigma[i, i] <= 0 or sigma[j, j] <= 0:
        return 0.0
    return float(sigma[i, j] / np.sqrt(d))


def _abs_corr_row(sigma: np.ndarray, f: int) -> np.ndarray:
    diag = np.diag(sigma)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.abs(sigma[f] / np.sqrt(diag[f] * diag))
    ok = (diag > 0) & (diag[f] > 0)
    return np.where(ok, r, 0.0)


def select_features(
    sigma: np.ndarray, f: int, observed: Sequence[int], cfg: ImputationConfig
) -> tuple[int, ...]:
    """Observed predictors of ``f`` with |corr| > tau, else the top-k by |corr|."""
    obs = np.array(sorted(int(j) for j in observed if j != f), dtype=int)
    if obs.size == 0:
        raise SelectionError(f"no observed features available to predict feature {f}")
    r = _abs_corr_row(sigma, f)[obs]
    keep = obs[r > cfg.tau]
    if keep.size:
        return tuple(int(j) for j in keep)
    # stable sort on -|corr| keeps smaller indices first among ties
    order = np.argsort(-r, kind="stable")[: min(cfg.k, obs.size)]
    return tuple(sorted(int(j) for j in obs[order]))


def _beta(sigma, predictors, f, alpha, cache=None) -> np.ndarray:
    idx = np.asarray(predictors, dtype=int)
    return _system(sigma, predictors, cache).solve(sigma[idx, f], alpha)


def conditional_ridge_mean(
    sigma: np.ndarray,
    predictors: Sequence[int],
    f: int,
    z_obs,
    alpha: float = 0.0,
    cache: dict | None = None,
) -> np.ndarray:
    """Predict feature ``f`` for each row of ``z_obs`` (columns ordered as ``predictors``)."""
    z = np.asarray(z_obs, dtype=float)
    if z.ndim == 1:
        z = z[None, :]
    if z.shape[1] != len(predictors):
        raise DimensionError(
            f"z_obs has {z.shape[1]} columns but {len(predictors)} predictors were given"
        )
    return z @ _beta(sigma, predictors, f, alpha, cache)


def conditional_covariance(
    sigma: np.ndarray, predictors: Sequence[int], targets: Sequence[int], alpha: float = 0.0
) -> np.ndarray:
    t = np.asarray(targets, dtype=int)
    s_m = sigma[np.ix_(t, t)]
    if len(predictors) == 0:
        return s_m.copy()
    o = np.asarray(predictors, dtype=int)
    s_om = sigma[np.ix_(o, t)]
    cov = s_m - s_om.T @ _system(sigma, predictors).solve(s_om, alpha)
    cov = 0.5 * (cov + cov.T)
    d = np.diag(cov).copy()
    d[(d < 0) & (d >= -NEG_VAR_TOL)] = 0.0
    np.fill_diagonal(cov, d)
    return cov


def conditional_gaussian(
    sigma: np.ndarray,
    predictors: Sequence[int],
    targets: Sequence[int],
    u_obs,
    alpha: float = 0.0,
) -> ConditionalGaussian:
    """Conditional mean and covariance of ``targets`` given centered ``u_obs``."""
    t = np.asarray(targets, dtype=int)
    if len(predictors) == 0:
        mean = np.zeros(t.size)
    else:
        o = np.asarray(predictors, dtype=int)
        u = np.asarray(u_obs, dtype=float)
        mean = sigma[np.ix_(o, t)].T @ _system(sigma, predictors).solve(u, alpha)
    return ConditionalGaussian(mean, conditional_covariance(sigma, predictors, t, alpha), alpha)


def coefficients(
    sigma: np.ndarray, f: int, predictors: Sequence[int], alpha: float = 0.0
) -> CoefficientReport:
    beta = _beta(sigma, predictors, f, alpha)
    return CoefficientReport(int(f), tuple(int(j) for j in predictors), beta, float(alpha))


def confidence_region(cond: ConditionalGaussian, sig_level: float) -> EllipsoidSpec:
    """Chi-square ellipsoid holding the missing block with probability 1 - sig_level."""
    if cond.alpha != 0:
        raise DomainError(
            "confidence regions are only valid without regularization (alpha = 0)"
        )
    cov = np.asarray(cond.cov, dtype=float)
    w = np.linalg.eigvalsh(cov)
    if w.size == 0 or w.min() <= RCOND_LIMIT * max(w.max(), 0.0) or w.min() <= 0:
        raise SingularityError(
            "conditional covariance is singular; exclude collinear predictors or targets"
        )
    shape_inv = np.linalg.inv(cov)
    shape_inv = 0.5 * (shape_inv + shape_inv.T)
    q = chi2_upper_quantile(sig_level, cov.shape[0])
    return EllipsoidSpec(np.asarray(cond.mean, dtype=float), shape_inv, q, float(sig_level))


def redundant_feature_delta(
    sigma: np.ndarray, f: int, core: Sequence[int], extra: int, x_o, x_e: float
) -> RedundantFeatureReport:
    """Closed-form change of the prediction of ``f`` when ``extra`` joins ``core``."""
    o = np.asarray(core, dtype=int)
    s_o = sigma[np.ix_(o, o)]
    s_oe = sigma[o, extra]
    s_om = sigma[o, f]
    a = np.linalg.solve(s_o, s_oe)
    gamma = float(sigma[extra, extra] - s_oe @ a)
    if abs(gamma) <= 1e-12:
        raise DomainError(
            f"extra feature {extra} is (numerically) a linear function of the core features"
        )
    corr_part = float(s_om @ a - sigma[f, extra])
    resid_part = float(a @ np.asarray(x_o, dtype=float) - x_e)
    return RedundantFeatureReport(corr_part * resid_part / gamma, gamma, corr_part, resid_part)


class DimvModel:
    """Standardizer plus the Gaussian estimate fitted on standardized training data."""

    def __init__(self, standardizer: Standardizer, estimate: GaussianEstimate):
        self.standardizer = standardizer
        self.estimate = estimate
        self._systems: dict = {}

    @property
    def sigma(self) -> np.ndarray:
        return self.estimate.cov

    @property
    def p(self) -> int:
        return self.standardizer.p


def fit_model(
    train: MaskedMatrix,
    standardize: bool = True,
    estimator: Callable[[MaskedMatrix], GaussianEstimate] = dper_fit,
) -> DimvModel:
    std = fit_standardizer(train, scale=standardize)
    return DimvModel(std, estimator(apply_standardizer(std, train)))


def _seed_block(x: MaskedMatrix, f: int, remaining: np.ndarray, sigma, cfg):
    s = remaining[0]
    seed_obs = x.mask[s]
    observed = np.flatnonzero(seed_obs)
    pattern = MissingPattern(tuple(bool(b) for b in ~seed_obs))
    sub = x.mask[remaining]
    if observed.size == 0:
        members = remaining[~sub.any(axis=1)]
        return Block(f, (), members, np.zeros((members.size, 0)), pattern)
    preds = select_features(sigma, f, observed, cfg)
    # M_i subset of M_s  <=>  nothing observed at s is missing at i
    nested = ~np.any(~sub & seed_obs, axis=1)
    covers = sub[:, list(preds)].all(axis=1)
    members = remaining[nested & covers]
    return Block(f, preds, members, x.values[np.ix_(members, preds)], pattern)


def plan_blocks(
    sigma: np.ndarray, x: MaskedMatrix, f: int, cfg: ImputationConfig
) -> list[Block]:
    """Partition the samples missing feature ``f`` into imputation blocks.

    ``x`` is the standardized test matrix. Without zero initialization the
    seed is the lowest unassigned row; members have a missing set contained
    in the seed's and observe every selected predictor. With zero
    initialization a single block holds every sample missing ``f``.
    """
    missing_rows = np.flatnonzero(~x.mask[:, f])
    if missing_rows.size == 0:
        return []
    if cfg.init_with_zero:
        others = [j for j in range(x.p) if j != f]
        pattern = MissingPattern(tuple(j == f for j in range(x.p)))
        if not others:
            return [Block(f, (), missing_rows, np.zeros((missing_rows.size, 0)), pattern)]
        preds = select_features(sigma, f, others, cfg)
        z = np.where(x.mask, x.values, 0.0)[np.ix_(missing_rows, preds)]
        return [Block(f, preds, missing_rows, z, pattern)]
    blocks = []
    remaining = missing_rows
    while remaining.size:
        block = _seed_block(x, f, remaining, sigma, cfg)
        blocks.append(block)
        remaining = np.setdiff1d(remaining, block.row_ids, assume_unique=True)
    return blocks


def impute_with_model(
    model: DimvModel,
    test: MaskedMatrix,
    cfg: ImputationConfig,
    return_conditional: bool = False,
) -> ImputationResult:
    if test.p != model.p:
        raise DimensionError(f"test has p={test.p} but the model was fit with p={model.p}")
    std = model.standardizer
    sigma = model.sigma
    x = apply_standardizer(std, test)
    filled = np.where(x.mask, x.values, 0.0)
    result = ImputationResult(
        imputed=np.empty(0), conditional_variances=[] if return_conditional else None
    )
    for f in range(test.p):
        for block in plan_blocks(sigma, x, f, cfg):
            if not block.predictors:
                # no usable predictors: the centered mean
                filled[block.row_ids, f] = 0.0
                beta = np.zeros(0)
            else:
                try:
                    beta = _beta(sigma, block.predictors, f, cfg.alpha, model._systems)
                except SingularityError as exc:
                    raise SingularityError(
                        f"feature {f}, block seeded at row {int(block.row_ids[0])}: {exc}"
                    ) from exc
                filled[block.row_ids, f] = block.z_obs @ beta
            result.blocks.append(block)
            result.coefficients.append(
                CoefficientReport(f, block.predictors, beta, float(cfg.alpha))
            )
            if return_conditional:
                cv = conditional_covariance(sigma, block.predictors, [f], cfg.alpha)
                result.conditional_variances.append(float(cv[0, 0]))
    out = filled * std.scales + std.means
    result.imputed = np.where(test.mask, test.values, out)
    return result


def impute(
    train: MaskedMatrix,
    test: MaskedMatrix,
    cfg: ImputationConfig,
    estimator: Callable[[MaskedMatrix], GaussianEstimate] = dper_fit,
    return_conditional: bool = False,
) -> ImputationResult:
    """Fit on ``train`` and fill every missing entry of ``test``.

    Observed test entries are returned unchanged, bit for bit.
    """
    if train.p != test.p:
        raise DimensionError(f"train has p={train.p} but test has p={test.p}")
    model = fit_model(train, cfg.standardize, estimator)
    return impute_with_model(model, test, cfg, return_conditional)
