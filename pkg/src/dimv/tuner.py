"""Grid search for the ridge parameter by in-sample reconstruction error."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import MaskedMatrix, apply_standardizer
from .errors import TuningError, ValidationError
from .imputer import RCOND_LIMIT, ImputationConfig, _system, fit_model, select_features

__all__ = ["AlphaGrid", "TuningResult", "DEFAULT_ALPHAS", "tune_alpha"]

DEFAULT_ALPHAS = (0.0, 0.01, 0.1, 1.0, 10.0, 100.0)


@dataclass(frozen=True)
class AlphaGrid:
    """Candidate ridge values; stored sorted ascending, duplicates rejected."""

    candidates: tuple[float, ...] = DEFAULT_ALPHAS
    subsample_rows: int | None = None
    seed: int = 0

    def __post_init__(self):
        cands = tuple(sorted(float(a) for a in self.candidates))
        if not cands:
            raise ValidationError("alpha grid must not be empty")
        if any(a < 0 or not np.isfinite(a) for a in cands):
            raise ValidationError("alpha candidates must be finite and nonnegative")
        if len(set(cands)) != len(cands):
            raise ValidationError("alpha candidates must be distinct")
        if self.subsample_rows is not None and self.subsample_rows < 1:
            raise ValidationError("subsample_rows must be positive")
        object.__setattr__(self, "candidates", cands)


class TuningResult(NamedTuple):
    alpha: float
    scores: dict[float, float]


def _row_groups(mask: np.ndarray, rows: np.ndarray):
    patterns, inverse = np.unique(mask[rows], axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    for g, pat in enumerate(patterns):
        yield pat, rows[inverse == g]


def tune_alpha(train: MaskedMatrix, cfg: ImputationConfig, grid: AlphaGrid) -> TuningResult:
    """Pick the alpha minimizing RMSE when re-predicting observed training entries.

    Each observed entry (row, f) is predicted from the other observed
    features of that row, using feature selection with ``cfg.tau``/``cfg.k``
    and one covariance estimate shared by all candidates. A candidate that
    hits a singular system scores +inf. Ties go to the smaller alpha.
    """
    if train.p < 2:
        raise TuningError("tuning needs at least two features")
    model = fit_model(train, cfg.standardize)
    sigma = model.sigma
    x = apply_standardizer(model.standardizer, train)

    rows = np.arange(train.n)
    if grid.subsample_rows is not None and grid.subsample_rows < train.n:
        rng = np.random.default_rng(grid.seed)
        rows = np.sort(rng.choice(train.n, size=grid.subsample_rows, replace=False))

    alphas = grid.candidates
    sse = np.zeros(len(alphas))
    singular = np.zeros(len(alphas), dtype=bool)
    count = 0
    cache: dict = {}
    for pat, grows in _row_groups(train.mask, rows):
        avail = np.flatnonzero(pat)
        if avail.size < 2:
            continue
        for f in avail:
            others = avail[avail != f]
            preds = select_features(sigma, int(f), others, cfg)
            sysm = _system(sigma, preds, cache)
            idx = list(preds)
            z = x.values[np.ix_(grows, idx)]
            target = x.values[grows, f]
            rhs = sigma[idx, f]
            count += grows.size
            for a_i, alpha in enumerate(alphas):
                if singular[a_i]:
                    continue
                if sysm.rcond(alpha) <= RCOND_LIMIT:
                    singular[a_i] = True
                    continue
                resid = z @ sysm.solve(rhs, alpha) - target
                sse[a_i] += float(resid @ resid)
    if count == 0:
        raise TuningError("no observed entry has another observed feature to predict from")
    scores = np.where(singular, np.inf, np.sqrt(sse / count))
    if not np.isfinite(scores).any():
        raise TuningError("every alpha candidate produced a singular system")
    best = int(np.argmin(scores))
    return TuningResult(alphas[best], {a: float(s) for a, s in zip(alphas, scores)})
