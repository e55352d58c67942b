import numpy as np
import pytest

from _synth import equicorrelated, mvn_split
from dimv.core import MaskedMatrix, apply_standardizer, build_masked
from dimv.errors import TuningError, ValidationError
from dimv.imputer import ImputationConfig, conditional_ridge_mean, fit_model, select_features
from dimv.tuner import DEFAULT_ALPHAS, AlphaGrid, tune_alpha


def train_set(seed=0, rate=0.2):
    _, _, train, _ = mvn_split(seed, np.zeros(4), equicorrelated(4, 0.6, sd=[1, 2, 3, 0.5]), 300, 1, rate)
    return train


def duplicated_train(seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(200, 3)) @ np.array([[1, 0.5, 0.2], [0, 1, 0.4], [0, 0, 1]])
    x = np.column_stack([x, x[:, 0]])
    return MaskedMatrix.complete(x)


def brute_force_scores(train, cfg, alphas):
    """Score each alpha by predicting every observed entry one at a time."""
    model = fit_model(train)
    z = apply_standardizer(model.standardizer, train)
    out = {}
    for a in alphas:
        errs = []
        for i in range(train.n):
            avail = np.flatnonzero(train.mask[i])
            if avail.size < 2:
                continue
            for f in avail:
                preds = select_features(model.sigma, int(f), avail[avail != f], cfg)
                pred = conditional_ridge_mean(model.sigma, preds, int(f), z.values[i, list(preds)], a)[0]
                errs.append(pred - z.values[i, f])
        out[a] = float(np.sqrt(np.mean(np.square(errs))))
    return out


class TestGrid:
    def test_default(self):
        assert AlphaGrid().candidates == DEFAULT_ALPHAS

    def test_sorted(self):
        assert AlphaGrid((10.0, 0.0, 1.0)).candidates == (0.0, 1.0, 10.0)

    @pytest.mark.parametrize("bad", [(), (1.0, 1.0), (-0.1,), (float("inf"),)])
    def test_invalid(self, bad):
        with pytest.raises(ValidationError):
            AlphaGrid(bad)


class TestTune:
    def test_single_candidate(self):
        res = tune_alpha(train_set(), ImputationConfig(), AlphaGrid((0.5,)))
        assert res.alpha == 0.5 and np.isfinite(res.scores[0.5])

    def test_matches_brute_force(self):
        train = train_set(1)
        cfg = ImputationConfig(tau=0.3, k=2)
        res = tune_alpha(train, cfg, AlphaGrid((0.0, 0.1, 10.0)))
        want = brute_force_scores(train, cfg, (0.0, 0.1, 10.0))
        for a, s in want.items():
            assert res.scores[a] == pytest.approx(s, rel=1e-10)

    def test_duplicated_column_prefers_ridge(self):
        res = tune_alpha(duplicated_train(), ImputationConfig(), AlphaGrid((0.0, 1.0)))
        assert res.alpha == 1.0
        assert res.scores[0.0] == np.inf

    def test_well_conditioned_prefers_no_shrinkage(self):
        res = tune_alpha(train_set(2), ImputationConfig(), AlphaGrid((0.0, 100.0)))
        assert res.alpha == 0.0 and res.scores[0.0] < res.scores[100.0]

    def test_returned_alpha_minimal(self):
        res = tune_alpha(train_set(3), ImputationConfig(), AlphaGrid())
        assert res.alpha in DEFAULT_ALPHAS
        assert res.scores[res.alpha] == min(res.scores.values())

    def test_order_invariance(self):
        train = train_set(4)
        a = tune_alpha(train, ImputationConfig(), AlphaGrid((100.0, 0.0, 1.0)))
        b = tune_alpha(train, ImputationConfig(), AlphaGrid((0.0, 1.0, 100.0)))
        assert a == b

    def test_ties_go_to_smaller_alpha(self):
        # independent features: every beta is zero whatever alpha is
        x = MaskedMatrix.complete(np.array([[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]]))
        res = tune_alpha(x, ImputationConfig(), AlphaGrid((0.0, 1.0, 5.0)))
        assert len(set(res.scores.values())) == 1 and res.alpha == 0.0

    def test_subsample_deterministic(self):
        train = train_set(5)
        g = AlphaGrid((0.0, 1.0), subsample_rows=50, seed=3)
        assert tune_alpha(train, ImputationConfig(), g) == tune_alpha(train, ImputationConfig(), g)
        full = tune_alpha(train, ImputationConfig(), AlphaGrid((0.0, 1.0)))
        assert tune_alpha(train, ImputationConfig(), g).scores != full.scores

    def test_no_usable_entries(self):
        x = build_masked([[1, None], [None, 2], [3, None], [None, 1]])
        with pytest.raises(TuningError):
            tune_alpha(x, ImputationConfig(), AlphaGrid())

    def test_single_feature(self):
        with pytest.raises(TuningError):
            tune_alpha(build_masked([[1], [2]]), ImputationConfig(), AlphaGrid())
