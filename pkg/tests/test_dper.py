import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _synth import equicorrelated, grid_eta_max, random_pair_instance
from dimv.core import MaskedMatrix, build_masked
from dimv.dper import (
    PairStats,
    case_deletion_cov,
    complete_case_fit,
    cubic_coefficients,
    dper_fit,
    eta,
    pair_stats,
    solve_sigma12,
)
from dimv.errors import DomainError, EstimationError


def eta_reference(s12_, st_, v11, v22):
    # expanded form: -m/2 log(det/v11) - (v11 s22 - 2 s12_ s12 + s12_^2 s11 / v11) / (2 det)
    det = v11 * v22 - s12_**2
    return (
        -0.5 * st_.m * (math.log(det) - math.log(v11))
        - 0.5 * (v11 * st_.s22 - 2 * s12_ * st_.s12 + s12_**2 * st_.s11 / v11) / det
    )


class TestPairStats:
    def test_direct_sums(self):
        x = build_masked([[1, 2], [-1, -2], [None, 5]])
        s = pair_stats(x, 0, 1)
        assert (s.m, s.s11, s.s12, s.s22, s.n, s.l_other) == (2, 2.0, 4.0, 8.0, 2, 3)

    def test_disjoint_rows(self):
        x = build_masked([[1, None], [None, 2]])
        s = pair_stats(x, 0, 1)
        assert s.m == 0 and s.s11 == s.s12 == s.s22 == 0

    def test_complete_counts(self):
        x = MaskedMatrix.complete(np.arange(8.0).reshape(4, 2))
        s = pair_stats(x, 0, 1)
        assert s.m == s.n == s.l_other == 4

    def test_cauchy_schwarz(self):
        rng = np.random.default_rng(0)
        x = MaskedMatrix(rng.normal(size=(30, 2)), rng.random((30, 2)) > 0.3)
        s = pair_stats(x, 0, 1)
        assert s.s12**2 <= s.s11 * s.s22 and s.m <= min(s.n, s.l_other)


class TestEta:
    def test_arithmetic(self):
        s = PairStats(2.0, 0.0, 2.0, 2, 2, 2)
        assert eta(0.0, s, 1.0, 1.0) == pytest.approx(-1.0, abs=1e-15)

    def test_outside_band(self):
        s = PairStats(2.0, 0.0, 2.0, 2, 2, 2)
        with pytest.raises(DomainError):
            eta(1.0, s, 1.0, 1.0)
        with pytest.raises(DomainError):
            eta(1.5, s, 1.0, 1.0)

    def test_matches_expanded_form(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            s, v11, v22, _ = random_pair_instance(rng)
            c = rng.uniform(-0.99, 0.99) * math.sqrt(v11 * v22)
            assert eta(c, s, v11, v22) == pytest.approx(eta_reference(c, s, v11, v22), rel=1e-10, abs=1e-10)


class TestSolveSigma12:
    def test_complete_pair_exact_root(self):
        s = PairStats(2.0, 1.0, 2.0, 2, 2, 2)
        assert solve_sigma12(s, 1.0, 1.0, 0.0) == pytest.approx(0.5, abs=1e-14)

    def test_zero_cross_product(self):
        s = PairStats(3.0, 0.0, 5.0, 4, 6, 7)
        assert solve_sigma12(s, 1.1, 0.9, 0.3) == pytest.approx(0.0, abs=1e-14)

    def test_no_coobserved_rows(self):
        s = PairStats(0.0, 0.0, 0.0, 0, 3, 3)
        assert solve_sigma12(s, 1.0, 2.0, 0.7) == 0.0

    def test_grid_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            s, v11, v22, fb = random_pair_instance(rng)
            got = solve_sigma12(s, v11, v22, fb)
            best, arg = grid_eta_max(s, v11, v22)
            assert eta(got, s, v11, v22) >= best - 1e-6
            # the grid spacing is 2 sqrt(v11 v22) / 1e5
            assert abs(got - arg) <= 1e-6 * max(1.0, math.sqrt(v11 * v22)) + 4e-5 * math.sqrt(v11 * v22)

    def test_returned_value_is_root(self):
        rng = np.random.default_rng(12)
        for _ in range(300):
            s, v11, v22, fb = random_pair_instance(rng)
            got = solve_sigma12(s, v11, v22, fb)
            c = cubic_coefficients(s, v11, v22)
            assert abs(np.polyval(c, got)) < 1e-8 * max(1.0, np.abs(c).max())

    def test_beats_every_other_admissible_root(self):
        rng = np.random.default_rng(13)
        for _ in range(300):
            s, v11, v22, fb = random_pair_instance(rng)
            got = solve_sigma12(s, v11, v22, fb)
            t = math.sqrt(v11 * v22)
            e_got = eta(got, s, v11, v22)
            for r in np.roots(cubic_coefficients(s, v11, v22)):
                if abs(r.imag) < 1e-9 * (1 + abs(r.real)) and abs(r.real) < t * (1 - 1e-9):
                    assert e_got >= eta(r.real, s, v11, v22) - 1e-9 * max(1, abs(e_got))

    def test_boundary_root_falls_back_clipped(self):
        # duplicated feature: the only real root sits on the correlation-one boundary
        s = PairStats(4.0, 4.0, 4.0, 4, 4, 4)
        got = solve_sigma12(s, 1.0, 1.0, 1.0)
        assert got < 1.0 and got == pytest.approx(1.0, abs=1e-11)


class TestCaseDeletion:
    def test_two_point(self):
        x = build_masked([[1, 2], [2, 4], [None, 7]])
        assert case_deletion_cov(x, 0, 1) == pytest.approx(0.5)

    def test_single_coobserved(self):
        x = build_masked([[1, 2], [None, 4], [3, None]])
        assert case_deletion_cov(x, 0, 1) == 0.0

    def test_complete(self):
        x = np.random.default_rng(0).normal(size=(25, 2))
        assert case_deletion_cov(MaskedMatrix.complete(x), 0, 1) == pytest.approx(
            np.cov(x.T, bias=True)[0, 1], rel=1e-12
        )


class TestDperFit:
    @pytest.mark.parametrize("seed", range(4))
    def test_complete_data_sample_moments(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(60, 5)) @ rng.normal(size=(5, 5)) + rng.normal(size=5) * 4
        mu, cov = dper_fit(MaskedMatrix.complete(x))
        np.testing.assert_allclose(mu, x.mean(axis=0), atol=1e-9)
        np.testing.assert_allclose(cov, np.cov(x.T, bias=True), atol=1e-9)

    def test_disjoint_features_zero(self):
        x = build_masked([[1, None], [2, None], [None, 5], [None, 3]])
        _, cov = dper_fit(x)
        assert cov[0, 1] == 0.0

    def test_constant_feature_zero_cov(self):
        x = build_masked([[1, 4], [2, 4], [None, 4], [5, 4]])
        _, cov = dper_fit(x)
        assert cov[0, 1] == 0.0 and cov[1, 1] == 0.0

    def test_fully_missing_feature(self):
        with pytest.raises(EstimationError):
            dper_fit(build_masked([[1, None], [2, None]]))

    def test_symmetry_band_and_determinism(self):
        rng = np.random.default_rng(7)
        x = MaskedMatrix(rng.normal(size=(40, 6)) @ rng.normal(size=(6, 6)), rng.random((40, 6)) > 0.35)
        a = dper_fit(x)
        b = dper_fit(x)
        assert np.array_equal(a.cov, a.cov.T)
        assert np.array_equal(a.cov, b.cov) and np.array_equal(a.mean, b.mean)
        d = np.sqrt(np.diag(a.cov))
        off = ~np.eye(6, dtype=bool)
        assert np.all(np.abs(a.cov)[off] <= np.outer(d, d)[off])
        assert np.all(np.diag(a.cov) >= 0)

    def test_row_order_invariance(self):
        rng = np.random.default_rng(8)
        v = rng.normal(size=(50, 4)) @ rng.normal(size=(4, 4))
        m = rng.random((50, 4)) > 0.3
        perm = rng.permutation(50)
        a = dper_fit(MaskedMatrix(v, m))
        b = dper_fit(MaskedMatrix(v[perm], m[perm]))
        np.testing.assert_allclose(a.mean, b.mean, atol=1e-12)
        np.testing.assert_allclose(a.cov, b.cov, atol=1e-12)

    def test_pairs_match_scalar_path(self):
        rng = np.random.default_rng(9)
        x = MaskedMatrix(rng.normal(size=(40, 4)) @ rng.normal(size=(4, 4)), rng.random((40, 4)) > 0.3)
        mu, cov = dper_fit(x)
        xc = MaskedMatrix(x.values - mu, x.mask)
        for i in range(4):
            for j in range(i + 1, 4):
                s = pair_stats(xc, i, j)
                want = solve_sigma12(s, cov[i, i], cov[j, j], case_deletion_cov(xc, i, j))
                assert cov[i, j] == pytest.approx(want, rel=1e-12, abs=1e-14)

    def test_beats_case_deletion_on_mcar(self):
        # ground truth known; on average DPER lands closer than pairwise deletion
        sigma = equicorrelated(5, 0.6, sd=[1, 2, 0.5, 3, 1.5])
        dist_dper, dist_cc = [], []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            x = rng.multivariate_normal(np.zeros(5), sigma, size=2000)
            m = rng.random(x.shape) >= 0.2
            xm = MaskedMatrix(x, m)
            dist_dper.append(np.linalg.norm(dper_fit(xm).cov - sigma))
            dist_cc.append(np.linalg.norm(complete_case_fit(xm).cov - sigma))
        assert np.mean(dist_dper) < np.mean(dist_cc)


@settings(max_examples=80, deadline=None)
@given(
    st.integers(3, 40),
    st.floats(-0.95, 0.95),
    st.floats(0.0, 0.5),
    st.integers(0, 2**31 - 1),
)
def test_solution_root_and_in_band(n, rho, miss, seed):
    rng = np.random.default_rng(seed)
    x = rng.multivariate_normal([0, 0], [[1, rho], [rho, 1]], size=n)
    keep = rng.random((n, 2)) >= miss
    keep[:2] = True
    mu, cov = dper_fit(MaskedMatrix(x, keep))
    assert abs(cov[0, 1]) <= math.sqrt(cov[0, 0] * cov[1, 1])
    assert cov[0, 1] == cov[1, 0]
