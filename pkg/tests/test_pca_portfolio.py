import math
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbn_spread.errors import DegenerateDataError, NumericError
from dbn_spread.market_data import AlignedPair
from dbn_spread.pca_portfolio import (
    PcaResult, eig_sym_2x2, explained_variance_check, fit_standardizer, pca_2d, portfolio_price,
)

R2 = 1 / math.sqrt(2)


def pair(a, b):
    return AlignedPair(tuple(date(2001, 1, 1) + timedelta(days=i) for i in range(len(a))),
                       np.asarray(a, float), np.asarray(b, float))


def result(r1):
    return PcaResult(np.eye(2), np.array([r1, 1 - r1]), np.array([r1, 1 - r1]))


class TestStandardizer:
    def test_two_points(self):
        s = fit_standardizer(pair([1, 3], [5, 9]))
        assert (s.mean_a, s.std_a) == (2.0, 1.0)
        assert (s.mean_b, s.std_b) == (7.0, 2.0)

    def test_hand_computed(self):
        s = fit_standardizer(pair([0, 0, 3, 3], [1, 2, 3, 4]))
        assert (s.mean_a, s.std_a) == (1.5, 1.5)

    def test_constant_is_degenerate(self):
        with pytest.raises(DegenerateDataError):
            fit_standardizer(pair([2, 2, 2], [1, 2, 3]))


class TestPca:
    def test_perfect_correlation(self):
        x = np.array([1.0, 2.0, 4.0, 7.0])
        r = pca_2d(pair(x, x))
        np.testing.assert_allclose(r.pc1, [R2, R2], atol=1e-15)
        np.testing.assert_allclose(r.pc2, [R2, -R2], atol=1e-15)
        np.testing.assert_allclose(r.explained_variance_ratio, [1.0, 0.0], atol=1e-15)

    def test_equal_variance_tie_keeps_axis_order(self):
        r = pca_2d(pair([1, 1, -1, -1], [1, -1, 1, -1]))
        np.testing.assert_array_equal(r.explained_variance_ratio, [0.5, 0.5])
        np.testing.assert_array_equal(r.loadings, np.eye(2))

    def test_diagonal_larger_second(self):
        vals, vecs = eig_sym_2x2([[1.0, 0.0], [0.0, 3.0]])
        np.testing.assert_array_equal(vals, [3.0, 1.0])
        np.testing.assert_array_equal(vecs, [[0.0, 1.0], [1.0, 0.0]])

    def test_non_finite(self):
        with pytest.raises(NumericError):
            eig_sym_2x2([[np.nan, 0.0], [0.0, 1.0]])

    @given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-50, 50))
    @settings(max_examples=300, deadline=None)
    def test_against_numpy(self, p, q, r):
        cov = np.array([[p * p + q * q, p * r], [p * r, r * r + 1e-3]])
        vals, vecs = eig_sym_2x2(cov)
        ref_vals, ref_vecs = np.linalg.eigh(cov)
        np.testing.assert_allclose(vals, ref_vals[::-1], rtol=1e-9, atol=1e-9 * np.abs(cov).max())
        np.testing.assert_allclose(vecs @ vecs.T, np.eye(2), atol=1e-12)
        for k in range(2):
            np.testing.assert_allclose(cov @ vecs[k], vals[k] * vecs[k], atol=1e-9 * max(1.0, np.abs(cov).max()))
            v = vecs[k]
            assert v[0] > 0 or (v[0] == 0 and v[1] >= 0)

    @given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=3, max_size=40))
    @settings(max_examples=200, deadline=None)
    def test_ratios_sum_to_one_and_descend(self, rows):
        a, b = np.array(rows).T
        if np.var(a) == 0 and np.var(b) == 0:
            return
        r = pca_2d(pair(a, b))
        assert r.explained_variance_ratio.sum() == pytest.approx(1.0)
        assert r.explained_variance_ratio[0] >= r.explained_variance_ratio[1] >= 0


class TestPortfolio:
    def test_unit_weight_projects_leg_a(self):
        p = pair([100, 101, 99], [110, 111, 112])
        np.testing.assert_array_equal(portfolio_price(p, (1.0, 0.0)).prices, p.prices_a)

    def test_reference_loadings(self):
        out = portfolio_price(pair([100.0] * 3, [100.0] * 3), (0.83, -0.59)).prices
        np.testing.assert_allclose(out, 24.0, rtol=1e-12)

    def test_null_weights(self):
        np.testing.assert_array_equal(portfolio_price(pair([1, 2], [3, 4]), (0.0, 0.0)).prices, 0.0)

    def test_standardized_mode(self):
        p = pair([1, 3], [5, 9])
        out = portfolio_price(p, (R2, -R2), fit_standardizer(p)).prices
        np.testing.assert_allclose(out, 0.0, atol=1e-15)


class TestVarianceCheck:
    @pytest.mark.parametrize("r1,ok", [(0.995, True), (0.5, False), (0.99, True), (0.9899, False)])
    def test_threshold(self, r1, ok):
        assert bool(explained_variance_check(result(r1))) is ok
