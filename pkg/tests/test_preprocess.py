import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hqnn.exceptions import InsufficientDataError, ParameterError
from hqnn.indicators import OhlcSeries
from hqnn.preprocess import (FEATURE_COLUMNS, FeatureMatrix, build_features,
                             f_scores, fit_scaler, scale_target,
                             select_k_best, unscale_target, window)

from oracles import random_walk_series


def walk_series(n=100, seed=0):
    return OhlcSeries(*random_walk_series(n, seed))


def toy_matrix(n=50, seed=0):
    rng = np.random.default_rng(seed)
    cols = rng.normal(size=(n, 4))
    target = 2.0 * cols[:, 0] + 1e-6 * rng.normal(size=n)
    return FeatureMatrix(("a", "b", "c", "d"), cols, target)


class TestBuildFeatures:
    def test_walk_shape(self):
        m = build_features(walk_series(100, seed=3))
        assert m.column_names == FEATURE_COLUMNS
        assert m.rows.shape == (100 - 33, 9)       # macd signal warmup = 33
        assert np.array_equal(m.target, m.column("close"))

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            build_features(walk_series(20, seed=1))

    def test_flat_series_builds_with_guards(self):
        ones = np.full(60, 3.0)
        m = build_features(OhlcSeries(np.arange(60), ones, ones, ones, ones))
        assert np.allclose(m.column("rsi14"), 100.0)   # zero-loss guard
        assert np.allclose(m.column("adx14"), 0.0)     # zero-DI guard


class TestSelectKBest:
    def test_correlated_column_wins(self):
        m = toy_matrix()
        assert select_k_best(m, 1) == ["a"]

    def test_k_equals_all_returns_score_order(self):
        m = toy_matrix()
        names = select_k_best(m, 4)
        scores = f_scores(m)
        order = np.argsort(-scores, kind="stable")
        assert names == [m.column_names[i] for i in order]

    def test_matches_pearson_bruteforce(self):
        m = toy_matrix(n=50, seed=9)
        got = select_k_best(m, 3)
        n = m.n_rows
        ref = []
        for j in range(4):
            r = np.corrcoef(m.rows[:, j], m.target)[0, 1]
            ref.append(r * r * (n - 2) / (1 - r * r))
        order = np.argsort(-np.asarray(ref), kind="stable")[:3]
        assert got == [m.column_names[i] for i in order]

    def test_constant_column_scores_zero(self):
        rows = np.column_stack([np.full(10, 4.2), np.arange(10.0)])
        m = FeatureMatrix(("const", "ramp"), rows, np.arange(10.0) * 2)
        scores = f_scores(m)
        assert scores[0] == 0.0 and scores[1] > 0
        assert select_k_best(m, 1) == ["ramp"]

    def test_k_out_of_range(self):
        with pytest.raises(ParameterError):
            select_k_best(toy_matrix(), 5)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(min_value=0.01, max_value=100.0),
           st.floats(min_value=-50.0, max_value=50.0))
    def test_affine_rescaling_invariance(self, scale, shift):
        m = toy_matrix(seed=4)
        rows = m.rows.copy()
        rows[:, 1] = rows[:, 1] * scale + shift
        m2 = FeatureMatrix(m.column_names, rows, m.target)
        assert select_k_best(m, 2) == select_k_best(m2, 2)


class TestScaler:
    def test_min_max_from_train_rows(self):
        rows = np.array([[2.0], [4.0], [6.0], [100.0]])
        m = FeatureMatrix(("x",), rows, rows[:, 0])
        sc = fit_scaler(m, np.arange(3))
        assert sc.col_min[0] == 2.0 and sc.col_max[0] == 6.0

    def test_constant_column_flagged(self):
        rows = np.column_stack([np.full(5, 5.0), np.arange(5.0)])
        m = FeatureMatrix(("c", "r"), rows, np.arange(5.0))
        sc = fit_scaler(m, np.arange(5))
        assert sc.constant_columns.tolist() == [True, False]

    def test_out_of_range_rows_clamp(self):
        rows = np.linspace(0.0, 10.0, 11).reshape(-1, 1)
        m = FeatureMatrix(("x",), rows, rows[:, 0])
        sc = fit_scaler(m, np.arange(5))           # train range [0, 4]
        ds = window(m, sc, ["x"], lookback=2)
        assert ds.inputs.min() >= 0.0 and ds.inputs.max() <= 1.0
        assert ds.inputs.max() == 1.0              # excursions clamp to 1

    def test_roundtrip_inverse(self):
        m = build_features(walk_series(120, seed=5))
        sc = fit_scaler(m, np.arange(60))
        raw = m.target[10:20]
        again = unscale_target(sc, scale_target(sc, raw))
        np.testing.assert_allclose(again, raw, atol=1e-12 * np.max(raw))

    def test_empty_train_rows(self):
        m = toy_matrix()
        with pytest.raises(InsufficientDataError):
            fit_scaler(m, np.array([], dtype=int))


class TestWindow:
    def test_index_arithmetic(self):
        rows = np.arange(10.0).reshape(-1, 1)
        m = FeatureMatrix(("x",), rows, np.arange(10.0) + 100.0)
        sc = fit_scaler(m, np.arange(10))
        ds = window(m, sc, ["x"], lookback=2)
        assert ds.n_samples == 8
        np.testing.assert_allclose(ds.inputs[0, :, 0],
                                   [0.0, 1.0 / 9.0])      # rows 0 and 1
        assert ds.targets[0] == pytest.approx(2.0 / 9.0)  # row 2's close
        in_rows, target_row = ds.sample_rows(0)
        assert list(in_rows) == [0, 1] and target_row == 2

    def test_lookback_exhausts_rows(self):
        m = toy_matrix(n=5)
        sc = fit_scaler(m, np.arange(5))
        with pytest.raises(InsufficientDataError):
            window(m, sc, ["a"], lookback=5)

    def test_no_lookahead_and_bounds(self):
        m = build_features(walk_series(120, seed=8))
        sc = fit_scaler(m, np.arange(60))
        ds = window(m, sc, list(m.column_names[:3]), lookback=2)
        for i in (0, 5, ds.n_samples - 1):
            in_rows, target_row = ds.sample_rows(i)
            assert max(in_rows) < target_row
        assert ds.inputs.min() >= 0.0 and ds.inputs.max() <= 1.0
        train_targets = ds.targets[:58]    # targets on rows 2..59 are in range
        assert train_targets.min() >= 0.0 and train_targets.max() <= 1.0

    def test_constant_column_maps_to_half(self):
        rows = np.column_stack([np.full(6, 2.0), np.arange(6.0)])
        m = FeatureMatrix(("c", "r"), rows, np.arange(6.0))
        sc = fit_scaler(m, np.arange(6))
        ds = window(m, sc, ["c", "r"], lookback=2)
        assert np.all(ds.inputs[:, :, 0] == 0.5)

    def test_chronological_order_preserved(self):
        m = build_features(walk_series(80, seed=2))
        sc = fit_scaler(m, np.arange(m.n_rows))
        ds = window(m, sc, ["close"], lookback=2)
        scaled_close = (m.column("close") - sc.col_min[3]) / (
            sc.col_max[3] - sc.col_min[3])
        np.testing.assert_allclose(ds.inputs[:, 1, 0],
                                   np.clip(scaled_close[1:-1], 0, 1),
                                   atol=1e-12)
