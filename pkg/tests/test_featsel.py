import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.pipeline import make_pipeline

from sketchmatch.featsel import (CfsSelector, FeatureTable, PrincipalComponents, TopNSelector, cfs_merit,
                                 cfs_search, class_correlation, discretize, entropy_bits, exhaustive_cfs,
                                 feature_scores, filter_top_n, greedy_path, information_gain, pca_fit,
                                 pca_project, pca_reconstruct, read_feature_csv, write_feature_csv)


def planted_table(seed, n=120, d=10):
    """Binary labels; a few informative columns, a redundant copy, the rest noise."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    cols = []
    n_inf = 2 + seed % 3
    for i in range(d):
        if i < n_inf:
            cols.append(y + rng.normal(0, 0.6 + 0.3 * i, n))
        elif i == n_inf:
            cols.append(cols[0] + rng.normal(0, 0.05, n))
        else:
            cols.append(rng.normal(0, 1, n))
    perm = rng.permutation(d)
    return FeatureTable(np.column_stack(cols)[:, perm], y)


def hand_entropy(*counts):
    total = sum(counts)
    return -sum(c / total * math.log2(c / total) for c in counts if c)


class TestPca:
    def test_line_reconstructs_exactly(self):
        t = np.linspace(-1, 2, 15)
        x = np.column_stack([3 * t + 1, -2 * t + 0.5])
        m = pca_fit(x, 1)
        assert np.max(np.abs(pca_reconstruct(m, pca_project(m, x)) - x)) < 1e-12

    def test_isotropic_variances_equal(self):
        x = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float)
        v = pca_fit(x, 2).explained_variance
        assert abs(v[0] - v[1]) < 1e-9

    def test_discarded_eigenvalue_oracle(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((20, 6)) @ rng.standard_normal((6, 6))
        m = pca_fit(x, 3)
        # full-rank reference via SVD of the centred data
        xc = x - x.mean(0)
        s = np.linalg.svd(xc, compute_uv=False)
        eig = s ** 2 / (len(x) - 1)
        np.testing.assert_allclose(m.explained_variance, eig[:3], rtol=1e-10)
        resid = ((pca_reconstruct(m, pca_project(m, x)) - x) ** 2).sum() / (len(x) - 1)
        assert resid == pytest.approx(eig[3:].sum(), abs=1e-8)

    def test_orthonormal_and_sign_convention(self):
        rng = np.random.default_rng(1)
        m = pca_fit(rng.standard_normal((30, 8)), 5)
        np.testing.assert_allclose(m.components @ m.components.T, np.eye(5), atol=1e-8)
        for row in m.components:
            assert row[np.flatnonzero(np.abs(row) > 1e-12)[0]] > 0
        assert np.all(np.diff(m.explained_variance) <= 1e-12)

    def test_total_variance_bound(self):
        x = np.random.default_rng(2).standard_normal((12, 5))
        m = pca_fit(x, 4)
        assert m.explained_variance.sum() <= x.var(axis=0, ddof=1).sum() + 1e-12

    def test_zero_variance_is_valid(self):
        m = pca_fit(np.ones((5, 3)), 2)
        np.testing.assert_array_equal(m.explained_variance, 0.0)

    @pytest.mark.parametrize("k", [0, 5])
    def test_k_out_of_range(self, k):
        with pytest.raises(ValueError):
            pca_fit(np.zeros((5, 4)), k)

    def test_sklearn_wrapper(self):
        x = np.random.default_rng(3).standard_normal((25, 4))
        pc = PrincipalComponents(2).fit(x)
        z = pc.transform(x)
        assert z.shape == (25, 2)
        assert pc.inverse_transform(z).shape == (25, 4)
        assert pc.get_params() == {"n_components": 2}


class TestInformationGain:
    def test_perfect_predictor(self):
        t = FeatureTable(np.array([[0.0], [1.0], [0.0], [1.0]]), np.array([0, 1, 0, 1]))
        assert information_gain(t, 0, bins=2) == pytest.approx(1.0, abs=1e-12)

    def test_constant_feature(self):
        t = FeatureTable(np.full((6, 1), 3.0), np.array([0, 1, 0, 1, 1, 0]))
        assert information_gain(t, 0) == 0.0

    def test_constant_labels(self):
        t = FeatureTable(np.arange(6.0)[:, None], np.zeros(6))
        assert information_gain(t, 0) == 0.0

    def test_eight_row_hand_table(self):
        values = np.array([0.0, 0.1, 0.2, 0.55, 0.6, 0.8, 0.9, 1.0])
        labels = np.array(list("aababbbb"))
        # equal-width bins on [0, 1] with two bins: first three rows low, rest high
        h = hand_entropy(3, 5)
        h_low = hand_entropy(2, 1)  # a, a, b
        h_high = hand_entropy(1, 4)  # a, b, b, b, b
        expected = h - 3 / 8 * h_low - 5 / 8 * h_high
        t = FeatureTable(values[:, None], labels)
        assert abs(information_gain(t, 0, bins=2) - expected) < 1e-12

    def test_discretize_edges(self):
        np.testing.assert_array_equal(discretize([0.0, 0.5, 1.0], 2), [0, 1, 1])
        np.testing.assert_array_equal(discretize([2.0, 2.0], 4), [0, 0])

    def test_bins_must_be_two_or_more(self):
        with pytest.raises(ValueError):
            information_gain(FeatureTable(np.zeros((2, 1)), [0, 1]), 0, bins=1)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.integers(2, 12))
    def test_bounds(self, seed, bins):
        rng = np.random.default_rng(seed)
        t = FeatureTable(rng.standard_normal((30, 1)), rng.integers(0, 3, 30))
        ig = information_gain(t, 0, bins)
        assert -1e-12 <= ig <= entropy_bits(t.labels) + 1e-12


class TestCfs:
    def test_singleton_merit(self):
        t = planted_table(0)
        for i in range(t.n_features):
            assert cfs_merit(t, [i]) == pytest.approx(class_correlation(t, i), abs=1e-15)

    def test_empty_subset(self):
        assert cfs_merit(planted_table(0), []) == 0.0

    def test_hand_merit(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((40, 3))
        y = (x[:, 0] + 0.5 * rng.standard_normal(40) > 0).astype(int)
        t = FeatureTable(x, y)
        r = lambda a, b: abs(np.corrcoef(a, b)[0, 1])  # noqa: E731
        rcf = np.mean([r(x[:, i], y) for i in range(3)])
        rff = np.mean([r(x[:, i], x[:, j]) for i, j in itertools.combinations(range(3), 2)])
        assert cfs_merit(t, [0, 1, 2]) == pytest.approx(3 * rcf / math.sqrt(3 + 6 * rff), rel=1e-12)

    def test_exact_copy_adds_nothing(self):
        rng = np.random.default_rng(2)
        y = rng.integers(0, 2, 50)
        f = y + rng.normal(0, 0.5, 50)
        t = FeatureTable(np.column_stack([f, f]), y)
        # with r_ff = 1 the formula gives 2r / sqrt(4) = r: no gain from the copy,
        # and the smaller-subset tie-break keeps it out of every search result
        assert cfs_merit(t, [0, 1]) == pytest.approx(cfs_merit(t, [0]), rel=1e-12)
        for strategy in ("forward", "best_first"):
            assert len(cfs_search(t, strategy)) == 1

    def test_noisy_copy_penalised(self):
        rng = np.random.default_rng(2)
        y = rng.integers(0, 2, 50)
        f = y + rng.normal(0, 0.5, 50)
        g = f + rng.normal(0, 0.3, 50)
        t = FeatureTable(np.column_stack([f, g]), y)
        assert cfs_merit(t, [0, 1]) < cfs_merit(t, [0])

    def test_zero_variance_feature(self):
        t = FeatureTable(np.column_stack([np.ones(6), np.arange(6.0)]), [0, 0, 0, 1, 1, 1])
        assert class_correlation(t, 0) == 0.0

    def test_permutation_invariant(self):
        t = planted_table(1)
        assert cfs_merit(t, [3, 1, 7]) == cfs_merit(t, [1, 7, 3])

    def test_forward_picks_planted_feature_first(self):
        rng = np.random.default_rng(5)
        y = rng.integers(0, 2, 100)
        x = rng.standard_normal((100, 6))
        x[:, 4] = y + rng.normal(0, 0.2, 100)
        t = FeatureTable(x, y)
        # the first greedy step reaches exactly the planted singleton's merit
        assert greedy_path(t)[1] == cfs_merit(t, [4])
        assert max(range(6), key=lambda i: cfs_merit(t, [i])) == 4
        assert 4 in cfs_search(t, "forward")

    def test_greedy_path_monotone(self):
        for seed in range(10):
            merits = greedy_path(planted_table(seed))
            assert all(b > a for a, b in zip(merits, merits[1:]))

    @pytest.mark.parametrize("seed", range(6))
    def test_best_first_matches_exhaustive(self, seed):
        t = planted_table(seed)
        assert sorted(cfs_search(t, "best_first")) == exhaustive_cfs(t)

    def test_best_first_not_worse_than_forward(self):
        for seed in range(10):
            t = planted_table(seed)
            assert cfs_merit(t, cfs_search(t, "best_first")) >= cfs_merit(t, cfs_search(t, "forward")) - 1e-15

    def test_backward_returns_nonempty(self):
        assert len(cfs_search(planted_table(2), "backward")) >= 1

    def test_errors(self):
        with pytest.raises(ValueError):
            cfs_search(FeatureTable(np.zeros((3, 0)), [0, 1, 0]))
        with pytest.raises(ValueError):
            cfs_search(planted_table(0), "genetic")

    def test_multiclass_uses_best_one_vs_rest(self):
        y = np.array([0, 1, 2] * 10)
        x = (y == 2).astype(float)[:, None]
        assert class_correlation(FeatureTable(x, y), 0) == pytest.approx(1.0)


class TestTopN:
    def test_all_features(self):
        t = planted_table(0)
        assert sorted(filter_top_n(t, n=t.n_features)) == list(range(t.n_features))

    def test_single_perfect_predictor(self):
        rng = np.random.default_rng(0)
        y = rng.integers(0, 2, 40)
        x = rng.standard_normal((40, 5))
        x[:, 3] = y
        t = FeatureTable(x, y)
        assert filter_top_n(t, "information_gain", 1) == [3]
        assert filter_top_n(t, "abs_correlation", 1) == [3]

    @pytest.mark.parametrize("scorer", ["information_gain", "abs_correlation"])
    def test_recompute_and_sort(self, scorer):
        t = planted_table(3)
        if scorer == "information_gain":
            scores = [information_gain(t, i, 10) for i in range(t.n_features)]
        else:
            scores = [class_correlation(t, i) for i in range(t.n_features)]
        expected = sorted(range(t.n_features), key=lambda i: (-scores[i], i))[:4]
        assert filter_top_n(t, scorer, 4) == expected
        np.testing.assert_array_equal(feature_scores(t, scorer), scores)

    def test_n_must_be_positive(self):
        with pytest.raises(ValueError):
            filter_top_n(planted_table(0), n=0)


class TestSelectorsAndIO:
    def test_cfs_selector_in_pipeline(self):
        t = planted_table(0)
        sel = CfsSelector().fit(t.rows, t.labels)
        assert sel.transform(t.rows).shape[1] == len(sel.subset_)
        pipe = make_pipeline(TopNSelector(n=3), PrincipalComponents(2)).fit(t.rows, t.labels)
        assert pipe.transform(t.rows).shape == (len(t.rows), 2)

    def test_csv_round_trip(self, tmp_path):
        t = FeatureTable(np.random.default_rng(0).standard_normal((4, 3)), np.array(["a", "b", "a", "c"]))
        write_feature_csv(tmp_path / "f.csv", t)
        back = read_feature_csv(tmp_path / "f.csv")
        np.testing.assert_array_equal(back.rows, t.rows)
        np.testing.assert_array_equal(back.labels, t.labels)
        assert back.names == ["f0", "f1", "f2"]

    def test_csv_requires_label_first(self, tmp_path):
        (tmp_path / "bad.csv").write_text("x,label\n1,a\n")
        with pytest.raises(ValueError):
            read_feature_csv(tmp_path / "bad.csv")

    def test_table_validation(self):
        with pytest.raises(ValueError):
            FeatureTable(np.array([[np.nan]]), [0])
        with pytest.raises(ValueError):
            FeatureTable(np.zeros((3, 2)), [0, 1])
