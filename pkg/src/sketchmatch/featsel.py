"""Classical feature extraction and selection over feature tables.

Functional core (``pca_fit``, ``information_gain``, ``cfs_merit``,
``cfs_search``, ``filter_top_n``) plus scikit-learn compatible wrappers so
the selectors drop into a ``Pipeline``.
"""
from __future__ import annotations

import csv
import heapq
import itertools
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y


@dataclass
class FeatureTable:
    rows: np.ndarray  # (N, D)
    labels: np.ndarray  # (N,)
    names: list | None = None

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.rows.ndim != 2:
            raise ValueError(f"feature rows must be 2-D, got shape {self.rows.shape}")
        if len(self.labels) != len(self.rows):
            raise ValueError(f"{len(self.labels)} labels for {len(self.rows)} rows")
        if np.isnan(self.rows).any():
            raise ValueError("feature table contains NaN")
        if self.names is not None and len(self.names) != self.rows.shape[1]:
            raise ValueError("feature name count does not match columns")

    @property
    def n_features(self):
        return self.rows.shape[1]


def read_feature_csv(path):
    """CSV with a header row, ``label`` first and feature columns after."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "label":
            raise ValueError(f"{path}: first column must be 'label'")
        labels, rows = [], []
        for rec in reader:
            if not rec:
                continue
            labels.append(rec[0])
            rows.append([float(v) for v in rec[1:]])
    return FeatureTable(np.asarray(rows, dtype=np.float64).reshape(len(rows), len(header) - 1),
                        np.asarray(labels), header[1:])


def write_feature_csv(path, table):
    names = table.names or [f"f{i}" for i in range(table.n_features)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", *names])
        for lab, row in zip(table.labels, table.rows):
            w.writerow([lab, *(repr(float(v)) for v in row)])


# -- PCA ------------------------------------------------------------------------------
@dataclass
class PcaModel:
    mean: np.ndarray  # (D,)
    components: np.ndarray  # (k, D), orthonormal rows
    explained_variance: np.ndarray  # (k,), non-increasing


def pca_fit(table, k):
    x = table.rows if isinstance(table, FeatureTable) else np.asarray(table, dtype=np.float64)
    n, d = x.shape
    if not 1 <= k <= min(n - 1, d):
        raise ValueError(f"k={k} outside [1, {min(n - 1, d)}]")
    mu = x.mean(axis=0)
    xc = x - mu
    cov = xc.T @ xc / (n - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1][:k]
    comps = vecs[:, order].T.copy()
    for row in comps:
        nz = np.flatnonzero(np.abs(row) > 1e-12)
        if nz.size and row[nz[0]] < 0:
            row *= -1
    return PcaModel(mu, comps, np.clip(vals[order], 0.0, None))


def pca_project(model, rows):
    return (np.asarray(rows, dtype=np.float64) - model.mean) @ model.components.T


def pca_reconstruct(model, projected):
    return np.asarray(projected, dtype=np.float64) @ model.components + model.mean


# -- information gain -------------------------------------------------------------------------
def entropy_bits(labels):
    _, counts = np.unique(labels, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


def discretize(values, bins):
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros(len(values), dtype=np.intp)
    idx = np.floor((values - lo) / (hi - lo) * bins).astype(np.intp)
    return np.minimum(idx, bins - 1)


def information_gain(table, feature_index, bins=10):
    """H(labels) - sum_b p(b) H(labels | bin b), equal-width bins, in bits."""
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    binned = discretize(table.rows[:, feature_index], bins)
    labels = table.labels
    cond = 0.0
    for b in np.unique(binned):
        mask = binned == b
        cond += mask.mean() * entropy_bits(labels[mask])
    return max(0.0, entropy_bits(labels) - cond)


# -- correlation-based feature selection ------------------------------------------------------------
def _abs_pearson(a, b):
    sa, sb = a.std(), b.std()
    if sa == 0 or sb == 0:
        return 0.0
    return float(abs(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb)))


def class_correlation(table, feature_index):
    """|Pearson| between a feature and the labels; max over one-vs-rest codings when multiclass."""
    col = table.rows[:, feature_index]
    classes = np.unique(table.labels)
    if len(classes) < 2:
        return 0.0
    codings = classes[1:] if len(classes) == 2 else classes
    return max(_abs_pearson(col, (table.labels == c).astype(np.float64)) for c in codings)


class _CorrCache:
    def __init__(self, table):
        self.table = table
        d = table.n_features
        self.rcf = np.array([class_correlation(table, i) for i in range(d)])
        self._ff = {}

    def ff(self, i, j):
        key = (i, j) if i < j else (j, i)
        if key not in self._ff:
            self._ff[key] = _abs_pearson(self.table.rows[:, key[0]], self.table.rows[:, key[1]])
        return self._ff[key]

    def merit(self, subset):
        subset = sorted(subset)
        k = len(subset)
        if k == 0:
            return 0.0
        r_cf = float(np.mean(self.rcf[subset]))
        if k == 1:
            return r_cf
        pairs = [self.ff(a, b) for a, b in itertools.combinations(subset, 2)]
        r_ff = float(np.mean(pairs))
        return k * r_cf / np.sqrt(k + k * (k - 1) * r_ff)


def cfs_merit(table, subset):
    """k * mean|r_cf| / sqrt(k + k(k-1) * mean|r_ff|); 0 for the empty subset."""
    return _CorrCache(table).merit(subset)


def _rank_key(merit, subset):
    # higher merit first, then smaller subsets, then lexicographic indices
    return (-merit, len(subset), tuple(subset))


def cfs_search(table, strategy="best_first", stall_limit=5):
    """Search feature subsets maximizing CFS merit.

    ``forward`` and ``backward`` are greedy hill climbs that stop at the
    first non-improving step; ``best_first`` keeps a priority queue of
    evaluated subsets and gives up after ``stall_limit`` consecutive
    expansions that fail to improve the best subset found.
    """
    if table.rows.size == 0 or table.n_features == 0:
        raise ValueError("cannot search an empty table")
    cache = _CorrCache(table)
    d = table.n_features
    if strategy == "forward":
        return _greedy(cache, d, forward=True)
    if strategy == "backward":
        return _greedy(cache, d, forward=False)
    if strategy == "best_first":
        return _best_first(cache, d, stall_limit)
    raise ValueError(f"unknown strategy {strategy!r}")


def _greedy(cache, d, forward):
    current = () if forward else tuple(range(d))
    cur_merit = cache.merit(current)
    while True:
        if forward:
            moves = [tuple(sorted(current + (f,))) for f in range(d) if f not in current]
        else:
            moves = [tuple(x for x in current if x != f) for f in current] if len(current) > 1 else []
        if not moves:
            return list(current)
        best = min(moves, key=lambda s: _rank_key(cache.merit(s), s))
        best_merit = cache.merit(best)
        if best_merit <= cur_merit:
            return list(current)
        current, cur_merit = best, best_merit


def greedy_path(table, forward=True):
    """Merits visited along the greedy path (diagnostic)."""
    cache = _CorrCache(table)
    d = table.n_features
    current, merits = (), [0.0]
    while len(current) < d:
        moves = [tuple(sorted(current + (f,))) for f in range(d) if f not in current]
        best = min(moves, key=lambda s: _rank_key(cache.merit(s), s))
        if cache.merit(best) <= merits[-1]:
            break
        current = best
        merits.append(cache.merit(best))
    return merits


def _best_first(cache, d, stall_limit):
    start = ()
    open_heap = [(_rank_key(0.0, start), start)]
    seen = {start}
    best, best_merit = start, 0.0
    stall = 0
    while open_heap and stall < stall_limit:
        _, node = heapq.heappop(open_heap)
        improved = False
        for f in range(d):
            if f in node:
                continue
            child = tuple(sorted(node + (f,)))
            if child in seen:
                continue
            seen.add(child)
            m = cache.merit(child)
            heapq.heappush(open_heap, (_rank_key(m, child), child))
            if _rank_key(m, child) < _rank_key(best_merit, best):
                best, best_merit = child, m
                improved = True
        stall = 0 if improved else stall + 1
    return list(best)


def exhaustive_cfs(table):
    """Best subset by brute-force enumeration (same tie-breaking as the searches)."""
    cache = _CorrCache(table)
    d = table.n_features
    best, best_key = (), _rank_key(0.0, ())
    for k in range(1, d + 1):
        for sub in itertools.combinations(range(d), k):
            key = _rank_key(cache.merit(sub), sub)
            if key < best_key:
                best, best_key = sub, key
    return list(best)


# -- filters ------------------------------------------------------------------------------------
def feature_scores(table, scorer="information_gain", bins=10):
    if scorer == "information_gain":
        return np.array([information_gain(table, i, bins) for i in range(table.n_features)])
    if scorer == "abs_correlation":
        return np.array([class_correlation(table, i) for i in range(table.n_features)])
    raise ValueError(f"unknown scorer {scorer!r}")


def filter_top_n(table, scorer="information_gain", n=10, bins=10):
    """Indices of the ``n`` best-scoring features, score-descending, index-ascending on ties."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    scores = feature_scores(table, scorer, bins)
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return order[:n]


# -- scikit-learn wrappers ----------------------------------------------------------------------------
class PrincipalComponents(TransformerMixin, BaseEstimator):
    def __init__(self, n_components=2):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.model_ = pca_fit(X, self.n_components)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        return pca_project(self.model_, check_array(X, dtype=np.float64))

    def inverse_transform(self, X):
        check_is_fitted(self, "model_")
        return pca_reconstruct(self.model_, check_array(X, dtype=np.float64))

    @property
    def explained_variance_(self):
        return self.model_.explained_variance

    @property
    def components_(self):
        return self.model_.components


class CfsSelector(SelectorMixin, BaseEstimator):
    """Keep the feature subset chosen by correlation-based selection."""

    def __init__(self, strategy="best_first", stall_limit=5):
        self.strategy = strategy
        self.stall_limit = stall_limit

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.n_features_in_ = X.shape[1]
        table = FeatureTable(X, y)
        self.subset_ = sorted(cfs_search(table, self.strategy, self.stall_limit))
        self.merit_ = cfs_merit(table, self.subset_)
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "subset_")
        mask = np.zeros(self.n_features_in_, dtype=bool)
        mask[self.subset_] = True
        return mask


class TopNSelector(SelectorMixin, BaseEstimator):
    """Keep the ``n`` highest-scoring features."""

    def __init__(self, n=10, scorer="information_gain", bins=10):
        self.n = n
        self.scorer = scorer
        self.bins = bins

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.n_features_in_ = X.shape[1]
        table = FeatureTable(X, y)
        self.scores_ = feature_scores(table, self.scorer, self.bins)
        self.ranking_ = filter_top_n(table, self.scorer, min(self.n, X.shape[1]), self.bins)
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "ranking_")
        mask = np.zeros(self.n_features_in_, dtype=bool)
        mask[self.ranking_] = True
        return mask
