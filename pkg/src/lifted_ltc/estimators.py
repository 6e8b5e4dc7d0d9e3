"""Estimator-style wrappers so lifted codes plug into array pipelines.

Rows of ``X`` are words on ``V`` in the system's vertex order.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import StructuralError
from .linear_code import DEFAULT_BUDGET
from .self_correct import iterative_self_correct
from .tanner import LiftedCodeFamily


def check_words(X, n_features: int, p: int) -> np.ndarray:
    """Validate a batch of words: 2-D integers with ``n_features`` columns, entries in ``[0, p)``."""
    X = check_array(X, dtype=np.int64, ensure_all_finite=True)
    if X.shape[1] != n_features:
        raise StructuralError(f"expected {n_features} coordinates per word, got {X.shape[1]}")
    if X.size and (X.min() < 0 or X.max() >= p):
        raise StructuralError(f"word entries must lie in [0, {p})")
    return X


class TannerTester(BaseEstimator):
    """Membership and rejection probability of the natural test on a lifted code.

    ``predict`` returns 1 for codewords; ``score_samples`` returns the exact
    rejection probability as a float.
    """

    def __init__(self, system=None, base=None, p=None, budget=DEFAULT_BUDGET):
        self.system = system
        self.base = base
        self.p = p
        self.budget = budget

    def fit(self, X=None, y=None):
        self.family_ = LiftedCodeFamily(self.system, self.base, self.p, budget=self.budget)
        self.n_features_in_ = len(self.system.V)
        return self

    def fail_probabilities(self, X) -> list:
        check_is_fitted(self, "family_")
        X = check_words(X, self.n_features_in_, self.family_.p)
        return [self.family_.fail_probability(row) for row in X]

    def score_samples(self, X) -> np.ndarray:
        return np.array([float(f) for f in self.fail_probabilities(X)])

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "family_")
        X = check_words(X, self.n_features_in_, self.family_.p)
        return self.family_.code.contains_many(X).astype(np.int64)


class SelfCorrector(TransformerMixin, BaseEstimator):
    """Runs iterative self-correction on each row; ``transform`` returns the terminal words."""

    def __init__(self, system=None, base=None, graph=None, p=None, round_cap=None, budget=DEFAULT_BUDGET):
        self.system = system
        self.base = base
        self.graph = graph
        self.p = p
        self.round_cap = round_cap
        self.budget = budget

    def fit(self, X=None, y=None):
        self.family_ = LiftedCodeFamily(self.system, self.base, self.p, budget=self.budget)
        self.n_features_in_ = len(self.system.V)
        return self

    def correct(self, X) -> list:
        check_is_fitted(self, "family_")
        X = check_words(X, self.n_features_in_, self.family_.p)
        return [iterative_self_correct(self.family_, self.graph, row, self.round_cap) for row in X]

    def transform(self, X) -> np.ndarray:
        traces = self.correct(X)
        if not traces:
            return np.zeros((0, self.n_features_in_), dtype=np.int64)
        return np.array([self.family_.global_values(t.terminal) for t in traces], dtype=np.int64)
