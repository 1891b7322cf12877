"""scikit-learn compatible binarizers.

All binarizers map a ``(n_sites, n_species)`` probability matrix to a boolean
presence matrix of the same shape through ``transform``.  Supervised ones
calibrate their parameter in ``fit(X, y)`` unless it was given explicitly.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_occurrence_matrix, check_probability_matrix
from .baselines import BinarizationMethod, apply_method_matrix, calibrate
from .exceptions import InputError
from .metrics import parse_score
from .optimizer import MaxExpConfig, maxexp_matrix

__all__ = [
    "MaxExpBinarizer",
    "GlobalThresholdBinarizer",
    "SpeciesThresholdBinarizer",
    "TopKBinarizer",
    "SSEBinarizer",
    "ConformalBinarizer",
]


class _Binarizer(TransformerMixin, BaseEstimator):
    orientation = "sample"

    def _check_X(self, X, reset=False):
        X = check_probability_matrix(X, "X")
        if reset:
            self.n_features_in_ = X.shape[1]
        elif X.shape[1] != self.n_features_in_:
            raise InputError(f"X has {X.shape[1]} species, binarizer was fitted with {self.n_features_in_}")
        return X

    def predict_sets(self, X) -> list:
        """One sorted tuple of species indices per site."""
        return [tuple(int(i) for i in np.flatnonzero(row)) for row in self.transform(X)]


class _MethodBinarizer(_Binarizer):
    """Shared fit/transform for the methods implemented in :mod:`.baselines`."""

    def _method(self, X, y):
        raise NotImplementedError

    def fit(self, X, y=None):
        X = self._check_X(X, reset=True)
        if y is not None:
            y = check_occurrence_matrix(y, X.shape, "y")
        self.method_ = self._method(X, y)
        return self

    def transform(self, X):
        check_is_fitted(self, "method_")
        X = self._check_X(X)
        return apply_method_matrix(self.method_, X, self.orientation)

    def _calibrate(self, kind, X, y, **kw):
        if y is None:
            raise InputError(f"{type(self).__name__} needs occurrence data y to calibrate")
        self.report_ = calibrate(kind, X, y, self.objective, self.orientation, **kw)
        return self.report_.method


class MaxExpBinarizer(_Binarizer):
    """Predict, per site, the species set with the highest expected score.

    Parameters
    ----------
    score : str or ScoreSpec, default="f1"
    search_mode : {"full-scan", "first-max"}
    orientation : {"sample", "macro"}
        ``"macro"`` optimises each species column over the sites instead.
    fbeta_shortcut : bool
        Use the quadratic evaluation for F-beta scores.
    n_jobs : int, optional
        Workers for :func:`joblib.Parallel`; results do not depend on it.
    """

    def __init__(self, score="f1", search_mode="full-scan", orientation="sample", fbeta_shortcut=False, n_jobs=None):
        self.score = score
        self.search_mode = search_mode
        self.orientation = orientation
        self.fbeta_shortcut = fbeta_shortcut
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        self._check_X(X, reset=True)
        self.config_ = MaxExpConfig(
            score=parse_score(self.score),
            search_mode=self.search_mode,
            orientation=self.orientation,
            fbeta_shortcut=self.fbeta_shortcut,
        )
        return self

    def select(self, X) -> list:
        """Per-unit :class:`~maxexp.optimizer.MaxExpResult` objects."""
        check_is_fitted(self, "config_")
        X = self._check_X(X)
        return maxexp_matrix(X, self.config_, n_jobs=self.n_jobs)

    def transform(self, X):
        check_is_fitted(self, "config_")
        X_checked = self._check_X(X)
        results = self.select(X_checked)
        units = np.zeros(X_checked.shape if self.orientation == "sample" else X_checked.T.shape, dtype=bool)
        for row, res in enumerate(results):
            units[row, list(res.selected)] = True
        return units if self.orientation == "sample" else units.T


class GlobalThresholdBinarizer(_MethodBinarizer):
    def __init__(self, threshold=None, objective="f1", orientation="sample"):
        self.threshold = threshold
        self.objective = objective
        self.orientation = orientation

    def _method(self, X, y):
        if self.threshold is not None:
            return BinarizationMethod("threshold", {"t": float(self.threshold)})
        return self._calibrate("threshold", X, y)


class SpeciesThresholdBinarizer(_MethodBinarizer):
    def __init__(self, thresholds=None, objective="f1", orientation="macro"):
        self.thresholds = thresholds
        self.objective = objective
        self.orientation = orientation

    def _method(self, X, y):
        if self.thresholds is not None:
            return BinarizationMethod("species-threshold", {"t_s": list(map(float, self.thresholds))})
        return self._calibrate("species-threshold", X, y)


class TopKBinarizer(_MethodBinarizer):
    def __init__(self, k=None, objective="f1", orientation="sample"):
        self.k = k
        self.objective = objective
        self.orientation = orientation

    def _method(self, X, y):
        if self.k is not None:
            return BinarizationMethod("topk", {"k": int(self.k)})
        return self._calibrate("topk", X, y)


class SSEBinarizer(_MethodBinarizer):
    """Top-k with k the rounded expected richness; unsupervised."""

    def __init__(self, rounding="half-even", orientation="sample"):
        self.rounding = rounding
        self.orientation = orientation

    def _method(self, X, y):
        return BinarizationMethod("sse", {"rounding": self.rounding})


class ConformalBinarizer(_MethodBinarizer):
    def __init__(self, alpha=0.1, objective="f1", orientation="sample"):
        self.alpha = alpha
        self.objective = objective
        self.orientation = orientation

    def _method(self, X, y):
        return self._calibrate("conformal", X, y, alpha=self.alpha)
