"""Scoring of binary predictions, paired permutation tests, calibration curves
and prevalence tables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_indicator, check_occurrence_matrix, check_orientation, check_probability_matrix
from .exceptions import InputError
from .metrics import ScoreSpec, parse_score

__all__ = [
    "ScoreVector",
    "PermutationTestResult",
    "CalibrationCurve",
    "PrevalenceTable",
    "unit_scores",
    "score_predictions",
    "permutation_test",
    "calibration_curve",
    "prevalence_table",
]

DEFAULT_PERMUTATIONS = 9999


@dataclass(frozen=True)
class ScoreVector:
    per_unit: np.ndarray
    mean: float
    orientation: str


@dataclass(frozen=True)
class PermutationTestResult:
    p_value: float
    n_permutations: int
    observed_statistic: float
    seed: int

    def to_dict(self):
        return {
            "p_value": self.p_value,
            "n_permutations": self.n_permutations,
            "observed_statistic": self.observed_statistic,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class CalibrationCurve:
    bin_edges: np.ndarray
    bin_mean_prob: np.ndarray
    bin_presence_fraction: np.ndarray
    bin_sigma: np.ndarray
    bin_count: np.ndarray

    @property
    def empty(self) -> np.ndarray:
        """Mask of bins without any cell; their mean and fraction are NaN."""
        return self.bin_count == 0

    def rows(self):
        """One dict per bin; statistics of empty bins are ``None``."""

        def val(x):
            return None if np.isnan(x) else float(x)

        for i in range(len(self.bin_count)):
            yield {
                "bin_lower": float(self.bin_edges[i]),
                "bin_upper": float(self.bin_edges[i + 1]),
                "count": int(self.bin_count[i]),
                "mean_prob": val(self.bin_mean_prob[i]),
                "presence_fraction": val(self.bin_presence_fraction[i]),
                "sigma": val(self.bin_sigma[i]),
                "empty": bool(self.empty[i]),
            }


@dataclass(frozen=True)
class PrevalenceTable:
    """Number of occupied sites per species, predicted vs observed."""

    predicted: np.ndarray
    true: np.ndarray

    def log1p(self):
        return np.log1p(self.predicted), np.log1p(self.true)

    def pairs(self):
        return list(zip(self.predicted.tolist(), self.true.tolist()))


def unit_scores(pred: np.ndarray, truth: np.ndarray, spec: ScoreSpec, orientation: str = "sample") -> np.ndarray:
    """Score of every site (``"sample"``) or every species (``"macro"``) for boolean matrices."""
    axis = 1 if orientation == "sample" else 0
    universe = pred.shape[axis]
    tp = np.count_nonzero(pred & truth, axis=axis)
    n_pred = np.count_nonzero(pred, axis=axis)
    n_true = np.count_nonzero(truth, axis=axis)
    fp = n_pred - tp
    fn = n_true - tp
    return np.atleast_1d(spec.evaluate(tp, fp, fn, universe - n_pred - fn))


def score_predictions(preds, truth, spec, orientation: str = "sample") -> ScoreVector:
    """Score predictions against observed occurrences.

    ``preds`` is a boolean indicator matrix or one iterable of species indices
    per site.
    """
    spec = parse_score(spec)
    check_orientation(orientation)
    truth = check_occurrence_matrix(truth)
    pred = as_indicator(preds, truth.shape)
    per_unit = unit_scores(pred, truth, spec, orientation)
    return ScoreVector(per_unit, float(np.mean(per_unit)), orientation)


def permutation_test(scores_a, scores_b, n_per: int = DEFAULT_PERMUTATIONS, seed: int = 0, batch_size: int = 1000) -> PermutationTestResult:
    """One-sided paired sign-flip test of ``mean(a) > mean(b)``.

    Each permutation flips the sign of every paired difference independently
    with probability 1/2.  Permutations are drawn in fixed-size batches, each
    from a generator seeded by ``(seed, batch_index)``, so the result does not
    depend on how batches are scheduled.  The p-value is
    ``(1 + #{permuted >= observed}) / (1 + n_per)``.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError(f"paired score vectors must be 1-D and equal length, got {a.shape} and {b.shape}")
    if a.size == 0:
        raise InputError("cannot test empty score vectors")
    if n_per < 1:
        raise InputError("n_per must be at least 1")
    if seed < 0:
        raise InputError("seed must be non-negative")
    diff = a - b
    n = diff.size
    observed = float(np.ones(n) @ diff / n)
    exceed = 0
    for batch, start in enumerate(range(0, n_per, batch_size)):
        size = min(batch_size, n_per - start)
        rng = np.random.default_rng([seed, batch])
        signs = rng.integers(0, 2, size=(size, n), dtype=np.int8) * 2 - 1
        stats = signs.astype(np.float64) @ diff / n
        exceed += int(np.count_nonzero(stats >= observed))
    return PermutationTestResult((1 + exceed) / (1 + n_per), int(n_per), observed, int(seed))


def calibration_curve(probs, truth, n_bins: int = 20) -> CalibrationCurve:
    """Reliability diagram data over equal-width bins of [0, 1].

    The last bin is closed on the right.  ``sigma`` is the binomial standard
    error of the presence fraction, with the fraction pulled 1/(2n) away from
    0 and 1 so that pure bins keep a non-zero band.
    """
    if n_bins < 1:
        raise InputError("n_bins must be at least 1")
    probs = check_probability_matrix(probs)
    truth = check_occurrence_matrix(truth, probs.shape)
    p = probs.ravel()
    y = truth.ravel().astype(np.float64)
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    which = np.clip(np.searchsorted(edges, p, side="right") - 1, 0, n_bins - 1)
    count = np.bincount(which, minlength=n_bins)
    sum_p = np.bincount(which, weights=p, minlength=n_bins)
    sum_y = np.bincount(which, weights=y, minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_p = sum_p / count
        frac = sum_y / count
        half = 0.5 / count
        f = np.clip(frac, half, 1.0 - half)
        sigma = np.sqrt(f * (1.0 - f) / count)
    return CalibrationCurve(edges, mean_p, frac, sigma, count)


def prevalence_table(preds, truth) -> PrevalenceTable:
    truth = check_occurrence_matrix(truth)
    pred = as_indicator(preds, truth.shape)
    return PrevalenceTable(np.count_nonzero(pred, axis=0), np.count_nonzero(truth, axis=0))
