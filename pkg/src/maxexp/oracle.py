"""Brute-force references used to verify the optimizer.

Everything here enumerates all 2^N presence/absence outcomes explicitly, so
it is only usable for small species counts.  Outcomes are encoded as bit
masks: bit i of the mask is set iff species i is present.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_probability_vector
from .exceptions import InputError, LimitError
from .metrics import ScoreSpec

__all__ = ["OracleLimits", "exact_expected_score", "exhaustive_best_set", "exhaustive_best_sets", "enumerated_pmf"]

_CHUNK_CELLS = 1 << 22


@dataclass(frozen=True)
class OracleLimits:
    max_species: int = 20


def _check_size(n: int, limits: OracleLimits | None):
    limit = (limits or OracleLimits()).max_species
    if n > limit:
        raise LimitError(f"brute-force enumeration refused: {n} species exceeds the limit of {limit}")


def _outcome_probabilities(eta: np.ndarray) -> np.ndarray:
    # index bit i <-> species i
    probs = np.ones(1)
    for p in eta:
        probs = np.concatenate([probs * (1.0 - p), probs * p])
    return probs


def _score_table(spec: ScoreSpec, n: int) -> np.ndarray:
    """``table[k, m, t]`` = U' for a size-k prediction, m presences, t hits.

    Impossible (k, m, t) combinations are set to 0 and never looked up.
    """
    k, m, t = np.ogrid[: n + 1, : n + 1, : n + 1]
    valid = (t <= k) & (t <= m) & (k + m - t <= n)
    fp, fn, tn = k - t, m - t, n - k - m + t
    vals = spec.evaluate(np.where(valid, t, 0), np.where(valid, fp, 0), np.where(valid, fn, 0), np.where(valid, tn, 0))
    return np.where(valid, vals, 0.0)


def _expected_scores(candidates: np.ndarray, eta: np.ndarray, specs) -> np.ndarray:
    """Expected score of each candidate mask under each spec, shape (len(specs), len(candidates))."""
    n = len(eta)
    outcomes = np.arange(1 << n, dtype=np.uint32)
    weights = _outcome_probabilities(eta)
    stride = n + 1
    n_present = np.bitwise_count(outcomes).astype(np.int32) * stride
    tables = [_score_table(spec, n).ravel() for spec in specs]
    out = np.empty((len(specs), len(candidates)))
    chunk = max(1, _CHUNK_CELLS >> n)
    for start in range(0, len(candidates), chunk):
        cand = candidates[start : start + chunk]
        size = np.bitwise_count(cand).astype(np.int32) * (stride * stride)
        idx = np.bitwise_count(cand[:, None] & outcomes[None, :]).astype(np.int32)
        idx += n_present
        idx += size[:, None]
        for row, flat in enumerate(tables):
            out[row, start : start + chunk] = flat.take(idx) @ weights
    return out


def exact_expected_score(candidate, eta, spec: ScoreSpec, limits: OracleLimits | None = None) -> float:
    """E[U(candidate, Y)] by summing over every outcome Y."""
    eta = check_probability_vector(eta)
    n = len(eta)
    _check_size(n, limits)
    mask = 0
    for i in candidate:
        i = int(i)
        if not 0 <= i < n:
            raise InputError(f"candidate index {i} out of range 0..{n - 1}")
        mask |= 1 << i
    return float(_expected_scores(np.array([mask], dtype=np.uint32), eta, [spec])[0, 0])


def exhaustive_best_set(eta, spec: ScoreSpec, limits: OracleLimits | None = None):
    """Best of all 2^N candidate sets; exact ties go to the lexicographically smallest set."""
    return exhaustive_best_sets(eta, [spec], limits)[0]


def exhaustive_best_sets(eta, specs, limits: OracleLimits | None = None) -> list:
    """:func:`exhaustive_best_set` for several scores, sharing the enumeration."""
    eta = check_probability_vector(eta)
    n = len(eta)
    _check_size(n, limits)
    candidates = np.arange(1 << n, dtype=np.uint32)
    results = []
    for scores in _expected_scores(candidates, eta, list(specs)):
        best = scores.max()
        tied = [_mask_to_set(int(c), n) for c in candidates[scores == best]]
        results.append((min(tied), float(best)))
    return results


def enumerated_pmf(eta, limits: OracleLimits | None = None) -> np.ndarray:
    eta = check_probability_vector(eta)
    n = len(eta)
    _check_size(n, limits)
    counts = np.bitwise_count(np.arange(1 << n, dtype=np.uint32))
    return np.bincount(counts, weights=_outcome_probabilities(eta), minlength=n + 1)


def _mask_to_set(mask: int, n: int) -> tuple:
    return tuple(i for i in range(n) if mask >> i & 1)
