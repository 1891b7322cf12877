"""Expected-score maximisation over top-k predictions (MaxExp).

Under independent presences and a score that only depends on the confusion
counts (growing with TP/TN, shrinking with FP/FN), the best prediction of
size k is always the k most probable species.  The search therefore reduces
to a scan over k = 0..N of

    E[U | k] = sum_{k1, k2} P(S_k = k1) P(S^k = k2) U'(k1, k - k1, k2, N - k - k2)

where S_k counts presences among the k most probable species and S^k among
the rest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from ._validation import check_orientation, check_probability_matrix, check_probability_vector
from .exceptions import InputError
from .metrics import ScoreSpec, parse_score
from .setdist import (
    SetSizeDistributionPair,
    build_distributions,
    poisson_binomial_pmf,
    sort_probabilities,
)

__all__ = [
    "MaxExpConfig",
    "MaxExpResult",
    "expected_score_at_k",
    "expected_score_curve",
    "fbeta_expected_curve",
    "maxexp_select",
    "maxexp_matrix",
]

SEARCH_MODES = ("full-scan", "first-max")


@dataclass(frozen=True)
class MaxExpConfig:
    """Options for :func:`maxexp_select` and :func:`maxexp_matrix`.

    ``search_mode`` is ``"full-scan"`` (evaluate every k) or ``"first-max"``
    (stop at the first k whose expected score falls below the running
    maximum).  ``fbeta_shortcut`` switches F-beta scores to the O(N^2)
    evaluation; every other score always uses the generic double sum.
    """

    score: ScoreSpec = field(default_factory=ScoreSpec.f1)
    search_mode: str = "full-scan"
    orientation: str = "sample"
    keep_curve: bool = False
    fbeta_shortcut: bool = False

    def __post_init__(self):
        object.__setattr__(self, "score", parse_score(self.score))
        if self.search_mode not in SEARCH_MODES:
            raise InputError(f"search_mode must be one of {SEARCH_MODES}, got {self.search_mode!r}")
        check_orientation(self.orientation)


@dataclass(frozen=True)
class MaxExpResult:
    k_star: int
    selected: tuple
    expected_score: float
    score_curve: Optional[np.ndarray] = None


def _score_grid(spec: ScoreSpec, k: int, n_total: int) -> np.ndarray:
    k1 = np.arange(k + 1)[:, None]
    k2 = np.arange(n_total - k + 1)[None, :]
    return spec.evaluate(k1, k - k1, k2, n_total - k - k2)


def expected_score_at_k(k: int, dist: SetSizeDistributionPair, spec: ScoreSpec, n_total: int) -> float:
    """Expected score of predicting the ``k`` most probable species."""
    if not 0 <= k <= n_total:
        raise InputError(f"k = {k} outside 0..{n_total}")
    top = dist.prefix[k, : k + 1]
    rest = dist.suffix[n_total - k, : n_total - k + 1]
    return float(top @ _score_grid(spec, k, n_total) @ rest)


def fbeta_expected_curve(values: np.ndarray, spec: ScoreSpec) -> np.ndarray:
    """Expected F-beta of every top-k prediction in O(N^2) time and O(N) memory.

    ``values`` must be sorted decreasingly.  Writing F-beta as
    (1 + b^2) TP / (k + b^2 n) with n the number of presences gives, for k > 0,

        E = (1 + b^2) sum_{i <= k} p_i E[1 / (k + b^2 (1 + n_{-i}))]

    where n_{-i} counts presences among all species except i.  The pmf of
    n_{-i} is obtained by dividing the Bernoulli factor of species i out of
    the full pmf, running the recursion in whichever direction is stable.
    """
    if spec.kind != "fbeta":
        raise InputError("the quadratic shortcut only applies to F-beta scores")
    p = np.asarray(values, dtype=np.float64)
    n = len(p)
    full = poisson_binomial_pmf(p)
    curve = np.empty(n + 1)
    curve[0] = full[0] * spec.empty_match.value
    if n == 0:
        return curve
    b2 = spec.beta * spec.beta
    m = np.arange(n)
    acc = np.zeros(n)
    for i, pi in enumerate(p):
        if pi == 0.0:
            loo = full[:n]
        elif pi <= 0.5:
            r = pi / (1.0 - pi)
            loo = lfilter([1.0 / (1.0 - pi)], [1.0, r], full[:n])
        else:
            r = (1.0 - pi) / pi
            loo = lfilter([1.0 / pi], [1.0, r], full[:0:-1])[::-1]
        acc += pi * loo
        k = i + 1
        curve[k] = (1.0 + b2) * (acc @ (1.0 / (k + b2 * (1.0 + m))))
    return curve


def expected_score_curve(eta, spec: ScoreSpec, fbeta_shortcut: bool = False):
    """Return ``(sorted_probabilities, curve)`` with ``curve[k] = E[U | top-k]``."""
    sp = sort_probabilities(eta)
    n = len(sp)
    if fbeta_shortcut and spec.kind == "fbeta":
        return sp, fbeta_expected_curve(sp.values, spec)
    dist = build_distributions(sp)
    return sp, np.array([expected_score_at_k(k, dist, spec, n) for k in range(n + 1)])


def _scan(score_at, n: int, mode: str):
    best_k, best = 0, -np.inf
    evaluated = []
    for k in range(n + 1):
        s = score_at(k)
        evaluated.append(s)
        if s > best:
            best_k, best = k, s
        elif mode == "first-max" and s < best:
            break
    return best_k, best, np.array(evaluated)


def maxexp_select(eta, cfg: MaxExpConfig | None = None) -> MaxExpResult:
    """Best top-k prediction for one probability vector.

    Ties on the expected-score curve go to the smaller k.
    """
    cfg = cfg or MaxExpConfig()
    eta = check_probability_vector(eta)
    spec = cfg.score
    n = len(eta)
    sp = sort_probabilities(eta)
    if cfg.fbeta_shortcut and spec.kind == "fbeta":
        curve = fbeta_expected_curve(sp.values, spec)
        score_at = curve.__getitem__
    else:
        dist = build_distributions(sp)

        def score_at(k):
            return expected_score_at_k(k, dist, spec, n)

    k_star, best, evaluated = _scan(score_at, n, cfg.search_mode)
    keep = cfg.keep_curve or cfg.search_mode == "full-scan"
    return MaxExpResult(
        k_star=k_star,
        selected=tuple(sorted(int(i) for i in sp.permutation[:k_star])),
        expected_score=float(best),
        score_curve=evaluated if keep else None,
    )


def maxexp_matrix(probs, cfg: MaxExpConfig | None = None, n_jobs: int | None = None) -> list:
    """Apply :func:`maxexp_select` to every site (sample orientation) or every
    species column (macro orientation).  Results are in row/column order and
    do not depend on ``n_jobs``.
    """
    cfg = cfg or MaxExpConfig()
    probs = check_probability_matrix(probs)
    units = probs if cfg.orientation == "sample" else probs.T
    if n_jobs is None or n_jobs == 1 or len(units) < 2:
        return [maxexp_select(row, cfg) for row in units]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=n_jobs)(delayed(maxexp_select)(row, cfg) for row in units)
