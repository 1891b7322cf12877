"""Poisson-binomial distributions of prefix and suffix sums of sorted probabilities.

For probabilities sorted in decreasing order, ``prefix[k][j]`` is the
probability that exactly ``j`` of the ``k`` most probable species are present
and ``suffix[m][j]`` the same for the ``m`` least probable ones.  Both tables
are filled with the usual one-species-at-a-time recursion::

    P(S_{k+1} = j) = p * P(S_k = j - 1) + (1 - p) * P(S_k = j)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_probability_vector

__all__ = [
    "SortedProbabilities",
    "SetSizeDistributionPair",
    "sort_probabilities",
    "build_distributions",
    "poisson_binomial_pmf",
]


@dataclass(frozen=True)
class SortedProbabilities:
    values: np.ndarray
    permutation: np.ndarray

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class SetSizeDistributionPair:
    prefix: np.ndarray
    suffix: np.ndarray

    @property
    def n(self) -> int:
        return self.prefix.shape[0] - 1


def sort_probabilities(eta) -> SortedProbabilities:
    """Sort decreasingly; equal probabilities keep ascending original index."""
    eta = check_probability_vector(eta)
    perm = np.argsort(-eta, kind="stable")
    return SortedProbabilities(eta[perm], perm)


def _chain_table(p: np.ndarray) -> np.ndarray:
    n = len(p)
    table = np.zeros((n + 1, n + 1))
    table[0, 0] = 1.0
    for k in range(n):
        prev = table[k, : k + 1]
        row = table[k + 1]
        row[: k + 1] = (1.0 - p[k]) * prev
        row[1 : k + 2] += p[k] * prev
    return table


def build_distributions(sp: SortedProbabilities) -> SetSizeDistributionPair:
    values = np.asarray(sp.values, dtype=np.float64)
    return SetSizeDistributionPair(_chain_table(values), _chain_table(values[::-1]))


def poisson_binomial_pmf(p) -> np.ndarray:
    """Pmf of the number of successes among independent Bernoulli(p_i), O(N) memory."""
    p = np.asarray(p, dtype=np.float64)
    pmf = np.zeros(len(p) + 1)
    pmf[0] = 1.0
    for k, pk in enumerate(p):
        head = pmf[: k + 1].copy()
        pmf[: k + 1] = (1.0 - pk) * head
        pmf[1 : k + 2] += pk * head
    return pmf
