import itertools

import numpy as np
import pytest

from maxexp.exceptions import LimitError
from maxexp.metrics import ScoreSpec, confusion_counts, score_value
from maxexp.oracle import OracleLimits, enumerated_pmf, exact_expected_score, exhaustive_best_set, exhaustive_best_sets
from maxexp.optimizer import expected_score_at_k
from maxexp.setdist import build_distributions, sort_probabilities


def naive_expected(candidate, eta, spec):
    """Independent double loop over outcomes, one score_value call each."""
    n = len(eta)
    total = 0.0
    for y in itertools.product((0, 1), repeat=n):
        prob = np.prod([p if yi else 1 - p for p, yi in zip(eta, y)])
        truth = {i for i in range(n) if y[i]}
        total += prob * score_value(spec, confusion_counts(candidate, truth, n))
    return total


def test_examples():
    f1 = ScoreSpec.f1()
    assert exact_expected_score({0, 1}, [0.9, 0.8, 0.1], f1) == pytest.approx(0.8746, abs=1e-12)
    assert exact_expected_score(set(), [0.0] * 4, f1) == 1.0
    assert exact_expected_score({0}, [1.0], f1) == 1.0
    assert exhaustive_best_set([0.9, 0.8, 0.1], f1)[0] == (0, 1)
    assert exhaustive_best_set([0.9, 0.8, 0.1], f1)[1] == pytest.approx(0.8746, abs=1e-12)
    assert exhaustive_best_set([1, 1, 1], ScoreSpec.jaccard())[0] == (0, 1, 2)
    np.testing.assert_allclose(enumerated_pmf([0.5, 0.5]), [0.25, 0.5, 0.25])
    np.testing.assert_allclose(enumerated_pmf([0.9, 0.8, 0.1]), [0.018, 0.236, 0.674, 0.072], atol=1e-15)
    assert enumerated_pmf([]).tolist() == [1.0]


def test_coin_tie_goes_to_empty_set():
    chosen, value = exhaustive_best_set([0.5], ScoreSpec.tss())
    assert chosen == ()
    assert exact_expected_score({0}, [0.5], ScoreSpec.tss()) == value


def test_matches_naive_enumeration(rng, score):
    for _ in range(20):
        n = int(rng.integers(0, 7))
        eta = rng.uniform(size=n)
        cand = {i for i in range(n) if rng.uniform() < 0.5}
        assert exact_expected_score(cand, eta, score) == pytest.approx(naive_expected(cand, eta, score), abs=1e-12)


def test_top_k_matches_dp(rng, score):
    for _ in range(10):
        n = int(rng.integers(1, 15))
        eta = rng.uniform(size=n)
        sp = sort_probabilities(eta)
        dist = build_distributions(sp)
        for k in range(n + 1):
            top = sp.permutation[:k]
            assert abs(exact_expected_score(top, eta, score) - expected_score_at_k(k, dist, score, n)) <= 1e-10


def test_best_set_is_top_k(rng):
    specs = [ScoreSpec.f1(), ScoreSpec.f2(), ScoreSpec.jaccard(), ScoreSpec.tss(), ScoreSpec("fbeta", 0.5)]
    for _ in range(100):
        eta = rng.uniform(size=int(rng.integers(1, 9)))
        order = np.argsort(-eta, kind="stable")
        for chosen, _ in exhaustive_best_sets(eta, specs):
            assert set(chosen) == set(order[: len(chosen)].tolist())


def test_limits():
    with pytest.raises(LimitError, match="limit of 3"):
        enumerated_pmf([0.5] * 4, OracleLimits(3))
    with pytest.raises(LimitError):
        exact_expected_score([], [0.5] * 21, ScoreSpec.f1())
