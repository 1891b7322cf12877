"""Acceptance checks.  Each test records one PASS/FAIL line, printed in the
"acceptance criteria" section of the pytest summary, then asserts."""

import itertools
import time
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from conftest import ALL_SCORES, MALFORMED_CASES, MALFORMED_DIR
from scipy import stats
from scipy.special import expit, logit

from maxexp.baselines import BinarizationMethod, apply_method, calibrate, sse_size, top_k_indices
from maxexp.data_io import (
    OccurrenceMatrix,
    PredictionFile,
    ProbabilityMatrix,
    read_matrix,
    read_predictions,
    write_matrix,
    write_predictions,
)
from maxexp.evaluation import permutation_test, unit_scores
from maxexp.metrics import ConfusionCounts, ScoreSpec, score_value
from maxexp.optimizer import MaxExpConfig, expected_score_curve, fbeta_expected_curve, maxexp_matrix, maxexp_select
from maxexp.oracle import enumerated_pmf, exact_expected_score, exhaustive_best_sets
from maxexp.setdist import build_distributions, sort_probabilities

# seeds fixed before any run
SEED = 0


def synthetic(seed, n_sites=500, n_species=30):
    """Known presence probabilities with log-uniform prevalences, and truth drawn from them."""
    rng = np.random.default_rng(seed)
    prevalence = np.exp(rng.uniform(np.log(0.01), np.log(0.5), size=n_species))
    eta = expit(logit(prevalence) + rng.normal(0.0, 1.5, size=(n_sites, n_species)))
    truth = rng.uniform(size=eta.shape) < eta
    return eta, truth


def is_top_k(eta, chosen):
    eta = np.asarray(eta)
    inside = eta[list(chosen)]
    outside = np.delete(eta, list(chosen))
    return not len(inside) or not len(outside) or inside.min() >= outside.max()


def test_c01_oracle_optimality(acceptance):
    rng = np.random.default_rng(SEED)
    start = time.perf_counter()
    worst, not_top_k, n_checked = 0.0, 0, 0
    for _ in range(1000):
        eta = rng.uniform(size=int(rng.integers(1, 13)))
        best = exhaustive_best_sets(eta, ALL_SCORES)
        for spec, (_, value) in zip(ALL_SCORES, best):
            res = maxexp_select(eta, MaxExpConfig(score=spec))
            worst = max(worst, abs(res.expected_score - value))
            not_top_k += not is_top_k(eta, res.selected)
            n_checked += 1
    elapsed = time.perf_counter() - start
    passed = worst <= 1e-10 and not_top_k == 0 and elapsed < 120
    acceptance(1, "oracle optimality", passed, f"{n_checked} checks, max gap {worst:.1e}, non-top-k {not_top_k}, {elapsed:.1f}s")
    assert passed


def test_c02_dp_correctness(acceptance):
    rng = np.random.default_rng(SEED)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(500):
        sp = sort_probabilities(rng.uniform(size=int(rng.integers(1, 15))))
        d = build_distributions(sp)
        n = len(sp)
        for k in range(n + 1):
            worst = max(worst, np.abs(d.prefix[k, : k + 1] - enumerated_pmf(sp.values[:k])).max())
            worst = max(worst, np.abs(d.suffix[k, : k + 1] - enumerated_pmf(sp.values[::-1][:k])).max())
    worst_sum = 0.0
    for n in (1, 10, 100, 256, 512):
        d = build_distributions(sort_probabilities(rng.uniform(size=n)))
        worst_sum = max(worst_sum, np.abs(d.prefix.sum(axis=1) - 1).max(), np.abs(d.suffix.sum(axis=1) - 1).max())
    elapsed = time.perf_counter() - start
    passed = worst <= 1e-12 and worst_sum <= 1e-9 and elapsed < 60
    acceptance(2, "DP correctness", passed, f"max pmf error {worst:.1e}, max row-sum error {worst_sum:.1e}, {elapsed:.1f}s")
    assert passed


def test_c03_dominance(acceptance):
    rng = np.random.default_rng(SEED)
    cal_eta = rng.uniform(size=(200, 10)) ** 2
    cal_truth = rng.uniform(size=cal_eta.shape) < cal_eta
    violations, comparisons = [], 0
    for spec in ALL_SCORES:
        k_cal = calibrate("topk", cal_eta, cal_truth, spec).method.params["k"]
        for _ in range(150):
            eta = rng.uniform(size=10) ** rng.choice([1, 2, 3])
            mine = exact_expected_score(maxexp_select(eta, MaxExpConfig(score=spec)).selected, eta, spec)
            rivals = [apply_method(BinarizationMethod("sse"), eta), top_k_indices(eta, k_cal)]
            rivals += [apply_method(BinarizationMethod("threshold", {"t": float(t)}), eta) for t in np.r_[0.0, eta, 1.0]]
            for other in rivals:
                comparisons += 1
                if mine < exact_expected_score(other, eta, spec):
                    violations.append((spec.token, eta.tolist(), other))
    # large N: every top-k rival is a point of the same curve
    for spec in ALL_SCORES:
        eta = rng.uniform(size=400) ** 3
        res = maxexp_select(eta, MaxExpConfig(score=spec))
        for k in (sse_size(eta), int(np.count_nonzero(eta >= 0.5))):
            comparisons += 1
            if res.expected_score < res.score_curve[k]:
                violations.append((spec.token, "N=400", k))
    passed = not violations
    acceptance(3, "dominance", passed, f"{comparisons} comparisons, {len(violations)} violations")
    assert passed, violations[:3]


def counts_up_to(total):
    for n in range(total + 1):
        for tp, fp, fn in itertools.product(range(n + 1), repeat=3):
            if tp + fp + fn <= n:
                yield ConfusionCounts(tp, fp, fn, n - tp - fp - fn)


def direct(spec, c):
    if spec.kind == "tss":
        sens = c.tp / (c.tp + c.fn) if c.tp + c.fn else spec.tss_empty_class_value
        spec_ = c.tn / (c.tn + c.fp) if c.tn + c.fp else spec.tss_empty_class_value
        return sens + spec_ - 1
    if c.tp + c.fp + c.fn == 0:
        return spec.empty_match.value
    if spec.kind == "jaccard":
        return float(Fraction(c.tp, c.tp + c.fp + c.fn))
    b2 = Fraction(spec.beta) ** 2
    return float((1 + b2) * c.tp / ((1 + b2) * c.tp + b2 * c.fn + c.fp))


def test_c04_score_formulas(acceptance):
    mismatches = identity = monotone = 0
    n = 0
    for c in counts_up_to(20):
        n += 1
        for spec in ALL_SCORES:
            v = score_value(spec, c)
            mismatches += v != direct(spec, c)
            if c.fn:
                monotone += score_value(spec, c._replace(tp=c.tp + 1, fn=c.fn - 1)) < v
            if c.fp:
                monotone += score_value(spec, c._replace(tn=c.tn + 1, fp=c.fp - 1)) < v
        if c.tp + c.fp + c.fn:
            j = Fraction(c.tp, c.tp + c.fp + c.fn)
            f1 = Fraction(2 * c.tp, 2 * c.tp + c.fp + c.fn)
            identity += f1 != 2 * j / (1 + j)
            identity += score_value(ScoreSpec.f1(), c) != float(2 * j / (1 + j))
    passed = mismatches == identity == monotone == 0
    acceptance(4, "score formulas", passed, f"{n} count tuples, {mismatches} formula / {identity} identity / {monotone} monotonicity failures")
    assert passed


def test_c05_mode_agreement(acceptance):
    rng = np.random.default_rng(SEED)
    disagreements = Counter()
    example = None
    for i in range(10_000):
        eta = rng.uniform(size=int(rng.integers(1, 21))) ** (3 if i % 2 else 1)
        for spec in ALL_SCORES:
            full = maxexp_select(eta, MaxExpConfig(score=spec))
            first = maxexp_select(eta, MaxExpConfig(score=spec, search_mode="first-max"))
            if full.k_star != first.k_star:
                disagreements[spec.token] += 1
                if example is None or len(eta) < len(example[1]):
                    example = (spec.token, np.round(np.sort(eta)[::-1], 4).tolist(), full.k_star, first.k_star,
                               full.expected_score - first.expected_score)
    total = sum(disagreements.values())
    detail = f"{total}/40000 disagree"
    if total:
        detail += f" {dict(disagreements)}; e.g. {example[0]} eta={example[1]} full k*={example[2]} first-max k*={example[3]} (gap {example[4]:.3f})"
    acceptance(5, "mode agreement", total == 0, detail)
    assert total == 0, detail


def test_c06_permutation_sanity(acceptance):
    import inspect

    a = np.random.default_rng(SEED).uniform(size=60)
    p_same = permutation_test(a, a.copy()).p_value
    rng = np.random.default_rng(SEED)
    pvalues = []
    for rep in range(500):
        base = rng.uniform(size=50)
        noise = rng.normal(0.0, 0.1, size=(2, 50))
        pvalues.append(permutation_test(base + noise[0], base + noise[1], 999, seed=rep).p_value)
    ks = stats.kstest(pvalues, "uniform").statistic
    default = inspect.signature(permutation_test).parameters["n_per"].default
    passed = p_same == 1.0 and ks < 0.05 and default == 9999
    acceptance(6, "permutation test sanity", passed, f"identical p={p_same}, null KS distance {ks:.4f}, default n_per {default}")
    assert passed


def test_c07_calibrated_superiority(acceptance):
    start = time.perf_counter()
    eta, truth = synthetic(SEED)
    cal_eta, cal_truth = synthetic(SEED + 1)
    spec = ScoreSpec.f1()
    k = calibrate("topk", cal_eta, cal_truth, spec).method.params["k"]
    preds = {
        "maxexp": np.zeros(eta.shape, dtype=bool),
        "threshold:0.5": eta >= 0.5,
        f"topk:{k}": np.zeros(eta.shape, dtype=bool),
        "sse": np.zeros(eta.shape, dtype=bool),
    }
    for row, res in enumerate(maxexp_matrix(eta, MaxExpConfig(score=spec, fbeta_shortcut=True))):
        preds["maxexp"][row, list(res.selected)] = True
    for row, p in enumerate(eta):
        preds[f"topk:{k}"][row, list(top_k_indices(p, k))] = True
        preds["sse"][row, list(apply_method(BinarizationMethod("sse"), p))] = True
    scores = {name: unit_scores(pred, truth, spec) for name, pred in preds.items()}
    ours = scores.pop("maxexp")
    pvals = {name: permutation_test(ours, other, seed=SEED).p_value for name, other in scores.items()}
    elapsed = time.perf_counter() - start
    means = {name: round(float(v.mean()), 4) for name, v in scores.items()}
    passed = all(ours.mean() >= v.mean() for v in scores.values()) and pvals["threshold:0.5"] < 0.05 and elapsed < 60
    acceptance(7, "calibrated-data superiority", passed,
               f"maxexp F1 {ours.mean():.4f} vs {means}, p {pvals}, {elapsed:.1f}s")
    assert passed


def test_c08_prevalence_distortion(acceptance):
    wins = 0
    for trial in range(100):
        eta, _ = synthetic(trial)
        f1 = sum(len(r.selected) for r in maxexp_matrix(eta, MaxExpConfig(score=ScoreSpec.f1(), fbeta_shortcut=True)))
        f2 = sum(len(r.selected) for r in maxexp_matrix(eta, MaxExpConfig(score=ScoreSpec.f2(), fbeta_shortcut=True)))
        wins += f2 >= f1
    passed = wins >= 95
    acceptance(8, "prevalence distortion", passed, f"F2 total prevalence >= F1 in {wins}/100 trials")
    assert passed


def test_c09_complexity(acceptance):
    rng = np.random.default_rng(SEED)
    start = time.perf_counter()
    maxexp_select(rng.uniform(size=1000), MaxExpConfig(score=ScoreSpec.tss()))
    t_tss = time.perf_counter() - start
    start = time.perf_counter()
    maxexp_select(rng.uniform(size=5000), MaxExpConfig(score=ScoreSpec.f1(), fbeta_shortcut=True))
    t_fast = time.perf_counter() - start
    worst = 0.0
    for n in (1, 5, 20, 100, 300):
        for spec in (ScoreSpec.f1(), ScoreSpec.f2()):
            eta = rng.uniform(size=n)
            _, generic = expected_score_curve(eta, spec)
            fast = fbeta_expected_curve(sort_probabilities(eta).values, spec)
            worst = max(worst, np.abs(fast - generic).max())
    passed = t_tss < 30 and t_fast < 10 and worst <= 1e-10
    acceptance(9, "complexity envelope", passed, f"TSS N=1000 {t_tss:.2f}s, F-beta shortcut N=5000 {t_fast:.2f}s, shortcut gap {worst:.1e}")
    assert passed


def test_c10_io(acceptance, tmp_path):
    rng = np.random.default_rng(SEED)
    lossless = 0
    for i in range(200):
        n_sites, n_species = (int(x) for x in rng.integers(1, 15, size=2))
        sites = [f"site {j}" for j in rng.permutation(10_000)[:n_sites]]
        species = [f"sp,{j}" for j in rng.permutation(10_000)[:n_species]]
        if i % 2:
            values = rng.uniform(size=(n_sites, n_species))
            values[rng.uniform(size=values.shape) < 0.1] = 0.0
            kind, m = "probability", ProbabilityMatrix(sites, species, values)
            occ = OccurrenceMatrix(sites, species, values > 0.5)
            write_matrix(m, tmp_path / f"{i}.csv")
            write_matrix(occ, tmp_path / f"{i}o.csv")
            lossless += read_matrix(tmp_path / f"{i}.csv", kind) == m and read_matrix(tmp_path / f"{i}o.csv", "occurrence") == occ
        else:
            preds = PredictionFile.from_indicator(rng.uniform(size=(n_sites, n_species)) < 0.3, sites, species)
            write_predictions(preds, tmp_path / f"{i}.csv", method="maxexp", score="f1")
            lossless += read_predictions(tmp_path / f"{i}.csv") == preds
    typed = 0
    for name, (reader, error, fragment) in MALFORMED_CASES.items():
        try:
            if reader == "predictions":
                read_predictions(MALFORMED_DIR / name)
            else:
                read_matrix(MALFORMED_DIR / name, reader)
        except error as exc:
            typed += fragment in str(exc)
    passed = lossless == 200 and typed == len(MALFORMED_CASES) >= 10
    acceptance(10, "I/O round-trips", passed, f"{lossless}/200 lossless, {typed}/{len(MALFORMED_CASES)} malformed files raise the expected error")
    assert passed
