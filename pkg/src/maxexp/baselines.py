"""Reference binarization methods and their supervised calibration.

Methods
-------
threshold
    Global threshold t: predict every species with probability >= t.
species-threshold
    One threshold per species column.
topk
    The k most probable species (ties broken by ascending index).
sse
    Set Size Expectation: the top-k species with k the rounded sum of the
    probabilities, i.e. the expected richness.  Needs no calibration.
conformal
    Split-conformal presence threshold.  Nonconformity of a true presence is
    ``1 - p``; the threshold is chosen so that at least a ``1 - alpha``
    fraction of calibration presences (with the usual finite-sample
    correction) is predicted.  This is our reading of the conformal baseline,
    not a transcription of a published procedure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_occurrence_matrix, check_orientation, check_probability_matrix, check_probability_vector
from .evaluation import unit_scores
from .exceptions import InputError
from .metrics import ScoreSpec, parse_score

__all__ = [
    "METHOD_KINDS",
    "BinarizationMethod",
    "CalibrationReport",
    "apply_method",
    "apply_method_matrix",
    "top_k_indices",
    "sse_size",
    "calibrate",
]

METHOD_KINDS = ("threshold", "species-threshold", "topk", "sse", "conformal")
ROUNDING = ("half-even", "floor", "ceil")
# candidates whose sweep objective is this close to the best are re-scored directly
_REFINE_TOL = 1e-9


@dataclass(frozen=True)
class BinarizationMethod:
    """A binarization rule with its (fitted) parameters.

    ``params`` keys by kind: threshold -> ``t``; species-threshold -> ``t_s``
    (list); topk -> ``k``; sse -> ``rounding``; conformal -> ``alpha`` and,
    once fitted, ``t``.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in METHOD_KINDS:
            raise InputError(f"unknown method {self.kind!r}; expected one of {METHOD_KINDS}")
        p = self.params
        if self.kind in ("threshold", "conformal") and "t" in p and not 0.0 <= p["t"] <= 1.0:
            raise InputError(f"threshold must lie in [0, 1], got {p['t']!r}")
        if self.kind == "species-threshold" and "t_s" in p:
            t_s = np.asarray(p["t_s"], dtype=np.float64)
            if t_s.ndim != 1 or not ((t_s >= 0) & (t_s <= 1)).all():
                raise InputError("per-species thresholds must be a vector of values in [0, 1]")
        if self.kind == "topk" and "k" in p and (int(p["k"]) != p["k"] or p["k"] < 0):
            raise InputError(f"k must be a non-negative integer, got {p['k']!r}")
        if self.kind == "conformal" and not 0.0 < p.get("alpha", 0.1) < 1.0:
            raise InputError("alpha must lie in (0, 1)")
        if self.kind == "sse" and p.get("rounding", "half-even") not in ROUNDING:
            raise InputError(f"rounding must be one of {ROUNDING}")

    @property
    def is_fitted(self) -> bool:
        need = {"threshold": "t", "species-threshold": "t_s", "topk": "k", "conformal": "t"}.get(self.kind)
        return need is None or need in self.params

    def to_dict(self):
        params = {k: (np.asarray(v).tolist() if isinstance(v, np.ndarray) else v) for k, v in self.params.items()}
        return {"kind": self.kind, "params": params}


@dataclass(frozen=True)
class CalibrationReport:
    method: BinarizationMethod
    objective: ScoreSpec
    achieved_score: float
    grid_evaluations: int
    orientation: str = "sample"

    def to_dict(self, fitted_on: str | None = None):
        d = self.method.to_dict()
        d.update(
            objective=self.objective.token,
            orientation=self.orientation,
            fitted_on=fitted_on,
            achieved_score=self.achieved_score,
            grid_evaluations=self.grid_evaluations,
        )
        return d


def top_k_indices(eta: np.ndarray, k: int) -> tuple:
    """Indices of the k largest entries; equal values prefer the smaller index."""
    order = np.argsort(-np.asarray(eta, dtype=np.float64), kind="stable")
    return tuple(sorted(int(i) for i in order[:k]))


def sse_size(eta, rounding: str = "half-even") -> int:
    total = float(np.sum(eta))
    if rounding == "half-even":
        k = round(total)
    elif rounding == "floor":
        k = math.floor(total)
    elif rounding == "ceil":
        k = math.ceil(total)
    else:
        raise InputError(f"rounding must be one of {ROUNDING}")
    return min(max(int(k), 0), len(eta))


def apply_method(method: BinarizationMethod, eta) -> tuple:
    """Predicted index set (sorted tuple) for a single probability vector."""
    eta = check_probability_vector(eta)
    if not method.is_fitted:
        raise InputError(f"method {method.kind!r} has no fitted parameters; run calibrate first")
    kind, p = method.kind, method.params
    if kind in ("threshold", "conformal"):
        chosen = np.flatnonzero(eta >= p["t"])
    elif kind == "species-threshold":
        t_s = np.asarray(p["t_s"], dtype=np.float64)
        if t_s.shape != eta.shape:
            raise InputError(f"{len(t_s)} thresholds for {len(eta)} species")
        chosen = np.flatnonzero(eta >= t_s)
    elif kind == "topk":
        k = int(p["k"])
        if k > len(eta):
            raise InputError(f"k = {k} exceeds the number of species ({len(eta)})")
        return top_k_indices(eta, k)
    else:
        return top_k_indices(eta, sse_size(eta, p.get("rounding", "half-even")))
    return tuple(int(i) for i in chosen)


def apply_method_matrix(method: BinarizationMethod, probs, orientation: str = "sample") -> np.ndarray:
    """Boolean prediction matrix; top-k style methods act along the orientation's units."""
    probs = check_probability_matrix(probs)
    check_orientation(orientation)
    if not method.is_fitted:
        raise InputError(f"method {method.kind!r} has no fitted parameters; run calibrate first")
    if method.kind in ("threshold", "conformal"):
        return probs >= method.params["t"]
    if method.kind == "species-threshold":
        t_s = np.asarray(method.params["t_s"], dtype=np.float64)
        if t_s.shape != (probs.shape[1],):
            raise InputError(f"{len(t_s)} thresholds for {probs.shape[1]} species")
        return probs >= t_s[None, :]
    units = probs if orientation == "sample" else probs.T
    out = np.zeros(units.shape, dtype=bool)
    for row, eta in enumerate(units):
        out[row, list(apply_method(method, eta))] = True
    return out if orientation == "sample" else out.T


def _units(a, orientation):
    return a if orientation == "sample" else a.T


def _objective(method, probs, truth, spec, orientation) -> float:
    pred = apply_method_matrix(method, probs, orientation)
    return float(np.mean(unit_scores(pred, truth, spec, orientation)))


def _pick(candidates, approx, make, probs, truth, spec, orientation):
    """Re-score near-best candidates exactly; return (method, score) with ties to the first."""
    approx = np.asarray(approx)
    near = np.flatnonzero(approx >= approx.max() - _REFINE_TOL)
    best = None
    for i in near:
        method = make(candidates[i])
        score = _objective(method, probs, truth, spec, orientation)
        if best is None or score > best[1]:
            best = (method, score)
    return best


def _threshold_sweep(probs, truth, spec, orientation):
    """Objective of every candidate global threshold, ascending grid.

    Cells are added in decreasing probability order; each addition changes
    only its own unit's counts, so the objective is a cumulative sum of
    per-cell score changes.
    """
    P = _units(probs, orientation)
    T = _units(truth, orientation)
    n_units, n_items = P.shape
    n_true = np.count_nonzero(T, axis=1)
    grid = np.unique(np.concatenate([[0.0, 1.0], P.ravel()]))

    flat_p = P.ravel()
    order = np.argsort(-flat_p, kind="stable")
    unit = (order // n_items).astype(np.int64)
    is_true = T.ravel()[order]
    # running counts of each cell's unit, up to and including the cell
    by_unit = np.argsort(unit, kind="stable")
    sizes = np.bincount(unit, minlength=n_units)
    starts = np.r_[0, np.cumsum(sizes)[:-1]]
    cs = np.cumsum(is_true[by_unit], dtype=np.int64)
    tp_after = np.empty(len(order), dtype=np.int64)
    tp_after[by_unit] = cs - np.repeat(np.r_[0, cs][starts], sizes)
    k_after = np.empty(len(order), dtype=np.int64)
    k_after[by_unit] = np.arange(len(order)) - np.repeat(starts, sizes) + 1
    tp_before = tp_after - is_true
    k_before = k_after - 1

    nt = n_true[unit]

    def score(tp, k):
        fn = nt - tp
        return spec.evaluate(tp, k - tp, fn, n_items - k - fn)

    delta = (score(tp_after, k_after) - score(tp_before, k_before)) / n_units
    base = float(np.mean(spec.evaluate(0, 0, n_true, n_items - n_true)))
    cum = np.r_[base, base + np.cumsum(delta)]
    # number of cells with p >= t, for each grid value t
    n_included = len(flat_p) - np.searchsorted(np.sort(flat_p), grid, side="left")
    return grid, cum[n_included]


def _topk_sweep(probs, truth, spec, orientation):
    P = _units(probs, orientation)
    T = _units(truth, orientation)
    n_units, n_items = P.shape
    order = np.argsort(-P, axis=1, kind="stable")
    hits = np.take_along_axis(T, order, axis=1)
    tp = np.concatenate([np.zeros((n_units, 1), dtype=np.int64), np.cumsum(hits, axis=1)], axis=1)
    k = np.arange(n_items + 1)[None, :]
    fn = np.count_nonzero(T, axis=1)[:, None] - tp
    values = spec.evaluate(tp, k - tp, fn, n_items - k - fn)
    return np.arange(n_items + 1), values.mean(axis=0)


def _species_thresholds(probs, truth, spec):
    """Independent best threshold per species column, scored over that column's sites."""
    n_sites, n_species = probs.shape
    t_s = np.empty(n_species)
    evaluations = 0
    for j in range(n_species):
        col, obs = probs[:, j], truth[:, j]
        grid = np.unique(np.r_[0.0, 1.0, col])
        order = np.argsort(-col, kind="stable")
        cum_true = np.r_[0, np.cumsum(obs[order])]
        n_inc = n_sites - np.searchsorted(np.sort(col), grid, side="left")
        tp = cum_true[n_inc]
        n_true = cum_true[-1]
        values = spec.evaluate(tp, n_inc - tp, n_true - tp, n_sites - n_inc - (n_true - tp))
        t_s[j] = grid[int(np.argmax(values))]
        evaluations += len(grid)
    return t_s, evaluations


def _conformal_threshold(probs, truth, alpha):
    scores = np.sort(probs[truth])[::-1]
    n = len(scores)
    if n == 0:
        raise InputError("conformal calibration needs at least one true presence")
    rank = math.ceil((n + 1) * (1.0 - alpha))
    return 0.0 if rank > n else float(scores[rank - 1])


def calibrate(kind: str, probs, truth, objective="f1", orientation: str = "sample", alpha: float = 0.1) -> CalibrationReport:
    """Fit the parameters of a supervised method on a labelled split.

    threshold: exhaustive search over {0, 1} and every distinct probability;
    topk: k in 0..N; species-threshold: one search per species column against
    that column's score; conformal: quantile rule with fixed ``alpha``.  Exact
    ties go to the smallest parameter.
    """
    spec = parse_score(objective)
    check_orientation(orientation)
    probs = check_probability_matrix(probs)
    truth = check_occurrence_matrix(truth, probs.shape)
    if kind == "threshold":
        grid, approx = _threshold_sweep(probs, truth, spec, orientation)
        method, score = _pick(grid, approx, lambda t: BinarizationMethod("threshold", {"t": float(t)}), probs, truth, spec, orientation)
        evaluations = len(grid)
    elif kind == "topk":
        ks, approx = _topk_sweep(probs, truth, spec, orientation)
        method, score = _pick(ks, approx, lambda k: BinarizationMethod("topk", {"k": int(k)}), probs, truth, spec, orientation)
        evaluations = len(ks)
    elif kind == "species-threshold":
        t_s, evaluations = _species_thresholds(probs, truth, spec)
        method = BinarizationMethod("species-threshold", {"t_s": t_s.tolist()})
        score = _objective(method, probs, truth, spec, orientation)
    elif kind == "conformal":
        t = _conformal_threshold(probs, truth, alpha)
        method = BinarizationMethod("conformal", {"alpha": alpha, "t": t})
        score = _objective(method, probs, truth, spec, orientation)
        evaluations = 1
    elif kind == "sse":
        raise InputError("sse has no parameters to calibrate")
    else:
        raise InputError(f"unknown method {kind!r}; expected one of {METHOD_KINDS}")
    return CalibrationReport(method, spec, score, int(evaluations), orientation)
