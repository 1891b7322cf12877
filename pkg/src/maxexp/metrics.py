"""Confusion counts and set-similarity scores.

Every score is a function of the four confusion counts only, and is
non-decreasing in TP/TN and non-increasing in FP/FN.  All functions accept
numpy arrays and broadcast, so the optimizer and the brute-force oracle
evaluate exactly the same expressions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .exceptions import InputError

__all__ = [
    "ConfusionCounts",
    "EmptyMatch",
    "ScoreSpec",
    "confusion_counts",
    "score_value",
    "parse_score",
]


class ConfusionCounts(NamedTuple):
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


class EmptyMatch(enum.Enum):
    """Value of F-beta / Jaccard when ``tp + fp + fn == 0``."""

    ONE = 1.0
    ZERO = 0.0


@dataclass(frozen=True)
class ScoreSpec:
    """A set-similarity score U'(tp, fp, fn, tn).

    Parameters
    ----------
    kind : {"fbeta", "jaccard", "tss"}
    beta : float
        Recall weight, only used by ``"fbeta"``.
    empty_match : EmptyMatch
        Score of an empty prediction against an empty assemblage (F-beta and
        Jaccard).
    tss_empty_class_value : float
        Value taken by the sensitivity (or specificity) term of TSS when its
        denominator is zero.  The default of 0 makes an all-absent site
        predicted as all-absent score 0.
    """

    kind: str = "fbeta"
    beta: float = 1.0
    empty_match: EmptyMatch = EmptyMatch.ONE
    tss_empty_class_value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("fbeta", "jaccard", "tss"):
            raise InputError(f"unknown score kind {self.kind!r}")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise InputError(f"beta must be positive, got {self.beta!r}")
        if not -1.0 <= self.tss_empty_class_value <= 1.0:
            raise InputError("tss_empty_class_value must lie in [-1, 1]")
        if not isinstance(self.empty_match, EmptyMatch):
            object.__setattr__(self, "empty_match", EmptyMatch(float(self.empty_match)))

    @classmethod
    def f1(cls, **kw) -> "ScoreSpec":
        return cls("fbeta", 1.0, **kw)

    @classmethod
    def f2(cls, **kw) -> "ScoreSpec":
        return cls("fbeta", 2.0, **kw)

    @classmethod
    def jaccard(cls, **kw) -> "ScoreSpec":
        return cls("jaccard", **kw)

    @classmethod
    def tss(cls, **kw) -> "ScoreSpec":
        return cls("tss", **kw)

    @property
    def token(self) -> str:
        if self.kind == "fbeta":
            if self.beta == 1.0:
                return "f1"
            if self.beta == 2.0:
                return "f2"
            return f"fbeta:{self.beta!r}"
        return self.kind

    def __str__(self):
        return self.token

    def evaluate(self, tp, fp, fn, tn):
        """Vectorised U'(tp, fp, fn, tn); returns float64 (array or scalar)."""
        tp, fp, fn, tn = (np.asarray(a, dtype=np.float64) for a in (tp, fp, fn, tn))
        if self.kind == "fbeta":
            b2 = self.beta * self.beta
            num = (1.0 + b2) * tp
            den = num + b2 * fn + fp
            out = _safe_ratio(num, den, self.empty_match.value)
        elif self.kind == "jaccard":
            den = tp + fn + fp
            out = _safe_ratio(tp, den, self.empty_match.value)
        else:
            v = self.tss_empty_class_value
            sens = _safe_ratio(tp, tp + fn, v)
            spec = _safe_ratio(tn, tn + fp, v)
            out = sens + spec - 1.0
        return out[()] if out.ndim == 0 else out


def _safe_ratio(num, den, fill):
    num, den = np.broadcast_arrays(num, den)
    out = np.full(num.shape, fill, dtype=np.float64)
    np.divide(num, den, out=out, where=den != 0)
    return out


def confusion_counts(predicted: Iterable[int], truth: Iterable[int], universe_size: int) -> ConfusionCounts:
    pred = set(int(i) for i in predicted)
    true = set(int(i) for i in truth)
    for i in pred | true:
        if not 0 <= i < universe_size:
            raise InputError(f"index {i} out of range for universe of size {universe_size}")
    tp = len(pred & true)
    return ConfusionCounts(tp, len(pred) - tp, len(true) - tp, universe_size - len(pred | true))


def score_value(spec: ScoreSpec, c: ConfusionCounts) -> float:
    if min(c) < 0:
        raise InputError(f"negative confusion count in {c}")
    return float(spec.evaluate(c.tp, c.fp, c.fn, c.tn))


def parse_score(token: str | ScoreSpec) -> ScoreSpec:
    """Parse ``"f1"``, ``"f2"``, ``"fbeta:<beta>"``, ``"jaccard"`` or ``"tss"``."""
    if isinstance(token, ScoreSpec):
        return token
    t = token.strip().lower()
    if t == "f1":
        return ScoreSpec.f1()
    if t == "f2":
        return ScoreSpec.f2()
    if t.startswith("fbeta:"):
        try:
            beta = float(t.split(":", 1)[1])
        except ValueError:
            raise InputError(f"bad beta in score token {token!r}") from None
        return ScoreSpec("fbeta", beta)
    if t in ("jaccard", "tss"):
        return ScoreSpec(t)
    raise InputError(f"unknown score token {token!r}; expected f1, f2, fbeta:<beta>, jaccard or tss")
