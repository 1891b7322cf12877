"""Expected-score maximising binarization of species presence probabilities."""

__version__ = "0.1.0"

from .baselines import BinarizationMethod, CalibrationReport, apply_method, calibrate
from .estimators import (
    ConformalBinarizer,
    GlobalThresholdBinarizer,
    MaxExpBinarizer,
    SpeciesThresholdBinarizer,
    SSEBinarizer,
    TopKBinarizer,
)
from .evaluation import calibration_curve, permutation_test, prevalence_table, score_predictions
from .exceptions import InputError, LimitError, MaxExpError, ParseError, ReferentialError
from .metrics import ConfusionCounts, EmptyMatch, ScoreSpec, confusion_counts, parse_score, score_value
from .optimizer import MaxExpConfig, MaxExpResult, expected_score_at_k, maxexp_matrix, maxexp_select

__all__ = [
    "BinarizationMethod",
    "CalibrationReport",
    "ConfusionCounts",
    "ConformalBinarizer",
    "EmptyMatch",
    "GlobalThresholdBinarizer",
    "InputError",
    "LimitError",
    "MaxExpBinarizer",
    "MaxExpConfig",
    "MaxExpError",
    "MaxExpResult",
    "ParseError",
    "ReferentialError",
    "SSEBinarizer",
    "ScoreSpec",
    "SpeciesThresholdBinarizer",
    "TopKBinarizer",
    "apply_method",
    "calibrate",
    "calibration_curve",
    "confusion_counts",
    "expected_score_at_k",
    "maxexp_matrix",
    "maxexp_select",
    "parse_score",
    "permutation_test",
    "prevalence_table",
    "score_predictions",
    "score_value",
]
