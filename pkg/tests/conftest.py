from pathlib import Path

import numpy as np
import pytest

from maxexp.exceptions import ParseError, ReferentialError
from maxexp.metrics import ScoreSpec

ALL_SCORES = [ScoreSpec.f1(), ScoreSpec.f2(), ScoreSpec.jaccard(), ScoreSpec.tss()]

MALFORMED_DIR = Path(__file__).parent / "data" / "malformed"

# file name -> (reader, expected error type, message fragment)
MALFORMED_CASES = {
    "bad_header.csv": ("probability", ParseError, "site_id"),
    "non_numeric.csv": ("probability", ParseError, "row 1, column b"),
    "out_of_range.csv": ("probability", ParseError, "row 1, column b"),
    "negative.csv": ("probability", ParseError, "row 1, column b"),
    "nan_cell.csv": ("probability", ParseError, "row 1, column b"),
    "duplicate_site.csv": ("probability", ParseError, "'s1'"),
    "duplicate_species.csv": ("probability", ParseError, "'a'"),
    "short_row.csv": ("probability", ParseError, "row 1"),
    "empty.csv": ("probability", ParseError, "empty"),
    "header_only.csv": ("probability", ParseError, "no data rows"),
    "bom.csv": ("probability", ParseError, "byte-order mark"),
    "no_species.csv": ("probability", ParseError, "no species"),
    "empty_site_id.csv": ("probability", ParseError, "row 1"),
    "occurrence_non_binary.csv": ("occurrence", ParseError, "row 1, column b"),
    "pred_unknown_site.csv": ("predictions", ReferentialError, "'s9'"),
    "pred_unknown_species.csv": ("predictions", ReferentialError, "'zz'"),
    "pred_bad_sidecar.csv": ("predictions", ParseError, "invalid JSON"),
}

_acceptance_lines = []


def record_acceptance(number, title, passed, detail=""):
    status = "PASS" if passed else "FAIL"
    _acceptance_lines.append(f"[{status}] criterion {number:>2}: {title}" + (f" ({detail})" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance():
    return record_acceptance


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=ALL_SCORES, ids=lambda s: s.token)
def score(request):
    return request.param
