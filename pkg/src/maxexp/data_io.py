"""On-disk formats.

Matrices are wide CSV files with a ``site_id,<species_id>,...`` header and one
row per site.  Predictions are long CSV files (``site_id,species_id``, one row
per predicted presence) with a JSON sidecar at ``<path>.json`` that lists all
sites, the species universe and run metadata.  Every CSV is UTF-8 without BOM,
comma separated, with ``\\n`` line endings.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .baselines import BinarizationMethod
from .exceptions import InputError, MaxExpError, ParseError, ReferentialError

__all__ = [
    "ProbabilityMatrix",
    "OccurrenceMatrix",
    "PredictionFile",
    "read_matrix",
    "write_matrix",
    "align",
    "read_predictions",
    "write_predictions",
    "sidecar_path",
    "write_csv",
    "write_json",
    "save_method",
    "load_method",
]

_NUMBER = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")


@dataclass
class ProbabilityMatrix:
    site_ids: list
    species_ids: list
    values: np.ndarray

    kind = "probability"

    def __post_init__(self):
        self.site_ids = [str(s) for s in self.site_ids]
        self.species_ids = [str(s) for s in self.species_ids]
        raw = np.asarray(self.values, dtype=np.float64)
        self._check_values(raw)
        self.values = raw.astype(self._dtype)
        if self.values.shape != (len(self.site_ids), len(self.species_ids)):
            raise InputError(f"values have shape {self.values.shape} for {len(self.site_ids)} sites x {len(self.species_ids)} species")
        _check_unique(self.site_ids, "site")
        _check_unique(self.species_ids, "species")

    _dtype = np.float64

    @staticmethod
    def _check_values(raw):
        if not ((raw >= 0) & (raw <= 1)).all():
            raise InputError("probabilities must lie in [0, 1]")

    @property
    def shape(self):
        return self.values.shape

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self.site_ids == other.site_ids
            and self.species_ids == other.species_ids
            and np.array_equal(self.values, other.values)
        )


class OccurrenceMatrix(ProbabilityMatrix):
    kind = "occurrence"
    _dtype = bool

    @staticmethod
    def _check_values(raw):
        if not np.isin(raw, (0.0, 1.0)).all():
            raise InputError("occurrence values must be 0 or 1")


def _check_unique(ids, what):
    seen = set()
    for i in ids:
        if i in seen:
            raise InputError(f"duplicate {what} id {i!r}")
        seen.add(i)


def _open_text(path, mode):
    try:
        return open(path, mode, encoding="utf-8", newline="")
    except OSError as exc:
        raise MaxExpError(f"{path}: {exc.strerror}") from exc


def read_matrix(path, kind: str = "probability"):
    """Read a wide site x species CSV, validating every cell for ``kind``."""
    if kind not in ("probability", "occurrence"):
        raise InputError(f"kind must be 'probability' or 'occurrence', got {kind!r}")
    with _open_text(path, "r") as fh:
        text = fh.read()
    if text.startswith("\ufeff"):
        raise ParseError(f"{path}: byte-order mark not allowed")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = rows[0]
    if not header or header[0] != "site_id":
        raise ParseError(f"{path}: header must start with 'site_id'")
    species = header[1:]
    if not species:
        raise ParseError(f"{path}: header declares no species")
    for col, sp in enumerate(species, start=1):
        if not sp:
            raise ParseError(f"{path}: empty species id in header column {col}")
    if len(set(species)) != len(species):
        dup = next(s for s in species if species.count(s) > 1)
        raise ParseError(f"{path}: duplicate species id {dup!r} in header")
    sites, values, seen = [], [], set()
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {r} has {len(row)} fields, expected {len(header)}")
        site = row[0]
        if not site:
            raise ParseError(f"{path}: empty site id at row {r}")
        if site in seen:
            raise ParseError(f"{path}: duplicate site id {site!r} at row {r}")
        seen.add(site)
        sites.append(site)
        values.append([_parse_cell(cell, kind, r, species[c], path) for c, cell in enumerate(row[1:])])
    if not sites:
        raise ParseError(f"{path}: no data rows")
    cls = ProbabilityMatrix if kind == "probability" else OccurrenceMatrix
    return cls(sites, species, np.array(values))


def _parse_cell(cell, kind, row, column, path):
    text = cell.strip()
    if not _NUMBER.fullmatch(text):
        raise ParseError(f"{path}: non-numeric value {cell!r} at row {row}, column {column}")
    value = float(text)
    if kind == "occurrence":
        if value not in (0.0, 1.0):
            raise ParseError(f"{path}: non-binary value at row {row}, column {column}")
    elif not 0.0 <= value <= 1.0:
        raise ParseError(f"{path}: probability {text} out of range [0, 1] at row {row}, column {column}")
    return value


def write_matrix(matrix: ProbabilityMatrix, path):
    occurrence = isinstance(matrix, OccurrenceMatrix)
    rows = []
    for site, vals in zip(matrix.site_ids, matrix.values):
        cells = [str(int(v)) for v in vals] if occurrence else [repr(float(v)) for v in vals]
        rows.append([site, *cells])
    write_csv(path, ["site_id", *matrix.species_ids], rows)


def align(probs: ProbabilityMatrix, truth: OccurrenceMatrix) -> OccurrenceMatrix:
    """Reorder ``truth`` to the site and species order of ``probs`` (matching by id)."""
    if set(probs.site_ids) != set(truth.site_ids):
        raise InputError("probability and occurrence files cover different sites")
    if set(probs.species_ids) != set(truth.species_ids):
        raise InputError("probability and occurrence files cover different species")
    r = {s: i for i, s in enumerate(truth.site_ids)}
    c = {s: i for i, s in enumerate(truth.species_ids)}
    rows = [r[s] for s in probs.site_ids]
    cols = [c[s] for s in probs.species_ids]
    return OccurrenceMatrix(probs.site_ids, probs.species_ids, truth.values[np.ix_(rows, cols)])


@dataclass
class PredictionFile:
    """Predicted species per site.  ``sets[i]`` lists species ids for ``site_ids[i]``,
    kept in the universe (column) order."""

    site_ids: list
    species_ids: list
    sets: list
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.site_ids = [str(s) for s in self.site_ids]
        self.species_ids = [str(s) for s in self.species_ids]
        _check_unique(self.site_ids, "site")
        _check_unique(self.species_ids, "species")
        if len(self.sets) != len(self.site_ids):
            raise InputError(f"{len(self.sets)} prediction sets for {len(self.site_ids)} sites")
        pos = {s: i for i, s in enumerate(self.species_ids)}
        canonical = []
        for site, chosen in zip(self.site_ids, self.sets):
            chosen = [str(s) for s in chosen]
            for s in chosen:
                if s not in pos:
                    raise ReferentialError(f"site {site!r} predicts unknown species {s!r}")
            canonical.append(sorted(set(chosen), key=pos.__getitem__))
        self.sets = canonical

    @classmethod
    def from_indicator(cls, indicator, site_ids, species_ids, metadata=None):
        species_ids = list(species_ids)
        sets = [[species_ids[j] for j in np.flatnonzero(row)] for row in np.asarray(indicator, dtype=bool)]
        return cls(list(site_ids), species_ids, sets, dict(metadata or {}))

    def to_indicator(self) -> np.ndarray:
        pos = {s: i for i, s in enumerate(self.species_ids)}
        out = np.zeros((len(self.site_ids), len(self.species_ids)), dtype=bool)
        for row, chosen in enumerate(self.sets):
            out[row, [pos[s] for s in chosen]] = True
        return out


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_predictions(preds: PredictionFile, path, method: str | None = None, score: str | None = None):
    """Write the long CSV plus its JSON sidecar."""
    from . import __version__

    meta = dict(preds.metadata)
    if method is not None:
        meta["method"] = method
    if score is not None:
        meta["score"] = score
    meta.setdefault("timestamp", datetime.now(timezone.utc).isoformat(timespec="seconds"))
    meta.setdefault("tool_version", __version__)
    rows = [[site, sp] for site, chosen in zip(preds.site_ids, preds.sets) for sp in chosen]
    write_csv(path, ["site_id", "species_id"], rows)
    write_json(sidecar_path(path), {"sites": preds.site_ids, "species": preds.species_ids, "metadata": meta})
    preds.metadata = meta


def read_predictions(path) -> PredictionFile:
    side = sidecar_path(path)
    try:
        with _open_text(side, "r") as fh:
            meta = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{side}: invalid JSON ({exc.msg})") from exc
    try:
        sites, species, metadata = meta["sites"], meta["species"], meta.get("metadata", {})
    except (KeyError, TypeError):
        raise ParseError(f"{side}: sidecar must contain 'sites' and 'species'") from None
    with _open_text(path, "r") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["site_id", "species_id"]:
        raise ParseError(f"{path}: header must be 'site_id,species_id'")
    index = {s: i for i, s in enumerate(sites)}
    universe = set(species)
    sets = [[] for _ in sites]
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != 2:
            raise ParseError(f"{path}: row {r} has {len(row)} fields, expected 2")
        site, sp = row
        if site not in index:
            raise ReferentialError(f"{path}: unknown site id {site!r} at row {r}")
        if sp not in universe:
            raise ReferentialError(f"{path}: unknown species id {sp!r} at row {r}")
        sets[index[site]].append(sp)
    return PredictionFile(sites, species, sets, metadata)


def write_csv(path, header, rows):
    with _open_text(path, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_json(path, obj):
    with _open_text(path, "w") as fh:
        json.dump(obj, fh, indent=2, allow_nan=True)
        fh.write("\n")


def save_method(report, path, fitted_on=None):
    """Serialize a :class:`~maxexp.baselines.CalibrationReport`."""
    write_json(path, report.to_dict(fitted_on=None if fitted_on is None else str(fitted_on)))


def load_method(path) -> BinarizationMethod:
    try:
        with _open_text(path, "r") as fh:
            doc = json.load(fh)
        return BinarizationMethod(doc["kind"], dict(doc.get("params", {})))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"{path}: not a fitted-method document ({exc})") from exc
