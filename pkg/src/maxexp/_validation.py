import numpy as np

from .exceptions import InputError


def check_probability_vector(eta, name="eta"):
    """Return ``eta`` as a float64 1-D array, raising if any entry is outside [0, 1]."""
    arr = np.asarray(eta, dtype=np.float64)
    if arr.ndim != 1:
        raise InputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size and not (np.all(np.isfinite(arr)) and arr.min() >= 0.0 and arr.max() <= 1.0):
        bad = int(np.flatnonzero(~((arr >= 0.0) & (arr <= 1.0)))[0])
        raise InputError(f"{name}[{bad}] = {arr[bad]!r} is not a probability in [0, 1]")
    return arr


def check_probability_matrix(probs, name="probs"):
    arr = np.asarray(probs, dtype=np.float64)
    if arr.ndim != 2:
        raise InputError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise InputError(f"{name} is empty")
    ok = (arr >= 0.0) & (arr <= 1.0)
    if not ok.all():
        r, c = np.argwhere(~ok)[0]
        raise InputError(f"{name}[{r}, {c}] = {arr[r, c]!r} is not a probability in [0, 1]")
    return arr


def check_occurrence_matrix(truth, shape=None, name="truth"):
    arr = np.asarray(truth)
    if arr.ndim != 2:
        raise InputError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise InputError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    if arr.dtype != bool:
        if not np.isin(arr, (0, 1)).all():
            raise InputError(f"{name} must be binary (0/1)")
        arr = arr.astype(bool)
    return arr


def check_orientation(orientation):
    if orientation not in ("sample", "macro"):
        raise InputError(f"orientation must be 'sample' or 'macro', got {orientation!r}")
    return orientation


def as_indicator(preds, shape):
    """Convert predictions to a boolean ``(n_sites, n_species)`` indicator matrix.

    ``preds`` is either an indicator matrix already or a sequence with one
    iterable of species indices per site.
    """
    n_sites, n_species = shape
    if isinstance(preds, np.ndarray) and preds.ndim == 2:
        if preds.shape != tuple(shape):
            raise InputError(f"predictions have shape {preds.shape}, expected {tuple(shape)}")
        return preds.astype(bool)
    preds = list(preds)
    if len(preds) != n_sites:
        raise InputError(f"got {len(preds)} prediction sets for {n_sites} sites")
    out = np.zeros(shape, dtype=bool)
    for row, chosen in enumerate(preds):
        idx = np.fromiter(chosen, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n_species):
            raise InputError(f"site {row}: species index out of range 0..{n_species - 1}")
        out[row, idx] = True
    return out
