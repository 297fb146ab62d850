"""Per-subject longitudinal grids with explicit missingness masks.

Dataset CSV format: header ``subject,time,<outcome_1>,...,<outcome_L>``
with one row per (subject, visit).  ``time`` is a 1-based integer visit
index per subject; an empty field or the literal ``NA`` marks a missing
cell.  Rows for a subject need not be contiguous.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataValidationError

MISSING_TOKENS = ("", "NA")


@dataclass(frozen=True)
class Subject:
    """One subject's (J_i, L) value grid plus observedness mask."""

    subject_id: str
    values: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        observed = np.asarray(self.observed, dtype=bool)
        if values.shape != observed.shape or values.ndim != 2:
            raise DataValidationError("values and observed mask must be equal 2-d shapes")
        if values.shape[0] < 1:
            raise DataValidationError("subject needs at least one measurement time")
        if not observed.any():
            raise DataValidationError(f"subject {self.subject_id!r} has no observed cells")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "observed", observed)

    @property
    def n_times(self):
        return self.values.shape[0]

    def observed_flat_indices(self):
        """Flat indices (time-major, 0-based) of the observed cells."""
        return np.flatnonzero(self.observed.ravel())


@dataclass(frozen=True)
class Dataset:
    """Immutable collection of subjects sharing an outcome layout."""

    subjects: tuple
    outcome_names: tuple

    def __post_init__(self):
        if not self.subjects:
            raise DataValidationError("dataset has no subjects")
        n_out = len(self.outcome_names)
        for s in self.subjects:
            if s.values.shape[1] != n_out:
                raise DataValidationError(
                    f"subject {s.subject_id!r} has {s.values.shape[1]} outcomes, expected {n_out}"
                )

    @property
    def n_outcomes(self):
        return len(self.outcome_names)

    @property
    def n_times(self):
        return max(s.n_times for s in self.subjects)

    @property
    def n_subjects(self):
        return len(self.subjects)

    def observed_values_by_outcome(self):
        """List of 1-d arrays of the observed values for each outcome."""
        cols = []
        for l in range(self.n_outcomes):
            vals = [s.values[s.observed[:, l], l] for s in self.subjects]
            cols.append(np.concatenate(vals) if vals else np.empty(0))
        return cols


def parse_dataset(path):
    """Read a dataset CSV; see the module docstring for the format."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataValidationError(f"{path}: empty file") from None
        if len(header) < 3 or header[0] != "subject" or header[1] != "time":
            raise DataValidationError(
                f"{path}: header must be subject,time,<outcome_1>,..."
            )
        outcome_names = tuple(header[2:])
        n_out = len(outcome_names)

        rows = {}  # subject -> {time: (values, observed)}
        order = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 + n_out:
                raise DataValidationError(
                    f"{path}:{lineno}: expected {2 + n_out} fields, got {len(row)}"
                )
            sid = row[0]
            try:
                t = int(row[1])
            except ValueError:
                raise DataValidationError(
                    f"{path}:{lineno}: time must be an integer, got {row[1]!r}"
                ) from None
            if t < 1:
                raise DataValidationError(f"{path}:{lineno}: time index must be >= 1")
            vals = np.zeros(n_out)
            obs = np.zeros(n_out, dtype=bool)
            for c, cell in enumerate(row[2:]):
                cell = cell.strip()
                if cell in MISSING_TOKENS:
                    continue
                try:
                    vals[c] = float(cell)
                except ValueError:
                    raise DataValidationError(
                        f"{path}:{lineno}: column {outcome_names[c]!r}: "
                        f"non-numeric value {cell!r}"
                    ) from None
                obs[c] = True
            if sid not in rows:
                rows[sid] = {}
                order.append(sid)
            if t in rows[sid]:
                raise DataValidationError(
                    f"{path}:{lineno}: duplicate (subject, time) = ({sid!r}, {t})"
                )
            rows[sid][t] = (vals, obs)

    if not rows:
        raise DataValidationError(f"{path}: no data rows")

    subjects = []
    for sid in order:
        times = rows[sid]
        j_max = max(times)
        values = np.zeros((j_max, n_out))
        observed = np.zeros((j_max, n_out), dtype=bool)
        for t, (vals, obs) in times.items():
            values[t - 1] = vals
            observed[t - 1] = obs
        subjects.append(Subject(sid, values, observed))
    return Dataset(tuple(subjects), outcome_names)


def write_dataset(dataset, path, float_fmt="%.12g"):
    """Write a dataset CSV that :func:`parse_dataset` round-trips exactly."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject", "time", *dataset.outcome_names])
        for s in dataset.subjects:
            for t in range(s.n_times):
                cells = [
                    float_fmt % s.values[t, c] if s.observed[t, c] else "NA"
                    for c in range(dataset.n_outcomes)
                ]
                writer.writerow([s.subject_id, t + 1, *cells])
