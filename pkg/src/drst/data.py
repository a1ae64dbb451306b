"""Dataset containers and validation.

An :class:`UnlabeledSet` holds m covariate rows; a :class:`LabeledSet`
additionally carries an n-vector of scalar responses.  Both are immutable
after construction and all arithmetic downstream is float64.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "UnlabeledSet",
    "LabeledSet",
    "validate_datasets",
    "load_unlabeled_csv",
    "load_labeled_csv",
    "save_unlabeled_csv",
    "save_labeled_csv",
]


def _as_matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2:
        raise ValueError(f"covariates must be a 2-d array, got ndim={x.ndim}")
    if x.shape[0] > 0 and x.shape[1] < 1:
        raise ValueError("covariate dimension must be >= 1")
    if not np.all(np.isfinite(x)):
        raise ValueError("covariates contain non-finite entries")
    return x


@dataclass(frozen=True)
class UnlabeledSet:
    """Covariate-only samples; ``x`` has shape (m, d)."""

    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _as_matrix(self.x))
        self.x.setflags(write=False)

    @property
    def m(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class LabeledSet:
    """Covariate/response pairs; ``x`` has shape (n, d), ``y`` shape (n,)."""

    x: np.ndarray
    y: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "x", _as_matrix(self.x))
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if y.shape[0] != self.x.shape[0]:
            raise ValueError(
                f"covariates ({self.x.shape[0]}) and responses ({y.shape[0]}) "
                "must have equal length"
            )
        if y.shape[0] == 0:
            raise ValueError("empty labeled set")
        if not np.all(np.isfinite(y)):
            raise ValueError("responses contain non-finite entries")
        object.__setattr__(self, "y", y)
        self.x.setflags(write=False)
        self.y.setflags(write=False)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


def validate_datasets(unlabeled: UnlabeledSet, labeled: LabeledSet):
    """Check that the two sets are jointly usable and return them unchanged.

    Raises ValueError on dimension mismatch or an empty labeled set (the
    doubly robust loss divides by n).
    """
    if labeled.n < 1:
        raise ValueError("empty labeled set")
    if unlabeled.m > 0 and unlabeled.d != labeled.d:
        raise ValueError(
            f"dimension mismatch: unlabeled d={unlabeled.d}, labeled d={labeled.d}"
        )
    return unlabeled, labeled


def _read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: missing header row")
        rows = [row for row in reader if row]
    return header, rows


def load_unlabeled_csv(path) -> UnlabeledSet:
    """Load covariates from a CSV with header columns x_1..x_d."""
    header, rows = _read_rows(path)
    if any(c == "y" for c in header):
        raise ValueError(f"{path}: unlabeled file must not carry a 'y' column")
    x = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    if x.size == 0:
        x = x.reshape(0, len(header))
    return UnlabeledSet(x)


def load_labeled_csv(path) -> LabeledSet:
    """Load covariate/response pairs; the final column must be named 'y'."""
    header, rows = _read_rows(path)
    if not header or header[-1] != "y":
        raise ValueError(f"{path}: labeled file must end with a column named 'y'")
    data = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    return LabeledSet(data[:, :-1], data[:, -1])


def save_unlabeled_csv(dataset: UnlabeledSet, path) -> None:
    header = [f"x_{j + 1}" for j in range(dataset.d)]
    _write_csv(path, header, dataset.x)


def save_labeled_csv(dataset: LabeledSet, path) -> None:
    header = [f"x_{j + 1}" for j in range(dataset.d)] + ["y"]
    body = np.column_stack([dataset.x, dataset.y])
    _write_csv(path, header, body)


def _write_csv(path, header, body):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in body:
            writer.writerow([format(v, ".17g") for v in row])
