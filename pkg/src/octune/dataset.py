"""Dataset ingestion, one-class problem derivation, IQR scaling and folds."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "IngestionError",
    "Dataset",
    "OneClassProblem",
    "ScalingProfile",
    "load_csv",
    "derive_problems",
    "fit_iqr_scaling",
    "stratified_kfold",
]

_MISSING = {"", "na", "nan", "null", "none", "?"}


class IngestionError(ValueError):
    """Raised when a CSV file cannot be turned into a Dataset."""


@dataclass(frozen=True)
class Dataset:
    name: str
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1:
            raise IngestionError(f"{self.name}: need a non-empty 2-D feature matrix")
        if not np.all(np.isfinite(x)):
            raise IngestionError(f"{self.name}: features must be finite")
        y = np.asarray(self.labels).astype(str)
        if y.shape != (x.shape[0],):
            raise IngestionError(f"{self.name}: labels do not match rows")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def classes(self) -> list[str]:
        return sorted(set(self.labels.tolist()))


@dataclass(frozen=True)
class OneClassProblem:
    """A target class of a dataset against all other classes pooled.

    ``features``/``is_target`` hold every instance of the dataset. Outer folds
    split these rows into training (target + other, used for validation) and
    test portions; ``target_train`` selects the target rows of a training
    split.
    """

    dataset: str
    target: str
    features: np.ndarray
    is_target: np.ndarray

    @property
    def problem_id(self) -> str:
        return f"{self.dataset}:{self.target}"

    @property
    def n_target(self) -> int:
        return int(self.is_target.sum())

    @property
    def n_other(self) -> int:
        return int((~self.is_target).sum())

    @property
    def valid(self) -> bool:
        return self.n_target > 0 and self.n_other > 0


@dataclass(frozen=True)
class ScalingProfile:
    divisors: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = np.asarray(self.divisors, dtype=float)
        if np.any(~(d > 0)):
            raise ValueError("scaling divisors must be positive")
        object.__setattr__(self, "divisors", d)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) / self.divisors

    def compose(self, other: "ScalingProfile") -> "ScalingProfile":
        return ScalingProfile(self.divisors * other.divisors)

    def to_json(self) -> str:
        return json.dumps({"divisors": self.divisors.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "ScalingProfile":
        return cls(np.array(json.loads(text)["divisors"], dtype=float))


def _select_column(header, label_column):
    if isinstance(label_column, int):
        idx = label_column if label_column >= 0 else len(header) + label_column
        if not 0 <= idx < len(header):
            raise IngestionError(f"label column index {label_column} out of range")
        return idx
    if label_column not in header:
        raise IngestionError(f"label column {label_column!r} not in header {header}")
    return header.index(label_column)


def load_csv(path, label_column="class", missing="reject", name=None) -> Dataset:
    """Read a headed CSV with numeric features and one label column.

    ``missing`` is either ``"reject"`` (raise on an empty/NA cell) or
    ``"drop"`` (silently skip such rows).
    """
    if missing not in ("reject", "drop"):
        raise ValueError("missing must be 'reject' or 'drop'")
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise IngestionError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    lab = _select_column(header, label_column)
    features, labels = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise IngestionError(
                f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
        values = []
        skip = False
        for col, cell in enumerate(row):
            if col == lab:
                continue
            cell = cell.strip()
            if cell.lower() in _MISSING:
                if missing == "drop":
                    skip = True
                    break
                raise IngestionError(f"{path}: missing value at row {lineno}, column {header[col]!r}")
            try:
                value = float(cell)
            except ValueError:
                raise TypeError(
                    f"{path}: non-numeric value {cell!r} at row {lineno}, column {header[col]!r}"
                ) from None
            if not math.isfinite(value):
                raise IngestionError(f"{path}: non-finite value at row {lineno}, column {header[col]!r}")
            values.append(value)
        if skip:
            continue
        if row[lab].strip().lower() in _MISSING:
            if missing == "drop":
                continue
            raise IngestionError(f"{path}: missing label at row {lineno}")
        features.append(values)
        labels.append(row[lab].strip())
    if not features:
        raise IngestionError(f"{path}: no data rows")
    return Dataset(name or path.stem, np.array(features, dtype=float), np.array(labels))


def derive_problems(d: Dataset, min_class_size: int = 10) -> list[OneClassProblem]:
    """One problem per class with at least ``min_class_size`` instances.

    Classes are visited in sorted order. A dataset with a single class yields a
    problem without non-target instances; ``OneClassProblem.valid`` is False
    for it and callers are expected to skip it.
    """
    problems = []
    for cls in d.classes:
        mask = d.labels == cls
        if mask.sum() >= min_class_size:
            problems.append(OneClassProblem(d.name, cls, d.features, mask.copy()))
    return problems


def fit_iqr_scaling(target_train: np.ndarray) -> ScalingProfile:
    x = np.asarray(target_train, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("target_train must be a non-empty matrix")
    q25, q75 = np.percentile(x, [25, 75], axis=0, method="linear")
    div = q75 - q25
    span = x.max(axis=0) - x.min(axis=0)
    div = np.where(div > 0, div, span)
    div = np.where(div > 0, div, 1.0)
    return ScalingProfile(div)


def stratified_kfold(labels, k: int = 5, seed: int = 0, name: str = "problem"):
    """Stratified k-fold split of a boolean target mask.

    Each class is shuffled with its own seeded permutation and dealt round-robin
    over the folds, so per-fold counts differ by at most one. The target class
    must have at least ``k`` members; the other class may be smaller, in which
    case some folds simply hold none of it. Returns a list of
    ``(train_idx, test_idx)`` pairs of sorted index arrays.
    """
    y = np.asarray(labels, dtype=bool)
    if k < 2:
        raise ValueError("k must be at least 2")
    if y.sum() < k:
        raise ValueError(f"{name}: {int(y.sum())} target instances, fewer than {k} folds")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(y), dtype=int)
    offset = 0
    for cls in (True, False):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        fold_of[idx] = (np.arange(len(idx)) + offset) % k
        # continue the deal where the previous class stopped to balance fold sizes
        offset = (offset + len(idx)) % k
    all_idx = np.arange(len(y))
    return [(all_idx[fold_of != f], all_idx[fold_of == f]) for f in range(k)]
