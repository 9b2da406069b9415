"""Datasets of (true label, blackbox prediction, protected group) triples.

Labels and groups are stored as integer indices into ordered name lists;
the index of a name is its position in the list, and names are ordered
lexicographically so that re-ingesting a file always reproduces the same
encoding.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .rng import derive_seed, shuffled


class DataError(ValueError):
    """Raised for malformed input files or invalid dataset construction."""


@dataclass(frozen=True)
class AdjustmentDataset:
    """Aligned prediction triples with their label/group dictionaries.

    y, y_hat index into class_names; a indexes into group_names.
    """

    y: np.ndarray
    y_hat: np.ndarray
    a: np.ndarray
    class_names: tuple[str, ...]
    group_names: tuple[str, ...]

    def __post_init__(self):
        for name in ("y", "y_hat", "a"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.int64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "group_names", tuple(self.group_names))
        n = len(self.y)
        if n == 0:
            raise DataError("dataset is empty")
        if len(self.y_hat) != n or len(self.a) != n:
            raise DataError("y, y_hat and a must have equal length")
        c, g = self.n_classes, self.n_groups
        if c < 2:
            raise DataError("need at least two distinct classes")
        if g < 2:
            raise DataError("single protected group: need at least two")
        if len(set(self.class_names)) != c or len(set(self.group_names)) != g:
            raise DataError("class/group names must be distinct")
        for arr, hi, what in ((self.y, c, "y"), (self.y_hat, c, "y_hat"), (self.a, g, "a")):
            if arr.min() < 0 or arr.max() >= hi:
                raise DataError(f"{what} contains out-of-range indices")

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def n_groups(self) -> int:
        return len(self.group_names)

    def subset(self, rows: np.ndarray) -> "AdjustmentDataset":
        """Row subset sharing this dataset's encodings."""
        rows = np.asarray(rows, dtype=np.int64)
        return AdjustmentDataset(self.y[rows], self.y_hat[rows], self.a[rows],
                                 self.class_names, self.group_names)


@dataclass(frozen=True)
class SplitPlan:
    """Deterministic fold assignment for cross-validation."""

    folds: int
    seed: int
    assignments: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.assignments, dtype=np.int64)
        arr.flags.writeable = False
        object.__setattr__(self, "assignments", arr)

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


def from_values(y_vals, yhat_vals, a_vals) -> AdjustmentDataset:
    """Build a dataset from raw (string) label values.

    The class dictionary is the sorted union of true and predicted values,
    so the adjusted predictor's sample space covers both.
    """
    y_vals = [str(v) for v in y_vals]
    yhat_vals = [str(v) for v in yhat_vals]
    a_vals = [str(v) for v in a_vals]
    classes = tuple(sorted(set(y_vals) | set(yhat_vals)))
    groups = tuple(sorted(set(a_vals)))
    if len(groups) < 2:
        raise DataError("single protected group: need at least two")
    cidx = {v: i for i, v in enumerate(classes)}
    gidx = {v: i for i, v in enumerate(groups)}
    y = np.fromiter((cidx[v] for v in y_vals), dtype=np.int64, count=len(y_vals))
    y_hat = np.fromiter((cidx[v] for v in yhat_vals), dtype=np.int64, count=len(yhat_vals))
    a = np.fromiter((gidx[v] for v in a_vals), dtype=np.int64, count=len(a_vals))
    return AdjustmentDataset(y, y_hat, a, classes, groups)


def load_dataset(path, y_col: str = "y", yhat_col: str = "y_hat",
                 a_col: str = "a") -> AdjustmentDataset:
    """Read prediction triples from a headered CSV file, preserving row order."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        for col in (y_col, yhat_col, a_col):
            if col not in reader.fieldnames:
                raise DataError(f"{path}: missing column {col!r}")
        y_vals, yhat_vals, a_vals = [], [], []
        for row in reader:
            y_vals.append(row[y_col])
            yhat_vals.append(row[yhat_col])
            a_vals.append(row[a_col])
    if not y_vals:
        raise DataError(f"{path}: no data rows")
    return from_values(y_vals, yhat_vals, a_vals)


def save_dataset(ds: AdjustmentDataset, path, y_col: str = "y",
                 yhat_col: str = "y_hat", a_col: str = "a") -> None:
    """Write triples back to CSV; reloading reproduces the same encoding."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([y_col, yhat_col, a_col])
        for i in range(ds.n):
            writer.writerow([ds.class_names[ds.y[i]], ds.class_names[ds.y_hat[i]],
                             ds.group_names[ds.a[i]]])


def make_splits(ds: AdjustmentDataset, folds: int, seed: int) -> SplitPlan:
    """Assign each row to a fold, stratifying by (y, a) cell where possible.

    Cells with at least `folds` members are spread evenly over folds; the
    per-cell remainders and all rows of smaller cells are dealt one at a
    time to the currently smallest fold, which keeps global fold sizes
    within one of each other.
    """
    if folds < 2:
        raise DataError(f"folds must be >= 2, got {folds}")
    if folds > ds.n:
        raise DataError(f"folds={folds} exceeds dataset size {ds.n}")
    c = ds.n_classes
    cell = ds.a * c + ds.y
    assignments = np.full(ds.n, -1, dtype=np.int64)
    loads = np.zeros(folds, dtype=np.int64)
    leftovers: list[int] = []
    for cell_id in np.unique(cell):
        rows = shuffled(np.flatnonzero(cell == cell_id), derive_seed(seed, 1, int(cell_id)))
        base = len(rows) // folds
        for f in range(folds):
            block = rows[f * base:(f + 1) * base]
            assignments[block] = f
            loads[f] += len(block)
        leftovers.extend(rows[base * folds:].tolist())
    order = shuffled(np.asarray(leftovers, dtype=np.int64), derive_seed(seed, 2))
    for row in order:
        f = int(np.argmin(loads))
        assignments[row] = f
        loads[f] += 1
    return SplitPlan(folds=folds, seed=seed, assignments=assignments)
