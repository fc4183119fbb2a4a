"""Shared data model: item sets, rating profiles, distance matrices, CSV I/O."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

# load_distance_csv: repaired silently below SYMMETRY_TOL, with a warning up
# to ASYMMETRY_LIMIT, rejected beyond it
SYMMETRY_TOL = 1e-9
ASYMMETRY_LIMIT = 1e-6


class OdorMapError(ValueError):
    """Base class of every domain error raised by odormap."""


class DataFormatError(OdorMapError):
    pass


class DuplicateLabelError(OdorMapError):
    pass


class LabelMismatchError(OdorMapError):
    pass


class AsymmetryError(OdorMapError):
    pass


class InvariantError(OdorMapError):
    pass


class Orientation(str, Enum):
    ITEMS_AS_ROWS = "items-as-rows"
    ITEMS_AS_COLUMNS = "items-as-columns"


def _freeze(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ItemSet:
    """Ordered, unique item labels; the order fixes row/column order."""

    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(label).strip() for label in self.labels)
        seen = set()
        for label in labels:
            if label in seen:
                raise DuplicateLabelError(f"duplicate label {label!r}")
            seen.add(label)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def of(cls, labels: Iterable[str]) -> "ItemSet":
        return cls(tuple(labels))

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __getitem__(self, i: int) -> str:
        return self.labels[i]

    def __contains__(self, label) -> bool:
        return isinstance(label, str) and label.strip() in self.labels

    def index(self, label: str) -> int:
        return self.labels.index(label.strip())


@dataclass(frozen=True)
class ProfileMatrix:
    items: ItemSet
    attributes: ItemSet
    values: np.ndarray

    def __post_init__(self):
        values = _freeze(self.values)
        if values.shape != (len(self.items), len(self.attributes)):
            raise InvariantError(
                f"profile shape {values.shape} does not match "
                f"({len(self.items)}, {len(self.attributes)})"
            )
        if not np.all(np.isfinite(values)):
            raise InvariantError("profile contains non-finite ratings")
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def transpose(self) -> "ProfileMatrix":
        return ProfileMatrix(self.attributes, self.items, self.values.T)

    def select(self, labels: Sequence[str]) -> "ProfileMatrix":
        """Restrict to the given items, in the given order."""
        missing = [label for label in labels if label not in self.items]
        if missing:
            raise LabelMismatchError(f"items not in profile: {', '.join(missing)}")
        rows = [self.items.index(label) for label in labels]
        return ProfileMatrix(ItemSet.of(labels), self.attributes, self.values[rows])


def _check_square(items: ItemSet, values: np.ndarray, kind: str):
    n = len(items)
    if values.shape != (n, n):
        raise InvariantError(f"{kind} shape {values.shape} does not match {n} items")
    if not np.all(np.isfinite(values)):
        raise InvariantError(f"{kind} contains non-finite entries")
    if not np.array_equal(values, values.T):
        raise InvariantError(f"{kind} is not symmetric")


@dataclass(frozen=True)
class DistanceMatrix:
    items: ItemSet
    values: np.ndarray
    metric_tag: str = ""

    def __post_init__(self):
        values = _freeze(self.values)
        _check_square(self.items, values, "distance matrix")
        if np.any(np.diag(values) != 0.0):
            raise InvariantError("distance matrix diagonal must be exactly 0")
        if np.any(values < 0.0):
            raise InvariantError("distance matrix has negative entries")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, items: ItemSet, values, metric_tag: str = "") -> "DistanceMatrix":
        """Symmetrize by averaging, clear the diagonal and clip round-off
        negatives before validating."""
        arr = np.array(values, dtype=np.float64)
        arr = (arr + arr.T) / 2.0
        arr = np.maximum(arr, 0.0)
        np.fill_diagonal(arr, 0.0)
        return cls(items, arr, metric_tag)

    @property
    def n(self) -> int:
        return len(self.items)

    def triangle(self) -> np.ndarray:
        return lower_triangle(self.values)


@dataclass(frozen=True, order=True)
class PairIndex:
    i: int
    j: int
    linear_index: int = field(compare=False)


def pair_count(n: int) -> int:
    if n < 2:
        raise OdorMapError(f"pair count needs at least 2 items, got {n}")
    return n * (n - 1) // 2


def pair_index(i: int, j: int) -> PairIndex:
    """Position of the unordered pair {i, j} in the lower-triangle vector."""
    if i == j or i < 0 or j < 0:
        raise OdorMapError(f"invalid pair ({i}, {j})")
    i, j = min(i, j), max(i, j)
    return PairIndex(i, j, j * (j - 1) // 2 + i)


def pair_at(k: int) -> PairIndex:
    if k < 0:
        raise OdorMapError(f"invalid linear index {k}")
    # largest j with j(j-1)/2 <= k
    j = int((1 + np.sqrt(1 + 8 * k)) // 2)
    while j * (j - 1) // 2 > k:
        j -= 1
    while (j + 1) * j // 2 <= k:
        j += 1
    return PairIndex(k - j * (j - 1) // 2, j, k)


def iter_pairs(n: int):
    """Unordered pairs in lower-triangle order: (0,1), (0,2), (1,2), (0,3), ..."""
    for j in range(1, n):
        for i in range(j):
            yield PairIndex(i, j, j * (j - 1) // 2 + i)


def lower_triangle(values: np.ndarray) -> np.ndarray:
    rows, cols = np.tril_indices(values.shape[0], k=-1)
    return values[rows, cols]


def check_file(path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return path


def _read_cells(path: Path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(
            path,
            header=None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=True,
            encoding="utf-8",
        )
    except pd.errors.ParserError as e:
        raise DataFormatError(f"{path}: ragged rows ({e})") from e
    except pd.errors.EmptyDataError as e:
        raise DataFormatError(f"{path}: empty file") from e
    if frame.isna().any().any():
        row = int(np.where(frame.isna().any(axis=1))[0][0])
        raise DataFormatError(f"{path}: ragged rows (line {row + 1} is short)")
    return frame


def _to_float(cell: str) -> float:
    try:
        return float(cell)
    except ValueError:
        return np.nan


def _parse_numeric(cells: pd.DataFrame, path: Path, row_labels, col_labels) -> np.ndarray:
    # correctly rounded, unlike pd.to_numeric
    numeric = cells.apply(lambda col: col.str.strip().map(_to_float))
    values = numeric.to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        r, c = (int(x[0]) for x in np.nonzero(bad))
        raise DataFormatError(
            f"{path}: non-numeric cell {cells.iat[r, c]!r} "
            f"at row {row_labels[r]!r}, column {col_labels[c]!r}"
        )
    return values


def load_profile_csv(
    path: str | os.PathLike,
    orientation: Orientation | str = Orientation.ITEMS_AS_ROWS,
) -> ProfileMatrix:
    path = check_file(path)
    orientation = Orientation(orientation)
    cells = _read_cells(path)
    if cells.shape[0] < 2 or cells.shape[1] < 2:
        raise DataFormatError(f"{path}: need a header row and a label column")
    header = [s.strip() for s in cells.iloc[0, 1:]]
    first_col = [s.strip() for s in cells.iloc[1:, 0]]
    body = cells.iloc[1:, 1:]
    values = _parse_numeric(body, path, first_col, header)
    profile = ProfileMatrix(ItemSet.of(first_col), ItemSet.of(header), values)
    if orientation is Orientation.ITEMS_AS_COLUMNS:
        profile = profile.transpose()
    logger.debug(f"loaded profile {path} with shape {profile.shape}")
    return profile


def load_item_list(path: str | os.PathLike) -> ItemSet:
    """One label per line; a ``.csv`` file is read as one column with a header."""
    path = check_file(path)
    if path.suffix.lower() == ".csv":
        cells = _read_cells(path)
        if cells.shape[1] != 1:
            raise DataFormatError(f"{path}: expected one column, found {cells.shape[1]}")
        labels = list(cells.iloc[1:, 0])
    else:
        labels = path.read_text(encoding="utf-8").splitlines()
    labels = [label.strip() for label in labels if label.strip()]
    if not labels:
        raise DataFormatError(f"{path}: empty item list")
    return ItemSet.of(labels)


def write_square_csv(items: ItemSet, values: np.ndarray, path: str | os.PathLike):
    frame = pd.DataFrame(values, index=list(items), columns=list(items))
    # %.17g round-trips exactly when read back with float()
    frame.to_csv(path, index_label="", float_format="%.17g", encoding="utf-8", lineterminator="\n")


def read_square_csv(path: str | os.PathLike) -> tuple[ItemSet, np.ndarray]:
    path = check_file(path)
    cells = _read_cells(path)
    n = cells.shape[0] - 1
    if n < 1 or cells.shape[1] != n + 1:
        raise DataFormatError(
            f"{path}: matrix is not square ({n} rows, {cells.shape[1] - 1} columns)"
        )
    header = [s.strip() for s in cells.iloc[0, 1:]]
    first_col = [s.strip() for s in cells.iloc[1:, 0]]
    if header != first_col:
        raise LabelMismatchError(f"{path}: header row and first column labels differ")
    values = _parse_numeric(cells.iloc[1:, 1:], path, first_col, header)
    return ItemSet.of(header), values


def symmetrize(values: np.ndarray, source) -> np.ndarray:
    """Average a nearly symmetric matrix with its transpose."""
    gap = float(np.max(np.abs(values - values.T))) if values.size else 0.0
    if gap > ASYMMETRY_LIMIT:
        raise AsymmetryError(f"{source}: asymmetry {gap:.3g} exceeds {ASYMMETRY_LIMIT}")
    if gap > SYMMETRY_TOL:
        logger.warning(f"{source}: asymmetry {gap:.3g} repaired by averaging")
    return (values + values.T) / 2.0


def save_distance_csv(m: DistanceMatrix, path: str | os.PathLike):
    write_square_csv(m.items, m.values, path)


def load_distance_csv(path: str | os.PathLike, metric_tag: str | None = None) -> DistanceMatrix:
    """The metric tag defaults to the file stem."""
    items, values = read_square_csv(path)
    values = symmetrize(values, path)
    diag = np.abs(np.diag(values))
    if np.any(diag > ASYMMETRY_LIMIT):
        logger.warning(f"{path}: non-zero diagonal forced to 0")
    np.fill_diagonal(values, 0.0)
    if np.any(values < 0.0):
        raise InvariantError(f"{path}: negative distances")
    if metric_tag is None:
        metric_tag = Path(path).stem
    return DistanceMatrix(items, values, metric_tag)


def check_same_items(a: ItemSet, b: ItemSet, what: str = "matrices"):
    if a.labels != b.labels:
        missing = sorted(set(a.labels) ^ set(b.labels))
        if missing:
            detail = f"labels differ: {', '.join(missing[:5])}"
        else:
            detail = "same labels in a different order"
        raise LabelMismatchError(f"{what} do not share one item set ({detail})")
