"""Mantel permutation test and all-pairs comparison grids."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
import pandas as pd

from odormap.core import DistanceMatrix, OdorMapError, check_same_items

logger = logging.getLogger(__name__)

DEFAULT_PERMUTATIONS = 999
# permuted statistics are evaluated in blocks of this many permutations
_BLOCK = 256


class Alternative(str, Enum):
    TWO_SIDED = "two-sided"
    GREATER = "greater"
    LESS = "less"

    def __str__(self) -> str:
        return self.value


def significance_stars(p: float) -> str:
    if p <= 0.001:
        return "***"
    if p <= 0.01:
        return "**"
    if p <= 0.05:
        return "*"
    return "ns"


@dataclass(frozen=True)
class MantelResult:
    r: float
    p_value: float
    permutations: int
    alternative: Alternative
    n_items: int
    tag_a: str = ""
    tag_b: str = ""

    @property
    def stars(self) -> str:
        return significance_stars(self.p_value)


def _normalized(values: np.ndarray, tag: str) -> np.ndarray:
    """Center and scale a square matrix so that the dot product of two
    normalized lower triangles is their Pearson r."""
    rows, cols = np.tril_indices(values.shape[0], k=-1)
    tri = values[rows, cols]
    centered = tri - tri.mean()
    norm = np.sqrt(np.dot(centered, centered))
    if norm == 0.0:
        raise OdorMapError(f"matrix {tag or '<untagged>'} is constant; Pearson r undefined")
    out = np.zeros_like(values)
    out[rows, cols] = centered / norm
    return out + out.T


def _statistic(xm: np.ndarray, ym: np.ndarray) -> float:
    return float(min(max(np.dot(xm, ym), -1.0), 1.0))


def _extreme(stats: np.ndarray, r: float, alternative: Alternative) -> int:
    if alternative is Alternative.GREATER:
        return int(np.count_nonzero(stats >= r))
    if alternative is Alternative.LESS:
        return int(np.count_nonzero(stats <= r))
    return int(np.count_nonzero(np.abs(stats) >= abs(r)))


def mantel(
    a: DistanceMatrix,
    b: DistanceMatrix,
    permutations: int = DEFAULT_PERMUTATIONS,
    alternative: Alternative | str = Alternative.TWO_SIDED,
    rng_seed: int = 0,
) -> MantelResult:
    """Pearson Mantel test on the lower triangles of two distance matrices.

    The argument with the lexicographically smaller metric tag (ties broken
    on the raw bytes of the lower triangle) is taken as the fixed matrix; the
    other one is permuted (rows and columns together), so swapping the
    arguments gives the same result.
    """
    alternative = Alternative(alternative)
    check_same_items(a.items, b.items)
    n = a.n
    if n < 3:
        raise OdorMapError(f"mantel test needs at least 3 items, got {n}")
    if permutations < 1:
        raise OdorMapError("permutations must be >= 1")
    if (b.metric_tag, b.triangle().tobytes()) < (a.metric_tag, a.triangle().tobytes()):
        a, b = b, a

    rows, cols = np.tril_indices(n, k=-1)
    xm = _normalized(a.values, a.metric_tag)[rows, cols]
    ym_square = _normalized(b.values, b.metric_tag)
    r = _statistic(xm, ym_square[rows, cols])

    rng = np.random.default_rng(rng_seed)
    orders = np.stack([rng.permutation(n) for _ in range(permutations)])
    stats = np.empty(permutations)
    for start in range(0, permutations, _BLOCK):
        block = orders[start : start + _BLOCK]
        permuted = ym_square[block[:, rows], block[:, cols]]
        stats[start : start + len(block)] = np.clip(permuted @ xm, -1.0, 1.0)

    hits = _extreme(stats, r, alternative)
    p = (hits + 1) / (permutations + 1)
    logger.debug(f"mantel {a.metric_tag} vs {b.metric_tag}: r={r:.4f} p={p:.4g}")
    return MantelResult(r, p, permutations, alternative, n, a.metric_tag, b.metric_tag)


@dataclass(frozen=True)
class ComparisonGrid:
    metric_tags: tuple[str, ...]
    # (i, j, result) for every i < j over metric_tags
    results: tuple[tuple[int, int, MantelResult], ...]

    def get(self, i: int, j: int) -> MantelResult:
        i, j = min(i, j), max(i, j)
        for a, b, result in self.results:
            if (a, b) == (i, j):
                return result
        raise KeyError((i, j))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "tag_a": res.tag_a,
                    "tag_b": res.tag_b,
                    "r": res.r,
                    "p": res.p_value,
                    "permutations": res.permutations,
                    "stars": res.stars,
                }
                for _, _, res in self.results
            ],
            columns=["tag_a", "tag_b", "r", "p", "permutations", "stars"],
        )

    def r_frame(self) -> pd.DataFrame:
        k = len(self.metric_tags)
        r = np.eye(k)
        for i, j, res in self.results:
            r[i, j] = r[j, i] = res.r
        return pd.DataFrame(r, index=list(self.metric_tags), columns=list(self.metric_tags))

    def p_frame(self) -> pd.DataFrame:
        k = len(self.metric_tags)
        p = np.full((k, k), np.nan)
        for i, j, res in self.results:
            p[i, j] = p[j, i] = res.p_value
        return pd.DataFrame(p, index=list(self.metric_tags), columns=list(self.metric_tags))

    def save_csv(self, path: str | os.PathLike):
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def comparison_grid(
    matrices: Sequence[DistanceMatrix],
    permutations: int = DEFAULT_PERMUTATIONS,
    alternative: Alternative | str = Alternative.TWO_SIDED,
    rng_seed: int = 0,
) -> ComparisonGrid:
    """Mantel test for every unordered pair; each pair uses the same seed so a
    grid cell equals the stand-alone test of that pair."""
    if len(matrices) < 2:
        raise OdorMapError("comparison grid needs at least 2 matrices")
    first = matrices[0]
    for m in matrices[1:]:
        check_same_items(first.items, m.items)
    results = []
    for i in range(len(matrices)):
        for j in range(i + 1, len(matrices)):
            res = mantel(matrices[i], matrices[j], permutations, alternative, rng_seed)
            results.append((i, j, res))
    return ComparisonGrid(tuple(m.metric_tag for m in matrices), tuple(results))


def pair_table(a: DistanceMatrix, b: DistanceMatrix) -> pd.DataFrame:
    """Long table of the paired lower-triangle values, for scatter plots."""
    check_same_items(a.items, b.items)
    rows, cols = np.tril_indices(a.n, k=-1)
    labels = np.array(a.items.labels, dtype=object)
    name_a = a.metric_tag or "a"
    name_b = b.metric_tag or "b"
    if name_a == name_b:
        name_a, name_b = f"{name_a}_a", f"{name_b}_b"
    return pd.DataFrame(
        {
            "item_a": labels[cols],
            "item_b": labels[rows],
            name_a: a.values[rows, cols],
            name_b: b.values[rows, cols],
        }
    )


def value_histogram(values: np.ndarray, bins: int = 20) -> pd.DataFrame:
    if bins < 1:
        raise OdorMapError("bins must be >= 1")
    counts, edges = np.histogram(values, bins=bins)
    return pd.DataFrame({"bin_left": edges[:-1], "bin_right": edges[1:], "count": counts})
