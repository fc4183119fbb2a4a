"""Average-linkage (UPGMA) agglomerative clustering."""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist, squareform

from odormap.core import DistanceMatrix, ItemSet, OdorMapError, check_file

logger = logging.getLogger(__name__)


class ClusterMode(str, Enum):
    ROWS_AS_FEATURES = "rows-as-features"
    PRECOMPUTED = "precomputed"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    distance: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Merge history; leaves are 0..n-1 and merge i creates node n+i."""

    n_leaves: int
    merges: tuple[Merge, ...]
    labels: Optional[ItemSet] = None

    def __post_init__(self):
        if len(self.merges) != self.n_leaves - 1:
            raise OdorMapError(
                f"{self.n_leaves} leaves need {self.n_leaves - 1} merges, "
                f"got {len(self.merges)}"
            )
        if self.labels is not None and len(self.labels) != self.n_leaves:
            raise OdorMapError("label count does not match leaf count")
        sizes = [1] * self.n_leaves
        used = set()
        for i, m in enumerate(self.merges):
            node = self.n_leaves + i
            for child in (m.left, m.right):
                if not 0 <= child < node or child in used:
                    raise OdorMapError(f"merge {i} references invalid node {child}")
                used.add(child)
            if m.size != sizes[m.left] + sizes[m.right]:
                raise OdorMapError(f"merge {i} has size {m.size}, expected "
                                   f"{sizes[m.left] + sizes[m.right]}")
            sizes.append(m.size)

    def leaf_order(self) -> list[int]:
        """Leaves in recursive left-before-right order from the root."""
        if self.n_leaves == 1:
            return [0]
        order = []
        stack = [self.n_leaves + len(self.merges) - 1]
        while stack:
            node = stack.pop()
            if node < self.n_leaves:
                order.append(node)
            else:
                m = self.merges[node - self.n_leaves]
                stack.append(m.right)
                stack.append(m.left)
        return order

    def to_linkage(self) -> np.ndarray:
        """(n-1) x 4 array: left, right, distance, size."""
        return np.array(
            [[m.left, m.right, m.distance, m.size] for m in self.merges], dtype=np.float64
        ).reshape(-1, 4)

    def to_dict(self) -> dict:
        return {
            "n_leaves": self.n_leaves,
            "labels": list(self.labels) if self.labels is not None else None,
            "merges": [
                {"left": m.left, "right": m.right, "distance": m.distance, "size": m.size}
                for m in self.merges
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Dendrogram":
        labels = data.get("labels")
        return cls(
            int(data["n_leaves"]),
            tuple(
                Merge(int(m["left"]), int(m["right"]), float(m["distance"]), int(m["size"]))
                for m in data["merges"]
            ),
            ItemSet.of(labels) if labels is not None else None,
        )


def _cross_mean(values: np.ndarray, a: list[int], b: list[int]) -> float:
    # fsum is exactly rounded, so the mean does not depend on member order
    block = values[np.ix_(a, b)]
    return math.fsum(block.ravel().tolist()) / (len(a) * len(b))


def average_linkage(d: DistanceMatrix) -> Dendrogram:
    """UPGMA: repeatedly merge the two clusters with the smallest mean
    cross-pair distance; ties go to the smallest (left_id, right_id)."""
    n = d.n
    if n < 2:
        raise OdorMapError(f"clustering needs at least 2 items, got {n}")
    values = d.values
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    between: dict[tuple[int, int], float] = {}
    for j in range(n):
        for i in range(j):
            between[(i, j)] = float(values[i, j])

    merges = []
    for step in range(n - 1):
        (left, right), dist = min(between.items(), key=lambda kv: (kv[1], kv[0]))
        node = n + step
        merged = sorted(members.pop(left) + members.pop(right))
        merges.append(Merge(left, right, dist, len(merged)))
        between = {
            pair: value
            for pair, value in between.items()
            if left not in pair and right not in pair
        }
        for other, other_members in members.items():
            between[(other, node)] = _cross_mean(values, other_members, merged)
        members[node] = merged
    logger.debug(f"average linkage over {n} items, root height {merges[-1].distance:.6g}")
    return Dendrogram(n, tuple(merges), d.items)


def rows_as_features(d: DistanceMatrix) -> DistanceMatrix:
    """Euclidean distances between rows of a dissimilarity matrix, each row
    taken as the item's feature vector."""
    values = squareform(pdist(d.values, metric="euclidean"), checks=False)
    tag = f"{d.metric_tag}-rows" if d.metric_tag else "rows"
    return DistanceMatrix.from_array(d.items, values, tag)


def cluster(d: DistanceMatrix, mode: ClusterMode | str = ClusterMode.ROWS_AS_FEATURES) -> Dendrogram:
    if ClusterMode(mode) is ClusterMode.ROWS_AS_FEATURES:
        d = rows_as_features(d)
    return average_linkage(d)


def cut_tree(dg: Dendrogram, k: int) -> list[int]:
    """Flat clusters after undoing the last k-1 merges; cluster ids are
    numbered by the smallest leaf they contain."""
    n = dg.n_leaves
    if not 1 <= k <= n:
        raise OdorMapError(f"cluster count must be in [1, {n}], got {k}")
    parent = list(range(n + len(dg.merges)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, m in enumerate(dg.merges[: n - k]):
        parent[find(m.left)] = n + i
        parent[find(m.right)] = n + i
    roots = [find(leaf) for leaf in range(n)]
    numbering: dict[int, int] = {}
    for root in roots:
        numbering.setdefault(root, len(numbering))
    return [numbering[root] for root in roots]


def save_dendrogram_json(dg: Dendrogram, path: str | os.PathLike):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(dg.to_dict(), f, indent=2, ensure_ascii=False)
        f.write("\n")


def save_linkage_csv(dg: Dendrogram, path: str | os.PathLike):
    frame = pd.DataFrame(
        [(m.left, m.right, m.distance, m.size) for m in dg.merges],
        columns=["left", "right", "distance", "size"],
    )
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def load_dendrogram(path: str | os.PathLike) -> Dendrogram:
    """JSON merge list or linkage CSV, chosen by file suffix."""
    path = check_file(path)
    if path.suffix.lower() == ".json":
        with path.open("r", encoding="utf-8") as f:
            try:
                return Dendrogram.from_dict(json.load(f))
            except (KeyError, TypeError, json.JSONDecodeError) as e:
                raise OdorMapError(f"{path}: malformed dendrogram JSON ({e})") from e
    frame = pd.read_csv(path, float_precision="round_trip")
    if list(frame.columns) != ["left", "right", "distance", "size"]:
        raise OdorMapError(f"{path}: expected columns left, right, distance, size")
    merges = tuple(
        Merge(int(row.left), int(row.right), float(row.distance), int(row.size))
        for row in frame.itertuples(index=False)
    )
    return Dendrogram(len(merges) + 1, merges)


def save_assignments_csv(labels: ItemSet, assignment: list[int], path: str | os.PathLike):
    pd.DataFrame({"label": list(labels), "cluster": assignment}).to_csv(
        path, index=False, lineterminator="\n"
    )
