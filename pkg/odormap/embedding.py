"""Metric MDS by SMACOF majorization."""

from __future__ import annotations

import concurrent.futures
import logging
import os
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist

from odormap.core import DistanceMatrix, ItemSet, OdorMapError, check_file

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MdsConfig:
    n_components: int = 2
    n_restarts: int = 4
    max_iterations: int = 300
    convergence_eps: float = 1e-6
    rng_seed: int = 0
    max_workers: int = 4

    def __post_init__(self):
        if self.n_components < 1:
            raise OdorMapError(f"n_components must be >= 1, got {self.n_components}")
        if self.n_restarts < 1 or self.max_iterations < 1:
            raise OdorMapError("n_restarts and max_iterations must be >= 1")
        if self.convergence_eps <= 0:
            raise OdorMapError("convergence_eps must be positive")


@dataclass(frozen=True)
class EmbeddingResult:
    items: ItemSet
    coords: np.ndarray
    # None when coordinates were loaded from a file without fit statistics
    raw_stress: Optional[float]
    stress1: Optional[float]
    n_components: int
    iterations_used: int = 0
    restart_index: int = 0


def raw_stress(coords: np.ndarray, delta: np.ndarray) -> float:
    """Sum over i < j of (dist_ij(X) - delta_ij)^2."""
    dist = cdist(coords, coords)
    rows, cols = np.triu_indices(delta.shape[0], k=1)
    diff = dist[rows, cols] - delta[rows, cols]
    return float(np.dot(diff, diff))


def stress1(raw: float, delta: np.ndarray) -> float:
    """Kruskal stress-1: sqrt(raw / sum over i < j of delta_ij^2)."""
    rows, cols = np.triu_indices(delta.shape[0], k=1)
    tri = delta[rows, cols]
    return float(np.sqrt(raw / np.dot(tri, tri)))


def _guttman(coords: np.ndarray, delta: np.ndarray) -> np.ndarray:
    n = coords.shape[0]
    dist = cdist(coords, coords)
    ratio = np.zeros_like(dist)
    # coincident points contribute b_ij = 0
    np.divide(delta, dist, out=ratio, where=dist > 0)
    b = -ratio
    np.fill_diagonal(b, 0.0)
    b[np.diag_indices(n)] = -b.sum(axis=1)
    return b @ coords / n


def guttman_step(coords: np.ndarray, d: DistanceMatrix) -> np.ndarray:
    """One majorization update X <- B(X) X / n; never increases raw stress."""
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[0] != d.n:
        raise OdorMapError(f"coords shape {coords.shape} does not match {d.n} items")
    return _guttman(coords, d.values)


@dataclass(frozen=True)
class _Run:
    coords: np.ndarray
    raw_stress: float
    iterations: int
    index: int


def _run(delta: np.ndarray, init: np.ndarray, cfg: MdsConfig, index: int) -> _Run:
    x = init
    stress = raw_stress(x, delta)
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        x_new = _guttman(x, delta)
        new_stress = raw_stress(x_new, delta)
        x = x_new
        decrease = stress - new_stress
        stress = new_stress
        if stress == 0.0 or decrease < cfg.convergence_eps * (stress + decrease):
            break
    return _Run(x - x.mean(axis=0), stress, iterations, index)


def _initial(n: int, cfg: MdsConfig) -> list[np.ndarray]:
    children = np.random.SeedSequence(cfg.rng_seed).spawn(cfg.n_restarts)
    return [
        np.random.default_rng(child).uniform(-0.5, 0.5, size=(n, cfg.n_components))
        for child in children
    ]


def smacof(
    d: DistanceMatrix,
    cfg: MdsConfig = MdsConfig(),
    extra_inits: Sequence[np.ndarray] = (),
) -> EmbeddingResult:
    """Best of ``cfg.n_restarts`` seeded-uniform starts (plus any
    ``extra_inits``, indexed after them); ties go to the lower index."""
    delta = d.values
    n, k = d.n, cfg.n_components
    if not np.any(delta > 0):
        raise OdorMapError("all dissimilarities are zero")
    if n < k + 1:
        logger.warning(f"{n} items embedded in {k} dimensions; expect a degenerate fit")
    inits = _initial(n, cfg) + [np.asarray(x, dtype=np.float64) for x in extra_inits]
    for x in inits:
        if x.shape != (n, k):
            raise OdorMapError(f"initial configuration shape {x.shape} != {(n, k)}")

    with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.max_workers) as executor:
        runs = list(
            executor.map(lambda job: _run(delta, job[1], cfg, job[0]), enumerate(inits))
        )
    best = min(runs, key=lambda run: (run.raw_stress, run.index))
    logger.debug(
        f"smacof k={k}: restart {best.index} won with raw stress {best.raw_stress:.6g} "
        f"after {best.iterations} iterations"
    )
    return EmbeddingResult(
        items=d.items,
        coords=best.coords,
        raw_stress=best.raw_stress,
        stress1=stress1(best.raw_stress, delta),
        n_components=k,
        iterations_used=best.iterations,
        restart_index=best.index,
    )


@dataclass(frozen=True)
class SweepRow:
    k: int
    raw_stress: float
    stress1: float


def stress_sweep(d: DistanceMatrix, k_max: int, cfg: MdsConfig = MdsConfig()) -> list[SweepRow]:
    """SMACOF for k = 1..k_max with the same seed for every k.

    Besides the random starts, each k > 1 also starts from the best
    (k-1)-dimensional solution padded with a zero column, so best stress is
    non-increasing in k.
    """
    if not 1 <= k_max <= d.n - 1:
        raise OdorMapError(f"k_max must be in [1, {d.n - 1}], got {k_max}")
    rows = []
    previous: Optional[EmbeddingResult] = None
    for k in range(1, k_max + 1):
        extra = []
        if previous is not None:
            extra.append(np.hstack([previous.coords, np.zeros((d.n, 1))]))
        result = smacof(d, replace(cfg, n_components=k), extra)
        rows.append(SweepRow(k, result.raw_stress, result.stress1))
        previous = result
    return rows


def save_embedding_csv(e: EmbeddingResult, path: str | os.PathLike):
    columns = [f"x{i + 1}" for i in range(e.n_components)]
    frame = pd.DataFrame(e.coords, columns=columns)
    frame.insert(0, "label", list(e.items))
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def load_embedding_csv(path: str | os.PathLike) -> EmbeddingResult:
    path = check_file(path)
    frame = pd.read_csv(
        path,
        dtype={"label": str},
        keep_default_na=False,
        float_precision="round_trip",
        encoding="utf-8",
    )
    if "label" not in frame.columns or frame.shape[1] < 2:
        raise OdorMapError(f"{path}: expected columns label, x1..xk")
    coords = frame.drop(columns=["label"]).to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(coords)):
        raise OdorMapError(f"{path}: non-finite coordinates")
    return EmbeddingResult(
        ItemSet.of(frame["label"]), coords, None, None, coords.shape[1]
    )


def save_sweep_csv(rows: Sequence[SweepRow], path: str | os.PathLike):
    frame = pd.DataFrame(
        [(row.k, row.raw_stress, row.stress1) for row in rows],
        columns=["k", "raw_stress", "stress1"],
    )
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
