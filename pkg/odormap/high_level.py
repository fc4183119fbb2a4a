"""File-to-file pipeline steps behind the odormap subcommands."""

import logging
import os
from pathlib import Path
from string import Template
from typing import Optional, Sequence

import pandas as pd

from odormap.cache import FailureRecord, SimilarityCache
from odormap.clustering import (
    ClusterMode,
    Dendrogram,
    cluster,
    cut_tree,
    load_dendrogram,
    save_assignments_csv,
    save_dendrogram_json,
    save_linkage_csv,
)
from odormap.core import (
    DistanceMatrix,
    OdorMapError,
    Orientation,
    load_distance_csv,
    load_item_list,
    load_profile_csv,
    save_distance_csv,
)
from odormap.embedding import (
    EmbeddingResult,
    MdsConfig,
    SweepRow,
    load_embedding_csv,
    save_embedding_csv,
    save_sweep_csv,
    smacof,
    stress_sweep,
)
from odormap.harvester import (
    BaseProvider,
    HarvestReport,
    IncompleteHarvestError,
    load_similarity_csv,
    run_harvest,
    save_similarity_csv,
    similarity_to_distance,
)
from odormap.metrics import Axis, MetricKind, pairwise_distances
from odormap.render import GroupSpec, load_group_csv, render_dendrogram, render_map
from odormap.stats import (
    ComparisonGrid,
    MantelResult,
    comparison_grid,
    mantel,
    pair_table,
    value_histogram,
)

logger = logging.getLogger(__name__)

PathLike = str | os.PathLike


def sibling(path: PathLike, suffix: str) -> Path:
    """``out.csv`` -> ``out<suffix>``."""
    path = Path(path)
    return path.with_name(path.stem + suffix)


def compute_distances(
    input: PathLike,
    out: PathLike,
    axis: Axis | str = Axis.ITEMS,
    metric: MetricKind | str = MetricKind.COSINE,
    orientation: Orientation | str = Orientation.ITEMS_AS_ROWS,
    items: Optional[PathLike] = None,
) -> DistanceMatrix:
    profile = load_profile_csv(input, orientation)
    if items is not None:
        profile = profile.select(load_item_list(items).labels)
    d = pairwise_distances(profile, axis, metric)
    save_distance_csv(d, out)
    logger.info(f"wrote {d.n}x{d.n} {d.metric_tag} distances to {out}")
    return d


def load_template(path: Optional[PathLike]) -> Optional[Template]:
    if path is None:
        return None
    with open(path, "r", encoding="utf-8") as f:
        return Template(f.read())


def harvest_similarities(
    items: PathLike,
    provider: BaseProvider,
    cache: PathLike,
    out: PathLike,
    template: Optional[PathLike] = None,
    progress: bool = True,
) -> HarvestReport:
    item_set = load_item_list(items)
    report = run_harvest(
        item_set, provider, SimilarityCache(cache), load_template(template), progress
    )
    if not report.complete:
        raise IncompleteHarvestError(report)
    save_similarity_csv(report.matrix, out)
    return report


def save_failures_csv(failures: Sequence[FailureRecord], path: PathLike):
    """Pairs a harvest could not score, for the incomplete-harvest report."""
    frame = pd.DataFrame(
        [(f.item_a, f.item_b, f.status, f.error) for f in failures],
        columns=["item_a", "item_b", "status", "error"],
    )
    frame.to_csv(path, index=False, lineterminator="\n")


def convert_similarity(input: PathLike, out: PathLike) -> DistanceMatrix:
    d = similarity_to_distance(load_similarity_csv(input))
    save_distance_csv(d, out)
    return d


def mantel_files(
    a: PathLike,
    b: PathLike,
    permutations: int,
    alternative: str,
    seed: int,
) -> MantelResult:
    return mantel(load_distance_csv(a), load_distance_csv(b), permutations, alternative, seed)


def grid_files(
    matrices: Sequence[PathLike],
    out: PathLike,
    permutations: int,
    alternative: str,
    seed: int,
) -> ComparisonGrid:
    grid = comparison_grid(
        [load_distance_csv(p) for p in matrices], permutations, alternative, seed
    )
    grid.save_csv(out)
    grid.r_frame().to_csv(sibling(out, ".r.csv"), float_format="%.17g", lineterminator="\n")
    return grid


def pairs_files(a: PathLike, b: PathLike, out: PathLike, bins: int) -> list[Path]:
    da, db = load_distance_csv(a), load_distance_csv(b)
    table = pair_table(da, db)
    table.to_csv(out, index=False, float_format="%.17g", lineterminator="\n")
    hist_path = sibling(out, ".hist.csv")
    hist = pd.concat(
        [
            value_histogram(da.triangle(), bins).assign(matrix=da.metric_tag),
            value_histogram(db.triangle(), bins).assign(matrix=db.metric_tag),
        ],
        ignore_index=True,
    )
    hist.to_csv(hist_path, index=False, float_format="%.17g", lineterminator="\n")
    return [Path(out), hist_path]


def embed(
    dist: PathLike,
    out: PathLike,
    dims: int = 2,
    restarts: int = 4,
    seed: int = 0,
    max_iterations: int = 300,
    eps: float = 1e-6,
) -> EmbeddingResult:
    cfg = MdsConfig(dims, restarts, max_iterations, eps, seed)
    result = smacof(load_distance_csv(dist), cfg)
    save_embedding_csv(result, out)
    logger.info(
        f"k={dims}: raw stress {result.raw_stress:.6g}, stress-1 {result.stress1:.6g}"
    )
    return result


def sweep(
    dist: PathLike,
    out: PathLike,
    max_dims: int,
    restarts: int = 4,
    seed: int = 0,
    max_iterations: int = 300,
    eps: float = 1e-6,
) -> list[SweepRow]:
    cfg = MdsConfig(1, restarts, max_iterations, eps, seed)
    rows = stress_sweep(load_distance_csv(dist), max_dims, cfg)
    save_sweep_csv(rows, out)
    return rows


def save_dendrogram(dg: Dendrogram, out: PathLike):
    if Path(out).suffix.lower() == ".json":
        save_dendrogram_json(dg, out)
    else:
        save_linkage_csv(dg, out)


def cluster_file(
    dist: PathLike,
    out: PathLike,
    mode: ClusterMode | str = ClusterMode.ROWS_AS_FEATURES,
    cut: Optional[int] = None,
) -> list[Path]:
    d = load_distance_csv(dist)
    dg = cluster(d, mode)
    save_dendrogram(dg, out)
    outputs = [Path(out)]
    if cut is not None:
        path = sibling(out, f".k{cut}.csv")
        save_assignments_csv(d.items, cut_tree(dg, cut), path)
        outputs.append(path)
    return outputs


def load_groups(path: Optional[PathLike]) -> Optional[GroupSpec]:
    return load_group_csv(path) if path is not None else None


def map_file(coords: PathLike, out: PathLike, groups: Optional[PathLike] = None):
    render_map(load_embedding_csv(coords), load_groups(groups), out)


def dendro_file(
    tree: PathLike,
    out: PathLike,
    labels: Optional[PathLike] = None,
    groups: Optional[PathLike] = None,
):
    dg = load_dendrogram(tree)
    if labels is not None:
        item_set = load_item_list(labels)
    elif dg.labels is not None:
        item_set = dg.labels
    else:
        raise OdorMapError("dendrogram file carries no labels; pass --labels")
    render_dendrogram(dg, item_set, load_groups(groups), out)
