#!/usr/bin/env python3
"""Build odor maps: profile distances, LLM similarity harvesting, Mantel
comparisons, metric MDS, average-linkage clustering and SVG rendering.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Callable, List, Optional

from odormap import __version__, log
from odormap.clustering import ClusterMode
from odormap.config import ConfigManager
from odormap.core import OdorMapError, Orientation
from odormap.harvester import (
    IncompleteHarvestError,
    MockProvider,
    OpenAIProvider,
    ProviderConfig,
)
from odormap.manifest import RunManifest
from odormap.metrics import Axis, MetricKind
from odormap.stats import DEFAULT_PERMUTATIONS, Alternative
from odormap import high_level

logger = logging.getLogger(__name__)

DEFAULT_SEED = 0


def _add_mantel_options(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--permutations",
        type=int,
        default=DEFAULT_PERMUTATIONS,
        help="Number of permutations (default: %(default)s).",
    )
    parser.add_argument(
        "--alternative",
        choices=[a.value for a in Alternative],
        default=Alternative.TWO_SIDED.value,
        help="Alternative hypothesis (default: %(default)s).",
    )
    parser.add_argument(
        "--seed", type=int, default=DEFAULT_SEED, help="Permutation seed (default: %(default)s)."
    )


def _add_mds_options(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--restarts", type=int, default=4, help="Random restarts (default: %(default)s)."
    )
    parser.add_argument(
        "--seed", type=int, default=DEFAULT_SEED, help="Initialization seed (default: %(default)s)."
    )
    parser.add_argument(
        "--max-iter", type=int, default=300, help="Iterations per restart (default: %(default)s)."
    )
    parser.add_argument(
        "--eps",
        type=float,
        default=1e-6,
        help="Relative raw-stress decrease that stops a restart (default: %(default)s).",
    )


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="odormap", description=__doc__, add_help=True)
    parser.add_argument(
        "--version",
        "-v",
        action="version",
        version=f"odormap v{__version__}",
    )
    parser.add_argument(
        "--debug",
        "-d",
        default=False,
        action="store_true",
        help="Use debug logging level.",
    )
    parser.add_argument("--config", type=str, help="Settings file (JSON).")
    parser.add_argument(
        "--replay", type=str, metavar="MANIFEST", help="Re-run the command recorded in a manifest."
    )
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = commands.add_parser("distances", help="Profile CSV -> distance matrix.")
    p.add_argument("--input", required=True, help="Profile CSV.")
    p.add_argument("--axis", choices=[a.value for a in Axis], default=Axis.ITEMS.value)
    p.add_argument(
        "--metric", choices=[m.value for m in MetricKind], default=MetricKind.COSINE.value
    )
    p.add_argument(
        "--orientation",
        choices=[o.value for o in Orientation],
        default=Orientation.ITEMS_AS_ROWS.value,
    )
    p.add_argument("--items", help="Keep only these items (one label per line), in this order.")
    p.add_argument("--out", required=True)

    p = commands.add_parser("harvest", help="Ask an LLM for every pairwise similarity.")
    p.add_argument("--items", required=True, help="Item list (one label per line).")
    p.add_argument("--endpoint", help="OpenAI-compatible API base URL.")
    p.add_argument("--model", help="Model name.")
    p.add_argument(
        "--api-key-env",
        default=None,
        help="Environment variable holding the API key (default: ODORMAP_API_KEY).",
    )
    p.add_argument("--cache", required=True, help="JSON-lines response cache.")
    p.add_argument("--template", help="Prompt template file with $item_a and $item_b.")
    p.add_argument("--max-parallel", type=int, default=4)
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--max-retries", type=int, default=5)
    p.add_argument(
        "--mock-seed",
        type=int,
        help="Use the offline mock provider with this seed instead of an endpoint.",
    )
    p.add_argument("--out", required=True, help="Similarity matrix CSV.")

    p = commands.add_parser("sim2dist", help="Similarity matrix -> distance matrix (1 - s).")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)

    p = commands.add_parser("mantel", help="Mantel test between two distance matrices.")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    _add_mantel_options(p)

    p = commands.add_parser("grid", help="Mantel test for every pair of matrices.")
    p.add_argument("--matrices", nargs="+", required=True)
    p.add_argument("--out", required=True)
    _add_mantel_options(p)

    p = commands.add_parser("pairs", help="Paired triangle values and histograms.")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--out", required=True)

    p = commands.add_parser("mds", help="Metric MDS coordinates.")
    p.add_argument("--dist", required=True)
    p.add_argument("--dims", type=int, default=2)
    _add_mds_options(p)
    p.add_argument("--out", required=True)

    p = commands.add_parser("sweep", help="Stress for k = 1..max-dims.")
    p.add_argument("--dist", required=True)
    p.add_argument("--max-dims", type=int, default=10)
    _add_mds_options(p)
    p.add_argument("--out", required=True)

    p = commands.add_parser("cluster", help="Average-linkage clustering.")
    p.add_argument("--dist", required=True)
    p.add_argument(
        "--mode",
        choices=[m.value for m in ClusterMode],
        default=ClusterMode.ROWS_AS_FEATURES.value,
    )
    p.add_argument("--cut", type=int, help="Also write flat assignments for K clusters.")
    p.add_argument("--out", required=True, help=".json merge list or .csv linkage matrix.")

    p = commands.add_parser("map", help="Render a 2-D odor map as SVG.")
    p.add_argument("--coords", required=True)
    p.add_argument("--groups", help="Group CSV (label, group, color).")
    p.add_argument("--out", required=True)

    p = commands.add_parser("dendro", help="Render a dendrogram as SVG.")
    p.add_argument("--tree", required=True)
    p.add_argument("--labels", help="Leaf labels (one per line); default: labels in the tree file.")
    p.add_argument("--groups", help="Group CSV (label, group, color).")
    p.add_argument("--out", required=True)

    return parser


def parse_args(args: Optional[List[str]]) -> argparse.Namespace:
    return create_parser().parse_args(args=args)


def _manifest(parsed, argv, inputs, outputs, seeds=None):
    config = {
        k: v
        for k, v in vars(parsed).items()
        if k not in ("debug", "config", "replay") and v is not None
    }
    RunManifest.for_run(
        parsed.command, argv, [p for p in inputs if p], config, seeds or {}, outputs
    ).write()


def cmd_distances(parsed, argv) -> int:
    high_level.compute_distances(
        parsed.input, parsed.out, parsed.axis, parsed.metric, parsed.orientation, parsed.items
    )
    _manifest(parsed, argv, [parsed.input, parsed.items], [parsed.out])
    return 0


def build_provider(parsed):
    if parsed.mock_seed is not None:
        return MockProvider(parsed.mock_seed, parsed.max_parallel)
    config = ProviderConfig(
        endpoint_url=parsed.endpoint or ConfigManager.get("ODORMAP_ENDPOINT"),
        model_name=parsed.model or ConfigManager.get("ODORMAP_MODEL"),
        api_key_env=(
            parsed.api_key_env
            if parsed.api_key_env is not None
            else ConfigManager.get("ODORMAP_API_KEY_ENV")
        ),
        temperature=parsed.temperature,
        max_parallel=parsed.max_parallel,
        timeout=parsed.timeout,
        max_retries=parsed.max_retries,
    )
    return OpenAIProvider(config)


def cmd_harvest(parsed, argv) -> int:
    provider = build_provider(parsed)
    try:
        report = high_level.harvest_similarities(
            parsed.items, provider, parsed.cache, parsed.out, parsed.template
        )
    except IncompleteHarvestError as e:
        missing = high_level.sibling(parsed.out, ".missing.csv")
        high_level.save_failures_csv(e.report.failures, missing)
        logger.error(f"missing pairs written to {missing}; re-run to resume")
        raise
    print(
        f"harvested {report.model_name}: {len(report.items)} items, "
        f"{report.requested} requested, {report.cached} cached"
    )
    seeds = {"mock_seed": parsed.mock_seed} if parsed.mock_seed is not None else {}
    _manifest(parsed, argv, [parsed.items, parsed.template], [parsed.out], seeds)
    return 0


def cmd_sim2dist(parsed, argv) -> int:
    high_level.convert_similarity(parsed.input, parsed.out)
    _manifest(parsed, argv, [parsed.input], [parsed.out])
    return 0


def cmd_mantel(parsed, argv) -> int:
    result = high_level.mantel_files(
        parsed.a, parsed.b, parsed.permutations, parsed.alternative, parsed.seed
    )
    print(f"r={result.r:.6f} p={result.p_value:.6g} {result.stars}")
    return 0


def cmd_grid(parsed, argv) -> int:
    grid = high_level.grid_files(
        parsed.matrices, parsed.out, parsed.permutations, parsed.alternative, parsed.seed
    )
    for _, _, res in grid.results:
        print(f"{res.tag_a}\t{res.tag_b}\tr={res.r:.6f}\tp={res.p_value:.6g}\t{res.stars}")
    _manifest(
        parsed,
        argv,
        parsed.matrices,
        [parsed.out, high_level.sibling(parsed.out, ".r.csv")],
        {"seed": parsed.seed},
    )
    return 0


def cmd_pairs(parsed, argv) -> int:
    outputs = high_level.pairs_files(parsed.a, parsed.b, parsed.out, parsed.bins)
    _manifest(parsed, argv, [parsed.a, parsed.b], outputs)
    return 0


def cmd_mds(parsed, argv) -> int:
    result = high_level.embed(
        parsed.dist, parsed.out, parsed.dims, parsed.restarts, parsed.seed,
        parsed.max_iter, parsed.eps,
    )
    print(f"k={result.n_components} raw_stress={result.raw_stress:.6g} "
          f"stress1={result.stress1:.6g}")
    _manifest(parsed, argv, [parsed.dist], [parsed.out], {"seed": parsed.seed})
    return 0


def cmd_sweep(parsed, argv) -> int:
    rows = high_level.sweep(
        parsed.dist, parsed.out, parsed.max_dims, parsed.restarts, parsed.seed,
        parsed.max_iter, parsed.eps,
    )
    for row in rows:
        print(f"k={row.k} raw_stress={row.raw_stress:.6g} stress1={row.stress1:.6g}")
    _manifest(parsed, argv, [parsed.dist], [parsed.out], {"seed": parsed.seed})
    return 0


def cmd_cluster(parsed, argv) -> int:
    outputs = high_level.cluster_file(parsed.dist, parsed.out, parsed.mode, parsed.cut)
    _manifest(parsed, argv, [parsed.dist], outputs)
    return 0


def cmd_map(parsed, argv) -> int:
    high_level.map_file(parsed.coords, parsed.out, parsed.groups)
    _manifest(parsed, argv, [parsed.coords, parsed.groups], [parsed.out])
    return 0


def cmd_dendro(parsed, argv) -> int:
    high_level.dendro_file(parsed.tree, parsed.out, parsed.labels, parsed.groups)
    _manifest(parsed, argv, [parsed.tree, parsed.labels, parsed.groups], [parsed.out])
    return 0


COMMANDS: dict[str, Callable[[argparse.Namespace, List[str]], int]] = {
    "distances": cmd_distances,
    "harvest": cmd_harvest,
    "sim2dist": cmd_sim2dist,
    "mantel": cmd_mantel,
    "grid": cmd_grid,
    "pairs": cmd_pairs,
    "mds": cmd_mds,
    "sweep": cmd_sweep,
    "cluster": cmd_cluster,
    "map": cmd_map,
    "dendro": cmd_dendro,
}


def setup_logging():
    from rich.logging import RichHandler

    logging.basicConfig(level=logging.INFO, handlers=[RichHandler()])

    # disable httpx, openai, httpcore logs
    for name in ("httpx", "openai", "httpcore"):
        logging.getLogger(name).setLevel("CRITICAL")
        logging.getLogger(name).propagate = False


def main(args: Optional[List[str]] = None) -> int:
    from dotenv import load_dotenv

    setup_logging()
    load_dotenv()

    argv = list(sys.argv[1:] if args is None else args)
    try:
        parsed_args = parse_args(argv)
    except SystemExit as e:
        # --help and --version exit 0, usage errors exit 2
        return e.code if isinstance(e.code, int) else 0

    if parsed_args.debug:
        log.setLevel(logging.DEBUG)

    try:
        if parsed_args.config:
            ConfigManager.custom_config(parsed_args.config)

        if parsed_args.replay:
            manifest = RunManifest.read(parsed_args.replay)
            logger.info(f"replaying {manifest.command} from {parsed_args.replay}")
            return main(manifest.argv)

        if parsed_args.command is None:
            create_parser().print_usage(sys.stderr)
            return 2

        return COMMANDS[parsed_args.command](parsed_args, argv)
    except (OdorMapError, FileNotFoundError) as e:
        message = " ".join(str(e).split())
        print(f"odormap: error: {type(e).__name__}: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
