#!/usr/bin/env python3
"""Live comparison of LLM similarities with profile cosine distances.

Harvests a similarity matrix for the items of a profile CSV from a live
endpoint, runs the Mantel test against the cosine distances of the profile
and prints the result next to the published reference point. Live scores
drift between model versions, so nothing here passes or fails.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from odormap.config import ConfigManager
from odormap.core import OdorMapError, Orientation, load_item_list, load_profile_csv
from odormap.harvester import OpenAIProvider, ProviderConfig, harvest, similarity_to_distance
from odormap.metrics import Axis, MetricKind, pairwise_distances
from odormap.odormap import setup_logging
from odormap.stats import DEFAULT_PERMUTATIONS, mantel

logger = logging.getLogger(__name__)

REFERENCE_R = 0.332
REFERENCE_P = 0.001


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="odormap-repro", description=__doc__)
    parser.add_argument("--profile", required=True, help="Profile CSV (items x attributes).")
    parser.add_argument(
        "--orientation",
        choices=[o.value for o in Orientation],
        default=Orientation.ITEMS_AS_ROWS.value,
    )
    parser.add_argument("--items", help="Stimulus list selecting and ordering the items.")
    parser.add_argument("--endpoint", help="OpenAI-compatible API base URL.")
    parser.add_argument("--model", help="Model name.")
    parser.add_argument("--api-key-env", default=None)
    parser.add_argument("--cache", default="repro-cache.jsonl")
    parser.add_argument("--max-parallel", type=int, default=4)
    parser.add_argument("--permutations", type=int, default=DEFAULT_PERMUTATIONS)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--debug", "-d", action="store_true")
    return parser


def run(parsed: argparse.Namespace):
    profile = load_profile_csv(parsed.profile, parsed.orientation)
    if parsed.items:
        profile = profile.select(load_item_list(parsed.items).labels)
    profile_d = pairwise_distances(profile, Axis.ITEMS, MetricKind.COSINE)

    config = ProviderConfig(
        endpoint_url=parsed.endpoint or ConfigManager.get("ODORMAP_ENDPOINT"),
        model_name=parsed.model or ConfigManager.get("ODORMAP_MODEL"),
        api_key_env=parsed.api_key_env or ConfigManager.get("ODORMAP_API_KEY_ENV"),
        max_parallel=parsed.max_parallel,
    )
    provider = OpenAIProvider(config)
    items = profile.items
    logger.info(f"harvesting {len(items)} items from {config.base_url} ({config.model_name})")
    llm_d = similarity_to_distance(harvest(items, provider, Path(parsed.cache)))

    result = mantel(llm_d, profile_d, parsed.permutations, "two-sided", parsed.seed)
    print(f"model       {config.model_name}")
    print(f"items       {result.n_items}")
    print(f"r           {result.r:.4f}   (reference {REFERENCE_R})")
    print(f"p           {result.p_value:.4g}   (reference {REFERENCE_P})")
    print(f"significance {result.stars}")


def main(args: Optional[List[str]] = None) -> int:
    from dotenv import load_dotenv

    setup_logging()
    load_dotenv()
    try:
        parsed = create_parser().parse_args(args)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 0
    if parsed.debug:
        logging.getLogger("odormap").setLevel(logging.DEBUG)
    try:
        run(parsed)
    except (OdorMapError, FileNotFoundError) as e:
        message = " ".join(str(e).split())
        print(f"odormap-repro: error: {type(e).__name__}: {message}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
