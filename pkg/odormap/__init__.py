import logging

log = logging.getLogger(__name__)

__version__ = "0.1.0"
__all__ = [
    "compute_distances",
    "harvest_similarities",
    "mantel_files",
    "embed",
    "cluster_file",
    "map_file",
    "dendro_file",
]

from odormap.high_level import (  # noqa: E402
    cluster_file,
    compute_distances,
    dendro_file,
    embed,
    harvest_similarities,
    mantel_files,
    map_file,
)
