"""Run manifests written next to every command's outputs."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

from odormap.cache import utc_now
from odormap.core import OdorMapError, check_file

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = ".manifest.json"


def file_sha256(path: str | os.PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    input_hashes: dict[str, str] = field(default_factory=dict)
    config: dict[str, Any] = field(default_factory=dict)
    seeds: dict[str, int] = field(default_factory=dict)
    tool_version: str = ""
    outputs: list[str] = field(default_factory=list)
    timestamp: str = field(default_factory=utc_now)

    @classmethod
    def for_run(
        cls,
        command: str,
        argv: Sequence[str],
        inputs: Sequence[str | os.PathLike],
        config: dict[str, Any],
        seeds: dict[str, int],
        outputs: Sequence[str | os.PathLike],
    ) -> "RunManifest":
        from odormap import __version__

        return cls(
            command=command,
            argv=list(argv),
            input_hashes={str(p): file_sha256(p) for p in inputs if Path(p).is_file()},
            config={k: (str(v) if isinstance(v, os.PathLike) else v) for k, v in config.items()},
            seeds=dict(seeds),
            tool_version=__version__,
            outputs=[str(p) for p in outputs],
        )

    def path_for(self) -> Path:
        return manifest_path(self.outputs[0])

    def write(self, path: str | os.PathLike | None = None) -> Path:
        path = Path(path) if path is not None else self.path_for()
        with path.open("w", encoding="utf-8") as f:
            json.dump(asdict(self), f, indent=2, ensure_ascii=False, default=str)
            f.write("\n")
        logger.debug(f"wrote manifest {path}")
        return path

    @classmethod
    def read(cls, path: str | os.PathLike) -> "RunManifest":
        path = check_file(path)
        with path.open("r", encoding="utf-8") as f:
            try:
                return cls(**json.load(f))
            except (TypeError, json.JSONDecodeError) as e:
                raise OdorMapError(f"{path}: not a run manifest ({e})") from e


def manifest_path(output: str | os.PathLike) -> Path:
    output = Path(output)
    return output.with_name(output.name + MANIFEST_SUFFIX)
