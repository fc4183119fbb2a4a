"""Append-only JSON-lines cache of LLM similarity responses."""

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from threading import Lock
from typing import Iterator, Optional

logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_FAILED = "failed"
STATUS_UNPARSEABLE = "unparseable"


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class SimilarityRecord:
    item_a: str
    item_b: str
    model_name: str
    prompt_hash: str
    raw_response: str
    similarity: float
    timestamp: str

    def __post_init__(self):
        if not self.item_a < self.item_b:
            raise ValueError(
                f"record pair must be ordered: {self.item_a!r} < {self.item_b!r}"
            )
        if not 0.0 <= self.similarity <= 1.0:
            raise ValueError(f"similarity {self.similarity} outside [0, 1]")

    @property
    def key(self) -> tuple[str, str, str, str]:
        return (self.item_a, self.item_b, self.model_name, self.prompt_hash)


@dataclass(frozen=True)
class FailureRecord:
    """A pair that could not be scored; ``raw_response`` is empty for
    transport failures."""

    item_a: str
    item_b: str
    model_name: str
    prompt_hash: str
    status: str
    error: str
    raw_response: str
    timestamp: str

    @property
    def key(self) -> tuple[str, str, str, str]:
        return (self.item_a, self.item_b, self.model_name, self.prompt_hash)


class SimilarityCache:
    """Ok records answer lookups; failure lines are kept for inspection only,
    so a re-run retries them.

    Appends go through one lock so lines never interleave.
    """

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        self._lock = Lock()
        self._records: dict[tuple, SimilarityRecord] = {}
        self._failures: dict[tuple, FailureRecord] = {}
        if self.path.exists():
            self._load()
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def _load(self):
        with self.path.open("r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    data = json.loads(line)
                    status = data.pop("status", STATUS_OK)
                    if status == STATUS_OK:
                        record = SimilarityRecord(**data)
                        self._records[record.key] = record
                        self._failures.pop(record.key, None)
                    else:
                        failure = FailureRecord(status=status, **data)
                        if failure.key not in self._records:
                            self._failures[failure.key] = failure
                except (TypeError, ValueError) as e:
                    logger.warning(f"{self.path}:{lineno}: skipping bad cache line ({e})")
        logger.debug(
            f"cache {self.path}: {len(self._records)} records, "
            f"{len(self._failures)} failures"
        )

    def _append(self, payload: dict):
        line = json.dumps(payload, ensure_ascii=False, sort_keys=True)
        with self._lock:
            with self.path.open("a", encoding="utf-8") as f:
                f.write(line + "\n")
                f.flush()

    def get(self, item_a: str, item_b: str, model_name: str, hash_: str) -> Optional[SimilarityRecord]:
        return self._records.get((item_a, item_b, model_name, hash_))

    def set(self, record: SimilarityRecord):
        self._append({"status": STATUS_OK, **asdict(record)})
        with self._lock:
            self._records[record.key] = record
            self._failures.pop(record.key, None)

    def set_failure(self, failure: FailureRecord):
        self._append(asdict(failure))
        with self._lock:
            self._failures[failure.key] = failure

    def failures(self) -> Iterator[FailureRecord]:
        return iter(list(self._failures.values()))

    def __len__(self) -> int:
        return len(self._records)
