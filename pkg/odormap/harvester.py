"""
Pairwise similarity harvesting from OpenAI-compatible chat endpoints.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from string import Template
from threading import Lock
from typing import Optional
from urllib.parse import urlparse

import numpy as np
import openai
import tqdm
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt
from tenacity import wait_exponential

from odormap.cache import (
    STATUS_FAILED,
    STATUS_UNPARSEABLE,
    FailureRecord,
    SimilarityCache,
    SimilarityRecord,
    prompt_hash,
    utc_now,
)
from odormap.core import (
    DistanceMatrix,
    InvariantError,
    ItemSet,
    OdorMapError,
    iter_pairs,
    pair_count,
    read_square_csv,
    symmetrize,
    write_square_csv,
)

logger = logging.getLogger(__name__)

DEFAULT_TEMPLATE = Template(
    "On a scale from 0 to 1, where 0 means completely different and 1 means "
    'identical, how similar is the smell of "$item_a" to the smell of "$item_b"? '
    "Respond with only a single decimal number between 0 and 1."
)

# the upper bound of the clamp window around [0, 1]
PARSE_SLACK = 1e-9


class TemplateError(OdorMapError):
    pass


class SimilarityParseError(OdorMapError):
    pass


class ProviderError(OdorMapError):
    pass


class IncompleteHarvestError(OdorMapError):
    def __init__(self, report: "HarvestReport"):
        self.report = report
        pairs = ", ".join(f"{f.item_a}|{f.item_b}" for f in report.failures[:5])
        more = "" if len(report.failures) <= 5 else f" (+{len(report.failures) - 5} more)"
        super().__init__(
            f"{len(report.failures)} of {report.total_pairs} pairs missing: {pairs}{more}"
        )


@dataclass(frozen=True)
class ProviderConfig:
    endpoint_url: str
    model_name: str
    api_key_env: str = "ODORMAP_API_KEY"
    temperature: float = 0.0
    max_parallel: int = 4
    timeout: float = 60.0
    max_retries: int = 5

    def __post_init__(self):
        parsed = urlparse(self.endpoint_url)
        if not (parsed.scheme and parsed.netloc):
            raise OdorMapError(f"endpoint must be an absolute URL: {self.endpoint_url!r}")
        if self.max_parallel < 1:
            raise OdorMapError("max_parallel must be >= 1")
        if self.temperature < 0:
            raise OdorMapError("temperature must be >= 0")
        if self.max_retries < 0:
            raise OdorMapError("max_retries must be >= 0")

    @property
    def base_url(self) -> str:
        url = self.endpoint_url.rstrip("/")
        suffix = "/chat/completions"
        return url[: -len(suffix)] if url.endswith(suffix) else url


def as_template(template: Template | str | None) -> Template:
    if template is None:
        return DEFAULT_TEMPLATE
    if isinstance(template, Template):
        return template
    return Template(template)


def check_template(template: Template):
    counts = {"item_a": 0, "item_b": 0}
    for match in template.pattern.finditer(template.template):
        if match.group("invalid") is not None:
            raise TemplateError(
                f"stray $ at offset {match.start()} in prompt template (use $$ for a literal $)"
            )
        name = match.group("named") or match.group("braced")
        if name in counts:
            counts[name] += 1
        elif name is not None:
            raise TemplateError(f"unknown placeholder ${name} in prompt template")
    for name, count in counts.items():
        if count != 1:
            raise TemplateError(
                f"prompt template must contain ${name} exactly once, found {count}"
            )


def render_prompt(item_a: str, item_b: str, template: Template | str | None = None) -> str:
    template = as_template(template)
    check_template(template)
    return template.substitute(item_a=item_a, item_b=item_b)


_NUMBER = re.compile(r"(?<![\w.\-])-?(?:\d+(?:\.\d+)?|\.\d+)(?!\w)")


@dataclass(frozen=True)
class ParsedScore:
    value: float
    ambiguous: bool = False


def parse_score(raw_response: str) -> ParsedScore:
    tokens = _NUMBER.findall(raw_response or "")
    if not tokens:
        raise SimilarityParseError(f"no numeric token in response {raw_response!r}")
    values = [float(t) for t in tokens]
    ambiguous = len(set(values)) > 1
    value = values[0]
    if value < -PARSE_SLACK or value > 100.0:
        raise SimilarityParseError(f"score {tokens[0]} outside [0, 100]")
    if value > 1.0 + PARSE_SLACK:
        fractions = [v for t, v in zip(tokens, values) if "." in t and 0.0 <= v <= 1.0]
        if fractions:
            # "7 out of 10 ... 0.7" style answers: the explicit fraction wins
            value = fractions[0]
            ambiguous = True
        else:
            value = value / 100.0
    return ParsedScore(min(max(value, 0.0), 1.0), ambiguous)


def parse_similarity(raw_response: str) -> float:
    parsed = parse_score(raw_response)
    if parsed.ambiguous:
        logger.warning(f"ambiguous response {raw_response!r}, using {parsed.value}")
    return parsed.value


class BaseProvider:
    """A source of raw similarity answers for one model."""

    name = "base"

    def __init__(self, model_name: str, max_parallel: int = 1):
        if max_parallel < 1:
            raise OdorMapError("max_parallel must be >= 1")
        self.model_name = model_name
        self.max_parallel = max_parallel
        self.calls = 0
        self._calls_lock = Lock()

    def request(self, item_a: str, item_b: str, prompt: str) -> str:
        with self._calls_lock:
            self.calls += 1
        return self.do_request(item_a, item_b, prompt)

    def do_request(self, item_a: str, item_b: str, prompt: str) -> str:
        raise NotImplementedError

    def __str__(self):
        return f"{self.name} {self.model_name}"


class OpenAIProvider(BaseProvider):
    """Chat-completions client for hosted OpenAI-style APIs and local servers
    exposing the same schema."""

    name = "openai"
    retryable = (
        openai.RateLimitError,
        openai.APITimeoutError,
        openai.APIConnectionError,
        openai.InternalServerError,
    )

    def __init__(self, config: ProviderConfig):
        super().__init__(config.model_name, config.max_parallel)
        self.config = config
        api_key = os.environ.get(config.api_key_env) if config.api_key_env else None
        self.client = openai.OpenAI(
            base_url=config.base_url,
            # local servers accept any key
            api_key=api_key or "EMPTY",
            timeout=config.timeout,
            max_retries=0,
        )
        self.options = {"temperature": config.temperature}
        self.think_filter_regex = re.compile(
            r"^<think>.+?\n*(</think>|\n)*(</think>)\n*", flags=re.DOTALL
        )

    def _retrying(self) -> Retrying:
        return Retrying(
            retry=retry_if_exception_type(self.retryable),
            stop=stop_after_attempt(self.config.max_retries + 1),
            wait=wait_exponential(multiplier=1, min=1, max=15),
            reraise=True,
            before_sleep=lambda retry_state: logger.warning(
                f"API error, retrying in {retry_state.next_action.sleep} seconds... "
                f"(Attempt {retry_state.attempt_number}/{self.config.max_retries + 1})"
            ),
        )

    def do_request(self, item_a: str, item_b: str, prompt: str) -> str:
        try:
            for attempt in self._retrying():
                with attempt:
                    response = self.client.chat.completions.create(
                        model=self.model_name,
                        messages=[{"role": "user", "content": prompt}],
                        **self.options,
                    )
        except openai.OpenAIError as e:
            raise ProviderError(f"{type(e).__name__}: {e}") from e
        if not response.choices:
            raise ProviderError("empty response from service")
        content = response.choices[0].message.content or ""
        return self.think_filter_regex.sub("", content.strip()).strip()


def _bigrams(label: str) -> list[str]:
    padded = f" {label.lower()} "
    return [padded[i : i + 2] for i in range(len(padded) - 1)]


def _dice(a: str, b: str) -> float:
    ga, gb = _bigrams(a), _bigrams(b)
    remaining = list(gb)
    overlap = 0
    for g in ga:
        if g in remaining:
            remaining.remove(g)
            overlap += 1
    return 2.0 * overlap / (len(ga) + len(gb))


class MockProvider(BaseProvider):
    """Offline provider: bigram overlap of the labels mixed with seeded jitter.

    Symmetric and deterministic; identical labels score 1.
    """

    name = "mock"

    def __init__(self, seed: int = 42, max_parallel: int = 4):
        super().__init__(f"mock-{seed}", max_parallel)
        self.seed = seed

    def jitter(self, item_a: str, item_b: str) -> float:
        a, b = sorted((item_a, item_b))
        digest = hashlib.blake2b(
            f"{self.seed}\x1f{a}\x1f{b}".encode("utf-8"), digest_size=8
        ).digest()
        return int.from_bytes(digest, "big") / 2.0**64

    def similarity(self, item_a: str, item_b: str) -> float:
        if item_a == item_b:
            return 1.0
        return 0.7 * _dice(item_a, item_b) + 0.3 * self.jitter(item_a, item_b)

    def do_request(self, item_a: str, item_b: str, prompt: str) -> str:
        return f"{self.similarity(item_a, item_b):.6f}"


def mock_provider(seed: int = 42) -> MockProvider:
    return MockProvider(seed)


@dataclass(frozen=True)
class SimilarityMatrix:
    items: ItemSet
    values: np.ndarray
    model_name: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        n = len(self.items)
        if values.shape != (n, n):
            raise InvariantError(f"similarity shape {values.shape} does not match {n} items")
        if not np.all(np.isfinite(values)):
            raise InvariantError("similarity matrix contains non-finite entries")
        if not np.array_equal(values, values.T):
            raise InvariantError("similarity matrix is not symmetric")
        if np.any(np.diag(values) != 1.0):
            raise InvariantError("similarity diagonal must be 1")
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise InvariantError("similarities must lie in [0, 1]")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


@dataclass
class HarvestReport:
    items: ItemSet
    model_name: str
    requested: int = 0
    cached: int = 0
    failures: list[FailureRecord] = field(default_factory=list)
    matrix: Optional[SimilarityMatrix] = None

    @property
    def total_pairs(self) -> int:
        return pair_count(len(self.items))

    @property
    def complete(self) -> bool:
        return self.matrix is not None


def _canonical(label_i: str, label_j: str) -> tuple[str, str]:
    return (label_i, label_j) if label_i < label_j else (label_j, label_i)


def run_harvest(
    items: ItemSet,
    provider: BaseProvider,
    cache: SimilarityCache | str | os.PathLike,
    template: Template | str | None = None,
    progress: bool = False,
) -> HarvestReport:
    """Query every uncached unordered pair once and assemble the matrix when
    no pair is missing."""
    if len(items) < 2:
        raise OdorMapError(f"harvest needs at least 2 items, got {len(items)}")
    template = as_template(template)
    check_template(template)
    if not isinstance(cache, SimilarityCache):
        cache = SimilarityCache(cache)
    model = provider.model_name
    report = HarvestReport(items, model)

    keyed = {}
    pending = []
    for pair in iter_pairs(len(items)):
        a, b = _canonical(items[pair.i], items[pair.j])
        prompt = render_prompt(a, b, template)
        key = (a, b, model, prompt_hash(prompt))
        keyed[(pair.i, pair.j)] = key
        if cache.get(*key) is None:
            pending.append((a, b, prompt, key[3]))
    report.cached = len(keyed) - len(pending)
    report.requested = len(pending)
    logger.info(
        f"harvest {model}: {len(keyed)} pairs, {report.cached} cached, "
        f"{report.requested} to request"
    )

    failures_lock = Lock()

    def worker(job):
        a, b, prompt, hash_ = job
        raw = ""
        try:
            raw = provider.request(a, b, prompt)
            value = parse_similarity(raw)
        except (ProviderError, SimilarityParseError) as e:
            status = STATUS_FAILED if isinstance(e, ProviderError) else STATUS_UNPARSEABLE
            failure = FailureRecord(a, b, model, hash_, status, str(e), raw, utc_now())
            cache.set_failure(failure)
            with failures_lock:
                report.failures.append(failure)
            logger.warning(f"pair {a!r} / {b!r} {status}: {e}")
            return
        cache.set(SimilarityRecord(a, b, model, hash_, raw, value, utc_now()))

    if pending:
        with concurrent.futures.ThreadPoolExecutor(
            max_workers=provider.max_parallel
        ) as executor:
            for _ in tqdm.tqdm(
                executor.map(worker, pending), total=len(pending), disable=not progress
            ):
                pass

    report.failures.sort(key=lambda f: (f.item_a, f.item_b))
    if report.failures:
        return report

    n = len(items)
    values = np.eye(n)
    for (i, j), key in keyed.items():
        s = cache.get(*key).similarity
        values[i, j] = s
        values[j, i] = s
    report.matrix = SimilarityMatrix(items, values, model)
    return report


def harvest(
    items: ItemSet,
    provider: BaseProvider,
    cache: SimilarityCache | str | os.PathLike,
    template: Template | str | None = None,
) -> SimilarityMatrix:
    report = run_harvest(items, provider, cache, template)
    if not report.complete:
        raise IncompleteHarvestError(report)
    return report.matrix


def similarity_to_distance(s: SimilarityMatrix) -> DistanceMatrix:
    """d = 1 - s, tagged with the model name."""
    values = 1.0 - s.values
    np.fill_diagonal(values, 0.0)
    return DistanceMatrix(s.items, values, s.model_name)


def save_similarity_csv(s: SimilarityMatrix, path: str | os.PathLike):
    write_square_csv(s.items, s.values, path)


def load_similarity_csv(path: str | os.PathLike, model_name: str | None = None) -> SimilarityMatrix:
    """The model name defaults to the file stem."""
    items, values = read_square_csv(path)
    values = symmetrize(values, path)
    np.fill_diagonal(values, 1.0)
    if model_name is None:
        model_name = Path(path).stem
    return SimilarityMatrix(items, values, model_name)
