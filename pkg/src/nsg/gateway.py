"""Boundary to the language model.

Everything model-shaped goes through a completion client with a single
``complete(prompt, params)`` method.  ``RemoteCompletionClient`` speaks a
JSON chat-completion dialect over HTTP; ``MockCompletionClient`` is a pure
function of (prompt, seed) so tests and offline runs are reproducible.
Prompt construction and reply parsing for the three prompt shapes
(pattern extraction, pattern-guided summary, direct summary) live here too.
"""
from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, replace
from typing import Mapping, Protocol, Sequence

import requests

from .corpus import NewsFragment, split_sentences, tokenize
from .event_model import EventPattern, parse_pattern_text, serialize_pattern
from .stopwords import STOPWORDS

logger = logging.getLogger(__name__)

SYSTEMS = ("nsg", "glm_direct", "tfidf_baseline", "textrank_baseline")
GENERATIVE_SYSTEMS = ("nsg", "glm_direct")

MAX_RETRIES = 5
MOCK_ROLE_LIMIT = 5


class GatewayError(Exception):
    """Base class for completion-boundary failures."""


class GatewayTimeout(GatewayError):
    """Every attempt timed out."""


class RemoteError(GatewayError):
    """The endpoint answered with an error or an unusable body."""

    def __init__(self, status: int, excerpt: str):
        super().__init__(f"HTTP {status}: {excerpt}" if status else excerpt)
        self.status = status
        self.excerpt = excerpt


class ExhaustedRetries(GatewayError):
    """Transient failures persisted through every allowed attempt."""


class NoValidPatterns(GatewayError):
    """Extraction produced no parseable pattern, even after one re-ask."""


@dataclass(frozen=True)
class GenerationParams:
    max_tokens: int = 256
    temperature: float = 0.0
    timeout: float = 30.0
    retries: int = 2

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if not 0 <= self.retries <= MAX_RETRIES:
            raise ValueError(f"retries must lie in 0..{MAX_RETRIES}")


DEFAULT_PARAMS = GenerationParams()


@dataclass(frozen=True)
class ContextExemplar:
    """One worked example shown to the model before the real request."""

    event_text: str
    pattern: EventPattern

    def __post_init__(self) -> None:
        if not self.event_text.strip():
            raise ValueError("exemplar text must be nonempty")


@dataclass(frozen=True)
class SummaryRecord:
    fragment_id: str
    system: str
    summary: str
    guiding_pattern: EventPattern | None = None

    def __post_init__(self) -> None:
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}")
        if not self.summary.strip():
            raise ValueError("summary must be nonempty")
        # Only pattern-guided generation carries its pattern.
        if (self.guiding_pattern is not None) != (self.system == "nsg"):
            raise ValueError("guiding_pattern is required for nsg and forbidden otherwise")

    def to_dict(self) -> dict:
        record = {
            "fragment_id": self.fragment_id,
            "system": self.system,
            "summary": self.summary,
        }
        if self.guiding_pattern is not None:
            record["guiding_pattern"] = {
                "type": self.guiding_pattern.event_type,
                "roles": list(self.guiding_pattern.roles),
            }
        return record


def summary_record_from_dict(data: Mapping) -> SummaryRecord:
    pattern = None
    if "guiding_pattern" in data:
        raw = data["guiding_pattern"]
        pattern = EventPattern(raw["type"], tuple(raw["roles"]))
    return SummaryRecord(
        fragment_id=data["fragment_id"],
        system=data["system"],
        summary=data["summary"],
        guiding_pattern=pattern,
    )


DEFAULT_EXEMPLARS = (
    ContextExemplar(
        "A car bomb planted by separatist militants exploded outside the market"
        " gate, killing two vendors and wounding several police officers.",
        EventPattern("bombing", ("perpetrator", "victim", "target", "tool"), origin="seed"),
    ),
    ContextExemplar(
        "Heavy monsoon rain flooded the riverside district on Tuesday, forcing"
        " hundreds of families to evacuate to higher ground.",
        EventPattern("flood", ("place", "time", "victim", "cause"), origin="seed"),
    ),
    ContextExemplar(
        "The city council approved the transit budget on Friday after months of"
        " negotiation with the governor's office.",
        EventPattern("approval", ("decision maker", "subject", "time"), origin="seed"),
    ),
)

_EXTRACT_HEAD = "Extract event patterns from the news text."
_GUIDED_HEAD = "Write a one-sentence news summary guided by the event pattern."
_DIRECT_HEAD = "Write a one-sentence news summary of the news text."
_DIGEST_HEAD = "Write a short digest of these event patterns."
_TEXT_MARKER = "News text:\n"


def build_extraction_prompt(
    fragment: NewsFragment,
    exemplars: Sequence[ContextExemplar],
    per_fragment_target: int,
) -> str:
    lines = [
        _EXTRACT_HEAD,
        f"List at most {per_fragment_target} patterns, one per line, each formatted as",
        '"Type: <event type>; Arguments: <role, role, ...>".',
        "",
    ]
    for exemplar in exemplars:
        lines.append(f"Text: {exemplar.event_text}")
        lines.append(f"Pattern: {serialize_pattern(exemplar.pattern)}")
        lines.append("")
    lines.append(_TEXT_MARKER + fragment.body)
    return "\n".join(lines)


def build_summary_prompt(fragment: NewsFragment, pattern: EventPattern) -> str:
    return "\n".join(
        [
            _GUIDED_HEAD,
            "Cover the event type and as many arguments as the text supports.",
            serialize_pattern(pattern),
            _TEXT_MARKER + fragment.body,
        ]
    )


def build_direct_prompt(fragment: NewsFragment) -> str:
    return "\n".join([_DIRECT_HEAD, _TEXT_MARKER + fragment.body])


def build_digest_prompt(patterns: Sequence[EventPattern]) -> str:
    return "\n".join([_DIGEST_HEAD] + [serialize_pattern(p) for p in patterns])


class CompletionClient(Protocol):
    provenance: str

    def complete(self, prompt: str, params: GenerationParams = DEFAULT_PARAMS) -> str: ...


def _after_marker(prompt: str) -> str:
    head, sep, tail = prompt.partition(_TEXT_MARKER)
    return tail if sep else ""


class MockCompletionClient:
    """Deterministic stand-in for the remote model.

    Replies are a pure function of the prompt text and the configured seed;
    the seed is reserved for future stochastic behaviors and currently the
    rules are rule-based only.  Dispatch keys off the fixed first line each
    prompt builder emits.
    """

    provenance = "mock"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def complete(self, prompt: str, params: GenerationParams = DEFAULT_PARAMS) -> str:
        if prompt.startswith(_EXTRACT_HEAD):
            return self._extract(_after_marker(prompt))
        if prompt.startswith(_GUIDED_HEAD):
            return self._guided_summary(prompt)
        if prompt.startswith(_DIRECT_HEAD):
            return self._direct_summary(_after_marker(prompt))
        if prompt.startswith(_DIGEST_HEAD):
            return self._digest(prompt)
        sentences = split_sentences(prompt)
        return sentences[0] if sentences else prompt

    def _extract(self, body: str) -> str:
        """One pattern per sentence: commonest content word becomes the type,
        the next distinct content words (in sentence order) the roles."""
        lines = []
        for sentence in split_sentences(body):
            content = [t for t in tokenize(sentence) if t not in STOPWORDS]
            if not content:
                continue
            frequency: dict[str, int] = {}
            for token in content:
                frequency[token] = frequency.get(token, 0) + 1
            event_type = min(frequency, key=lambda t: (-frequency[t], t))
            roles: list[str] = []
            for token in content:
                if token != event_type and token not in roles:
                    roles.append(token)
                if len(roles) == MOCK_ROLE_LIMIT:
                    break
            lines.append(f"Type: {event_type}; Arguments: {', '.join(roles)}")
        return "\n".join(lines)

    def _guided_summary(self, prompt: str) -> str:
        head = prompt.partition(_TEXT_MARKER)[0]
        patterns, _ = parse_pattern_text(head)
        if not patterns:
            return ""
        pattern = patterns[0]
        sentences = split_sentences(_after_marker(prompt))
        first = sentences[0] if sentences else ""
        return f"{pattern.event_type}: {', '.join(pattern.roles)} — {first}"

    def _direct_summary(self, body: str) -> str:
        sentences = split_sentences(body)
        return f"Summary: {sentences[0]}" if sentences else ""

    def _digest(self, prompt: str) -> str:
        patterns, _ = parse_pattern_text(prompt)
        types = list(dict.fromkeys(p.event_type for p in patterns))
        return "Digest: " + ", ".join(types)


def _redacted(headers: Mapping[str, str]) -> dict[str, str]:
    return {k: ("Bearer ***" if k.lower() == "authorization" else v) for k, v in headers.items()}


class RemoteCompletionClient:
    """HTTP chat-completion client with bounded retries.

    Transient failures (timeouts, connection errors, 5xx) are retried with
    exponential backoff up to params.retries extra attempts; 4xx and
    malformed bodies fail immediately.  A semaphore caps in-flight requests
    across threads.  The API key is never logged.
    """

    provenance = "llm"

    def __init__(
        self,
        endpoint: str,
        model: str,
        *,
        api_key: str | None = None,
        max_concurrency: int = 4,
        backoff_base: float = 0.5,
        sleep=time.sleep,
        session: requests.Session | None = None,
    ):
        if not endpoint:
            raise ValueError("endpoint must be nonempty")
        if not model:
            raise ValueError("model must be nonempty")
        if max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if backoff_base <= 0:
            raise ValueError("backoff_base must be positive")
        self.endpoint = endpoint
        self.model = model
        self._api_key = api_key
        self._semaphore = threading.Semaphore(max_concurrency)
        self._backoff_base = backoff_base
        self._sleep = sleep
        self._session = session or requests.Session()

    def complete(self, prompt: str, params: GenerationParams = DEFAULT_PARAMS) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        last_error: GatewayError | None = None
        for attempt in range(params.retries + 1):
            if attempt:
                self._sleep(self._backoff_base * 2 ** (attempt - 1))
            try:
                with self._semaphore:
                    logger.debug(
                        "POST %s headers=%s payload=%.500s",
                        self.endpoint,
                        _redacted(headers),
                        json.dumps(payload, ensure_ascii=False),
                    )
                    response = self._session.post(
                        self.endpoint, json=payload, headers=headers, timeout=params.timeout
                    )
            except requests.Timeout:
                last_error = GatewayTimeout(f"no reply within {params.timeout:g}s")
                continue
            except requests.RequestException as exc:
                last_error = RemoteError(0, str(exc)[:200])
                continue
            logger.debug("response status=%s body=%.500s", response.status_code, response.text)
            if response.status_code >= 500:
                last_error = RemoteError(response.status_code, response.text[:200])
                continue
            if response.status_code >= 400:
                raise RemoteError(response.status_code, response.text[:200])
            try:
                content = response.json()["choices"][0]["message"]["content"]
            except (ValueError, LookupError, TypeError) as exc:
                raise RemoteError(response.status_code, f"malformed completion body ({exc})")
            if not isinstance(content, str):
                raise RemoteError(response.status_code, "completion content is not a string")
            return content
        if isinstance(last_error, GatewayTimeout):
            raise last_error
        raise ExhaustedRetries(
            f"gave up after {params.retries + 1} attempts: {last_error}"
        ) from last_error


def extract_patterns(
    client: CompletionClient,
    fragment: NewsFragment,
    *,
    exemplars: Sequence[ContextExemplar] = DEFAULT_EXEMPLARS,
    per_fragment_target: int = 8,
    params: GenerationParams = DEFAULT_PARAMS,
) -> list[EventPattern]:
    """Ask for patterns, parse the reply, re-ask once if nothing parsed.

    Returns at most ``per_fragment_target`` distinct patterns tagged with
    the client's provenance; raises NoValidPatterns when both attempts
    yield nothing parseable.
    """
    if per_fragment_target < 1:
        raise ValueError("per_fragment_target must be >= 1")
    prompt = build_extraction_prompt(fragment, exemplars, per_fragment_target)
    patterns: list[EventPattern] = []
    for _ in range(2):
        reply = client.complete(prompt, params)
        patterns, diagnostics = parse_pattern_text(reply)
        for note in diagnostics:
            logger.debug("extraction reply for %s: %s", fragment.id, note)
        if patterns:
            break
    if not patterns:
        raise NoValidPatterns(f"no parseable patterns for fragment {fragment.id!r}")
    origin = getattr(client, "provenance", "llm")
    unique: list[EventPattern] = []
    seen = set()
    for pattern in patterns:
        if pattern.key() not in seen:
            seen.add(pattern.key())
            unique.append(replace(pattern, origin=origin))
        if len(unique) == per_fragment_target:
            break
    return unique


def _completion_text(client: CompletionClient, prompt: str, params: GenerationParams) -> str:
    text = " ".join(client.complete(prompt, params).split())
    if not text:
        raise GatewayError("model returned an empty completion")
    return text


def generate_summary(
    client: CompletionClient,
    fragment: NewsFragment,
    pattern: EventPattern,
    params: GenerationParams = DEFAULT_PARAMS,
) -> SummaryRecord:
    """Pattern-guided summary (the nsg system)."""
    text = _completion_text(client, build_summary_prompt(fragment, pattern), params)
    return SummaryRecord(fragment.id, "nsg", text, guiding_pattern=pattern)


def generate_summary_direct(
    client: CompletionClient,
    fragment: NewsFragment,
    params: GenerationParams = DEFAULT_PARAMS,
) -> SummaryRecord:
    """Unguided one-shot summary (the glm_direct system)."""
    text = _completion_text(client, build_direct_prompt(fragment), params)
    return SummaryRecord(fragment.id, "glm_direct", text)


def generate_digest(
    client: CompletionClient,
    patterns: Sequence[EventPattern],
    params: GenerationParams = DEFAULT_PARAMS,
) -> str:
    """Free-form digest over the best patterns of a whole run."""
    if not patterns:
        raise ValueError("digest requires at least one pattern")
    return _completion_text(client, build_digest_prompt(patterns), params)
