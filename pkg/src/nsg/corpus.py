"""Corpus loading, tokenization, and sentence splitting.

Tokenization and sentence splitting are deliberately rule-based so that
every downstream score is reproducible bit for bit; no language model or
statistical segmenter is involved.
"""
from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass

# A token sequence is a plain list of lowercase, whitespace-free tokens.
TokenSequence = list[str]

_SENTENCE_BOUNDARY = re.compile(r"(?<=[.!?。！？])\s+")


class CorpusError(Exception):
    """Base class for corpus ingestion failures."""


class ParseError(CorpusError):
    """A record could not be parsed; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DuplicateIdError(CorpusError):
    """Two records in one file share a fragment id."""


@dataclass(frozen=True)
class NewsFragment:
    """One news item: the title is the reference summary for evaluation."""

    id: str
    title: str
    body: str
    category: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("fragment id must be nonempty")
        if not self.body.strip():
            raise ValueError(f"fragment {self.id!r}: body is empty")


@dataclass(frozen=True)
class Corpus:
    """An ordered, immutable collection of fragments with unique ids."""

    fragments: tuple[NewsFragment, ...]

    def __post_init__(self) -> None:
        if not self.fragments:
            raise ValueError("corpus must contain at least one fragment")
        index: dict[str, NewsFragment] = {}
        for frag in self.fragments:
            if frag.id in index:
                raise DuplicateIdError(f"duplicate fragment id {frag.id!r}")
            index[frag.id] = frag
        object.__setattr__(self, "_index", index)

    @property
    def n(self) -> int:
        return len(self.fragments)

    def __len__(self) -> int:
        return len(self.fragments)

    def __iter__(self):
        return iter(self.fragments)

    def get(self, fragment_id: str) -> NewsFragment | None:
        return self._index.get(fragment_id)


def load_corpus(path, *, pens_mapping: bool = False) -> Corpus:
    """Load a JSONL corpus, one object per line.

    Expected fields are ``{"id", "title", "body", "category"}`` with
    ``category`` optional.  With ``pens_mapping=True`` the PENS field names
    are accepted instead: ``headline`` maps to title and ``content`` to
    body.  Input order is preserved; duplicate ids are rejected.
    """
    title_key = "headline" if pens_mapping else "title"
    body_key = "content" if pens_mapping else "body"
    fragments: list[NewsFragment] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise ParseError(line_no, "record is not a JSON object")
            for key in ("id", title_key, body_key):
                if key not in record:
                    raise ParseError(line_no, f"missing field {key!r}")
                if not isinstance(record[key], str):
                    raise ParseError(line_no, f"field {key!r} is not a string")
            if not record["id"]:
                raise ParseError(line_no, "empty id")
            if not record[body_key].strip():
                raise ParseError(line_no, f"empty {body_key!r}")
            category = record.get("category")
            if category is not None and not isinstance(category, str):
                raise ParseError(line_no, "field 'category' is not a string")
            fragments.append(
                NewsFragment(
                    id=record["id"],
                    title=record[title_key],
                    body=record[body_key],
                    category=category,
                )
            )
    if not fragments:
        raise CorpusError(f"{path}: no fragments found")
    return Corpus(fragments=tuple(fragments))


def _strip_edge_punctuation(token: str) -> str:
    start = 0
    end = len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> TokenSequence:
    """Lowercase, split on whitespace, strip edge punctuation, drop empties.

    Idempotent: retokenizing the space-joined output yields the same
    sequence, because surviving tokens have non-punctuation edges.
    """
    tokens = []
    for raw in text.lower().split():
        token = _strip_edge_punctuation(raw)
        if token:
            tokens.append(token)
    return tokens


def split_sentences(text: str) -> list[str]:
    """Split on '.', '!', '?' (and fullwidth variants) followed by whitespace.

    The rule is knowingly naive: abbreviations such as "Dr." split too.
    Terminators not followed by whitespace (decimals, mid-token dots) do
    not split.  Sentences are trimmed and empties dropped.
    """
    sentences = []
    for part in _SENTENCE_BOUNDARY.split(text):
        part = part.strip()
        if part:
            sentences.append(part)
    return sentences
