"""Event patterns (the GA chromosomes) and per-fragment pattern pools.

A pattern is an event type plus a set of argument roles, serialized as a
single ``Type: ...; Arguments: ...`` line.  Role identity is exact string
equality after normalization, which the fitness formulas rely on.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

# Argument roles are normalized strings (lowercase, trimmed, collapsed
# whitespace); a dedicated wrapper type would buy nothing here.
ArgumentRole = str

_PATTERN_LINE = re.compile(
    r"^\s*type\s*:\s*(?P<type>[^;]*);\s*arguments\s*:\s*(?P<args>.*)$",
    re.IGNORECASE,
)


class EmptyPoolError(Exception):
    """No patterns remain after deduplication."""


def normalize_term(text: str) -> str:
    """Lowercase, trim, and collapse inner whitespace."""
    return " ".join(text.lower().split())


@dataclass(frozen=True)
class EventPattern:
    """One chromosome: an event type plus a set of argument roles.

    Roles are stored deduplicated in canonical (lexicographic) order.  The
    constructor normalizes both parts, so equality and hashing are stable
    regardless of the spelling used to build the pattern.  ``origin`` is a
    provenance tag and never takes part in comparison.
    """

    event_type: str
    roles: tuple[ArgumentRole, ...]
    origin: str = field(default="llm", compare=False)

    def __post_init__(self) -> None:
        event_type = normalize_term(self.event_type)
        if not event_type:
            raise ValueError("event_type must be nonempty")
        if ";" in event_type:
            raise ValueError("event_type must not contain ';'")
        roles = sorted({normalize_term(r) for r in self.roles if normalize_term(r)})
        for role in roles:
            if "," in role or ";" in role:
                raise ValueError(f"role {role!r} must not contain ',' or ';'")
        object.__setattr__(self, "event_type", event_type)
        object.__setattr__(self, "roles", tuple(roles))

    def key(self) -> tuple[str, frozenset[str]]:
        """Dedup identity: (event_type, role set), ignoring origin."""
        return (self.event_type, frozenset(self.roles))


@dataclass(frozen=True)
class PatternPool:
    """The GA population for one news fragment."""

    fragment_id: str
    patterns: tuple[EventPattern, ...]
    generation: int = 0

    def __post_init__(self) -> None:
        if not self.patterns:
            raise EmptyPoolError(f"pool for {self.fragment_id!r} is empty")
        if self.generation < 0:
            raise ValueError("generation must be nonnegative")

    def __len__(self) -> int:
        return len(self.patterns)

    def roles(self) -> list[ArgumentRole]:
        """All distinct roles in the pool, in canonical order."""
        seen: set[str] = set()
        for pattern in self.patterns:
            seen.update(pattern.roles)
        return sorted(seen)


def parse_pattern_text(raw: str) -> tuple[list[EventPattern], list[str]]:
    """Parse ``Type: ...; Arguments: ...`` lines into patterns.

    Never raises: unparseable lines and per-line anomalies are returned as
    diagnostics.  Duplicate roles within a line are deduplicated with a
    diagnostic.  Blank lines are ignored.
    """
    patterns: list[EventPattern] = []
    diagnostics: list[str] = []
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        match = _PATTERN_LINE.match(line)
        if not match:
            diagnostics.append(f"line {line_no}: not a 'Type: ...; Arguments: ...' line")
            continue
        event_type = normalize_term(match.group("type"))
        if not event_type:
            diagnostics.append(f"line {line_no}: empty event type")
            continue
        roles: list[str] = []
        for piece in match.group("args").split(","):
            role = normalize_term(piece)
            if not role:
                continue
            if role in roles:
                diagnostics.append(f"line {line_no}: duplicate role {role!r}")
            else:
                roles.append(role)
        patterns.append(EventPattern(event_type=event_type, roles=tuple(roles), origin="llm"))
    return patterns, diagnostics


def serialize_pattern(pattern: EventPattern) -> str:
    """Emit the canonical single-line form; round-trips through the parser."""
    if pattern.roles:
        return f"Type: {pattern.event_type}; Arguments: {', '.join(pattern.roles)}"
    return f"Type: {pattern.event_type}; Arguments:"


def build_pool(fragment_id: str, patterns: list[EventPattern]) -> PatternPool:
    """Build a generation-0 pool, collapsing exact duplicates.

    Duplicates are patterns with identical (event_type, role set); the first
    occurrence wins.  Raises EmptyPoolError when nothing remains.
    """
    unique: list[EventPattern] = []
    seen: set[tuple[str, frozenset[str]]] = set()
    for pattern in patterns:
        key = pattern.key()
        if key not in seen:
            seen.add(key)
            unique.append(pattern)
    if not unique:
        raise EmptyPoolError(f"no patterns for fragment {fragment_id!r}")
    return PatternPool(fragment_id=fragment_id, patterns=tuple(unique), generation=0)


def pool_to_dict(pool: PatternPool) -> dict:
    """JSON-ready pool representation (the on-disk checkpoint schema)."""
    return {
        "fragment_id": pool.fragment_id,
        "generation": pool.generation,
        "patterns": [
            {"type": p.event_type, "roles": list(p.roles)} for p in pool.patterns
        ],
    }


def pool_from_dict(data: dict) -> PatternPool:
    """Inverse of :func:`pool_to_dict`; loaded patterns are tagged llm."""
    patterns = tuple(
        EventPattern(event_type=entry["type"], roles=tuple(entry["roles"]), origin="llm")
        for entry in data["patterns"]
    )
    return PatternPool(
        fragment_id=data["fragment_id"],
        patterns=patterns,
        generation=int(data["generation"]),
    )
