"""Genetic refinement of pattern pools.

Each generation: roulette-wheel parent selection over pattern fitness,
pairwise role crossover, then an elitist merge of parents+offspring with
the previous population truncated back to the population cap.  There is no
mutation step, so the role universe of a pool can only shrink or recombine.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .event_model import EventPattern, PatternPool, pool_from_dict, pool_to_dict, serialize_pattern
from .fitness import (
    DEFAULT_ALPHA,
    DEFAULT_BETA,
    DEFAULT_DAMPING,
    FitnessTable,
    RoleStats,
    combined_fitness,
)

DEFAULT_GENERATIONS = 50
DEFAULT_PARENT_FRACTION = 0.5
DEFAULT_POPULATION_CAP = 32


@dataclass(frozen=True)
class EvolutionConfig:
    max_generations: int = DEFAULT_GENERATIONS
    parent_fraction: float = DEFAULT_PARENT_FRACTION
    population_cap: int = DEFAULT_POPULATION_CAP
    seed: int = 0
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    damping: float = DEFAULT_DAMPING

    def __post_init__(self) -> None:
        if self.max_generations < 0:
            raise ValueError("max_generations must be >= 0")
        if not 0.0 < self.parent_fraction <= 1.0:
            raise ValueError("parent_fraction must lie in (0, 1]")
        if self.population_cap < 2:
            raise ValueError("population_cap must be >= 2")
        # With fewer than two parents crossover cannot pair anyone.
        if self.parent_fraction * self.population_cap < 2:
            raise ValueError("parent_fraction * population_cap must be >= 2")
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ValueError("need alpha >= 0, beta >= 0, alpha + beta > 0")
        if not 0.0 < self.damping < 1.0:
            raise ValueError("damping must lie in (0, 1)")


@dataclass(frozen=True)
class GenerationStats:
    """One history row: best fitness reached so far, current mean, pool size."""

    best_q: float
    mean_q: float
    size: int


@dataclass(frozen=True)
class EvolutionResult:
    best: EventPattern
    best_fitness: float
    history: tuple[GenerationStats, ...]
    generations_run: int
    final_pool: PatternPool


def pool_rng(seed: int, fragment_id: str) -> np.random.Generator:
    """Independent PCG64 stream per (run seed, fragment).

    The fragment id is folded in through SHA-256 so streams stay decoupled
    regardless of id shape, and fragment order never affects the draws.
    """
    digest = hashlib.sha256(fragment_id.encode("utf-8")).digest()
    entropy = np.random.SeedSequence([seed % 2**64, int.from_bytes(digest, "big")])
    return np.random.Generator(np.random.PCG64(entropy))


def rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def restore_rng(state: Mapping) -> np.random.Generator:
    bit_generator = np.random.PCG64()
    bit_generator.state = dict(state)
    return np.random.Generator(bit_generator)


def _rand_index(rng: np.random.Generator, n: int) -> int:
    # Derive indices from uniform doubles only: that keeps the draw sequence
    # a pure function of the PCG64 bit stream, independent of numpy's
    # integer-sampling internals.
    return min(int(rng.random() * n), n - 1)


def _sample_indices(rng: np.random.Generator, n: int, k: int) -> list[int]:
    """k distinct indices from range(n) via partial Fisher-Yates."""
    indices = list(range(n))
    for i in range(k):
        j = i + _rand_index(rng, n - i)
        indices[i], indices[j] = indices[j], indices[i]
    return indices[:k]


def roulette_select(
    scored: Sequence[tuple[EventPattern, float]],
    count: int,
    rng: np.random.Generator,
) -> list[EventPattern]:
    """Draw ``count`` patterns with replacement, proportionally to fitness.

    All-zero fitness degenerates to a uniform draw.  Negative fitness is
    rejected: Q values are normalized upstream.
    """
    if not scored:
        raise ValueError("cannot select from an empty population")
    if count < 0:
        raise ValueError("count must be >= 0")
    weights = [q for _, q in scored]
    if any(q < 0 for q in weights):
        raise ValueError("fitness values must be >= 0")
    total = math.fsum(weights)
    if total <= 0.0:
        return [scored[_rand_index(rng, len(scored))][0] for _ in range(count)]
    cumulative = np.cumsum(weights)
    picks = []
    for _ in range(count):
        point = rng.random() * cumulative[-1]
        index = int(np.searchsorted(cumulative, point, side="right"))
        picks.append(scored[min(index, len(scored) - 1)][0])
    return picks


def crossover(
    a: EventPattern,
    b: EventPattern,
    rng: np.random.Generator,
) -> tuple[EventPattern, EventPattern]:
    """Swap k random roles between two patterns, k uniform in 1..min(|a|,|b|).

    Each offspring keeps its parent's event type; role sets are treated as
    sets, so the union of roles across the pair is conserved.  If either
    parent is roleless, or the parents carry identical role sets, the pair
    is returned unchanged (a swap could not produce anything new).
    """
    m = min(len(a.roles), len(b.roles))
    if m == 0 or set(a.roles) == set(b.roles):
        return a, b
    k = 1 + _rand_index(rng, m)
    from_a = {a.roles[i] for i in _sample_indices(rng, len(a.roles), k)}
    from_b = {b.roles[i] for i in _sample_indices(rng, len(b.roles), k)}
    roles_a = (set(a.roles) - from_a) | from_b
    roles_b = (set(b.roles) - from_b) | from_a
    return (
        EventPattern(a.event_type, tuple(roles_a), origin="crossover"),
        EventPattern(b.event_type, tuple(roles_b), origin="crossover"),
    )


def _truncate(
    candidates: Sequence[EventPattern],
    table: FitnessTable,
    cap: int,
) -> tuple[EventPattern, ...]:
    """Deduplicate (first occurrence wins) and keep the ``cap`` fittest.

    Ties break on the serialized pattern text so ranking never depends on
    arrival order of equal-fitness patterns.
    """
    seen = set()
    unique: list[EventPattern] = []
    for pattern in candidates:
        key = pattern.key()
        if key not in seen:
            seen.add(key)
            unique.append(pattern)
    unique.sort(key=lambda p: (-table.pattern_score(p), serialize_pattern(p)))
    return tuple(unique[:cap])


def _step(
    pool: PatternPool,
    table: FitnessTable,
    config: EvolutionConfig,
    rng: np.random.Generator,
) -> PatternPool:
    scored = [(pattern, table.q_pattern[pattern]) for pattern in pool.patterns]
    n_parents = math.ceil(config.parent_fraction * len(scored))
    parents = roulette_select(scored, n_parents, rng)
    offspring: list[EventPattern] = []
    for i in range(0, len(parents) - 1, 2):
        offspring.extend(crossover(parents[i], parents[i + 1], rng))
    if len(parents) % 2:
        # An unpaired parent passes through; patterns are immutable values.
        offspring.append(parents[-1])
    merged = list(pool.patterns) + offspring
    kept = _truncate(merged, table, config.population_cap)
    return PatternPool(pool.fragment_id, kept, generation=pool.generation + 1)


def evolve_generation(
    pool: PatternPool,
    stats: RoleStats,
    config: EvolutionConfig,
    rng: np.random.Generator,
) -> PatternPool:
    """Advance one pool by a single generation."""
    table = combined_fitness(
        pool, stats, alpha=config.alpha, beta=config.beta, d=config.damping
    )
    return _step(pool, table, config, rng)


CheckpointSink = Callable[[dict], None]


def _checkpoint_payload(
    pool: PatternPool,
    table: FitnessTable,
    rng: np.random.Generator,
    history: Sequence[GenerationStats],
) -> dict:
    payload = pool_to_dict(pool)
    payload["fitness"] = table.to_dict()
    payload["rng_state"] = rng_state(rng)
    payload["history"] = [[row.best_q, row.mean_q, row.size] for row in history]
    return payload


def _run_loop(
    pool: PatternPool,
    stats: RoleStats,
    config: EvolutionConfig,
    rng: np.random.Generator,
    history: list[GenerationStats],
    checkpoint_every: int,
    checkpoint_sink: CheckpointSink | None,
) -> EvolutionResult:
    current = pool
    while True:
        table = combined_fitness(
            current, stats, alpha=config.alpha, beta=config.beta, d=config.damping
        )
        if len(history) == current.generation:
            scores = [table.q_pattern[p] for p in current.patterns]
            previous_best = history[-1].best_q if history else -math.inf
            history.append(
                GenerationStats(
                    best_q=max(previous_best, max(scores)),
                    mean_q=math.fsum(scores) / len(scores),
                    size=len(current),
                )
            )
        if (
            checkpoint_sink is not None
            and checkpoint_every > 0
            and current.generation % checkpoint_every == 0
        ):
            checkpoint_sink(_checkpoint_payload(current, table, rng, history))
        if current.generation >= config.max_generations or len(current) == 1:
            break
        current = _step(current, table, config, rng)
    ranked = sorted(
        current.patterns,
        key=lambda p: (-table.q_pattern[p], serialize_pattern(p)),
    )
    best = ranked[0]
    return EvolutionResult(
        best=best,
        best_fitness=table.q_pattern[best],
        history=tuple(history),
        generations_run=current.generation,
        final_pool=current,
    )


def evolve(
    pool: PatternPool,
    stats: RoleStats,
    config: EvolutionConfig,
    *,
    checkpoint_every: int = 0,
    checkpoint_sink: CheckpointSink | None = None,
) -> EvolutionResult:
    """Run up to max_generations steps from a generation-0 pool.

    Stops early only when the pool collapses to a single unique pattern.
    The history holds one row per visited generation (length
    generations_run + 1); its best column is a running maximum, so it is
    monotone even though per-generation normalization can lower raw Q.
    """
    if pool.generation != 0:
        raise ValueError("evolve starts from a generation-0 pool; use resume_evolution")
    rng = pool_rng(config.seed, pool.fragment_id)
    return _run_loop(pool, stats, config, rng, [], checkpoint_every, checkpoint_sink)


def resume_evolution(
    checkpoint: Mapping,
    stats: RoleStats,
    config: EvolutionConfig,
    *,
    checkpoint_every: int = 0,
    checkpoint_sink: CheckpointSink | None = None,
) -> EvolutionResult:
    """Continue from a checkpoint payload exactly as the original run would.

    The checkpoint carries the pool, the RNG bit-generator state captured
    at that generation, and the history rows recorded so far.
    """
    pool = pool_from_dict(checkpoint)
    rng = restore_rng(checkpoint["rng_state"])
    history = [
        GenerationStats(best_q=row[0], mean_q=row[1], size=int(row[2]))
        for row in checkpoint["history"]
    ]
    if len(history) != pool.generation + 1:
        raise ValueError("checkpoint history does not match its generation")
    return _run_loop(pool, stats, config, rng, history, checkpoint_every, checkpoint_sink)
