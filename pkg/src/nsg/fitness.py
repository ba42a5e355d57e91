"""Role fitness scoring: TF-IDF, TextRank, and their weighted combination.

A role's TF-IDF contrasts how often it appears in one pool against its
frequency across all pools; its TextRank score is the stationary weight of
the role in the pool's co-occurrence graph.  Both are min-max normalized
per pool and blended into the fitness Q used for selection.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .event_model import ArgumentRole, EventPattern, PatternPool, serialize_pattern

logger = logging.getLogger(__name__)

DEFAULT_DAMPING = 0.85
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 100
DEFAULT_ALPHA = 0.5
DEFAULT_BETA = 0.5


class MissingRoleError(KeyError):
    """The requested role does not occur in the current pool."""


@dataclass(frozen=True)
class RoleStats:
    """Role frequencies for one pool against the full population.

    ``pool_freq`` counts, per role, the patterns of this pool containing
    it; ``global_freq`` sums those counts over all pools.  The global side
    is frozen at generation 0 while pools evolve.
    """

    pool_freq: Mapping[ArgumentRole, int]
    global_freq: Mapping[ArgumentRole, int]
    n_pools: int

    def __post_init__(self) -> None:
        if self.n_pools < 1:
            raise ValueError("n_pools must be >= 1")


def pool_role_counts(pool: PatternPool) -> dict[ArgumentRole, int]:
    """Count, per role, how many patterns of the pool contain it."""
    counts: Counter[str] = Counter()
    for pattern in pool.patterns:
        counts.update(pattern.roles)
    return dict(counts)


def compute_role_stats(pools: Sequence[PatternPool]) -> dict[str, RoleStats]:
    """Per-pool RoleStats sharing one global frequency table.

    Returns a map keyed by fragment id.  The global table is the sum of
    per-pool frequencies, so global_freq[r] >= pool_freq[r] everywhere.
    """
    if not pools:
        raise ValueError("compute_role_stats requires at least one pool")
    per_pool: dict[str, dict[str, int]] = {}
    for pool in pools:
        if pool.fragment_id in per_pool:
            raise ValueError(f"duplicate pool for fragment {pool.fragment_id!r}")
        per_pool[pool.fragment_id] = pool_role_counts(pool)
    global_freq: Counter[str] = Counter()
    for counts in per_pool.values():
        global_freq.update(counts)
    shared = dict(global_freq)
    return {
        fragment_id: RoleStats(pool_freq=counts, global_freq=shared, n_pools=len(pools))
        for fragment_id, counts in per_pool.items()
    }


def tfidf_score(role: ArgumentRole, stats: RoleStats) -> float:
    """(1 + ln(pool_freq))^2 * ln(N / global_freq), natural log throughout.

    The score is negative whenever the role's global frequency exceeds the
    pool count N; downstream min-max normalization restores a nonnegative
    domain for selection.
    """
    if role not in stats.pool_freq:
        raise MissingRoleError(role)
    pool_freq = stats.pool_freq[role]
    # Roles born after generation 0 fall back to their local count so the
    # global >= local invariant survives pool evolution.
    global_freq = max(stats.global_freq.get(role, 0), pool_freq)
    return (1.0 + math.log(pool_freq)) ** 2 * math.log(stats.n_pools / global_freq)


@dataclass(frozen=True)
class RoleGraph:
    """Undirected co-occurrence graph; edge weights are symmetric counts."""

    nodes: tuple[str, ...]
    weights: Mapping[tuple[str, str], float]

    def __post_init__(self) -> None:
        for (u, v), w in self.weights.items():
            if u == v:
                raise ValueError(f"self-edge on {u!r}")
            if u > v:
                raise ValueError("edge keys must be (min, max) ordered")
            if w <= 0:
                raise ValueError(f"edge ({u!r}, {v!r}) has nonpositive weight")

    def weight(self, u: str, v: str) -> float:
        key = (u, v) if u <= v else (v, u)
        return self.weights.get(key, 0.0)


def build_role_graph(pool: PatternPool) -> RoleGraph:
    """Connect every pair of roles co-occurring in at least one pattern.

    The edge weight is the number of patterns containing both roles.
    Roles that never co-occur stay isolated.
    """
    weights: Counter[tuple[str, str]] = Counter()
    for pattern in pool.patterns:
        roles = pattern.roles
        for i in range(len(roles)):
            for j in range(i + 1, len(roles)):
                weights[(roles[i], roles[j])] += 1
    return RoleGraph(nodes=tuple(pool.roles()), weights=dict(weights))


def textrank_scores(
    graph: RoleGraph,
    d: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> dict[str, float]:
    """Power iteration of W(v) = (1-d) + d * sum_u w_uv / out(u) * W(u).

    Starts from all ones and stops when the largest per-node change drops
    below ``tol``.  Isolated nodes converge to exactly 1-d.  Non-convergence
    within ``max_iter`` returns the last iterate with a logged warning.
    """
    if not 0.0 < d < 1.0:
        raise ValueError("damping must lie in (0, 1)")
    nodes = graph.nodes
    n = len(nodes)
    if n == 0:
        return {}
    index = {node: i for i, node in enumerate(nodes)}
    adjacency = np.zeros((n, n))
    for (u, v), w in graph.weights.items():
        adjacency[index[u], index[v]] = w
        adjacency[index[v], index[u]] = w
    out_strength = adjacency.sum(axis=0)
    transition = adjacency / np.where(out_strength > 0, out_strength, 1.0)[None, :]
    scores = np.ones(n)
    converged = False
    for _ in range(max_iter):
        updated = (1.0 - d) + d * transition.dot(scores)
        delta = float(np.max(np.abs(updated - scores)))
        scores = updated
        if delta < tol:
            converged = True
            break
    if not converged:
        logger.warning("textrank did not converge within %d iterations", max_iter)
    return {node: float(scores[index[node]]) for node in nodes}


@dataclass(frozen=True)
class FitnessTable:
    """Per-role raw scores plus the normalized, blended fitness values."""

    tfidf: Mapping[ArgumentRole, float]
    textrank: Mapping[ArgumentRole, float]
    q_role: Mapping[ArgumentRole, float]
    q_pattern: Mapping[EventPattern, float] = field(repr=False)
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    damping: float = DEFAULT_DAMPING

    def pattern_score(self, pattern: EventPattern) -> float:
        """Mean q_role over the pattern's roles; roleless patterns score 0."""
        if not pattern.roles:
            return 0.0
        return math.fsum(self.q_role[role] for role in pattern.roles) / len(pattern.roles)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "damping": self.damping,
            "tfidf": dict(sorted(self.tfidf.items())),
            "textrank": dict(sorted(self.textrank.items())),
            "q_role": dict(sorted(self.q_role.items())),
            "q_pattern": {
                serialize_pattern(p): q
                for p, q in sorted(self.q_pattern.items(), key=lambda kv: serialize_pattern(kv[0]))
            },
        }


def _minmax_normalize(values: Mapping[str, float]) -> dict[str, float]:
    # A constant map carries no ranking signal; park everything at 0.5.
    lo = min(values.values())
    hi = max(values.values())
    if hi == lo:
        return {key: 0.5 for key in values}
    span = hi - lo
    return {key: (value - lo) / span for key, value in values.items()}


def combine_scores(
    tfidf: Mapping[ArgumentRole, float],
    textrank: Mapping[ArgumentRole, float],
    pool: PatternPool,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
    damping: float = DEFAULT_DAMPING,
) -> FitnessTable:
    """Blend raw score maps into Q values for one pool.

    Each map is min-max normalized over the pool's roles, then combined as
    alpha*F + beta*W with the weights rescaled to sum to one.  Pattern
    fitness is the mean of its roles' Q, so pattern length is not rewarded.
    """
    if alpha < 0 or beta < 0 or alpha + beta <= 0:
        raise ValueError("need alpha >= 0, beta >= 0, alpha + beta > 0")
    roles = pool.roles()
    missing = [r for r in roles if r not in tfidf or r not in textrank]
    if missing:
        raise MissingRoleError(missing[0])
    if not roles:
        q_role: dict[str, float] = {}
    else:
        f_hat = _minmax_normalize({r: tfidf[r] for r in roles})
        w_hat = _minmax_normalize({r: textrank[r] for r in roles})
        weight_f = alpha / (alpha + beta)
        weight_w = beta / (alpha + beta)
        q_role = {r: weight_f * f_hat[r] + weight_w * w_hat[r] for r in roles}
    table = FitnessTable(
        tfidf=dict(tfidf),
        textrank=dict(textrank),
        q_role=q_role,
        q_pattern={},
        alpha=alpha,
        beta=beta,
        damping=damping,
    )
    q_pattern = {pattern: table.pattern_score(pattern) for pattern in pool.patterns}
    return replace(table, q_pattern=q_pattern)


def combined_fitness(
    pool: PatternPool,
    stats: RoleStats,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
    d: float = DEFAULT_DAMPING,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> FitnessTable:
    """Score one pool: TF-IDF and TextRank per role, blended per pattern.

    Pool-local frequencies are recomputed from ``pool`` itself (the current
    population); ``stats`` contributes only the frozen global frequencies
    and pool count.
    """
    current = replace(stats, pool_freq=pool_role_counts(pool))
    tfidf = {role: tfidf_score(role, current) for role in pool.roles()}
    textrank = textrank_scores(build_role_graph(pool), d=d, tol=tol, max_iter=max_iter)
    return combine_scores(tfidf, textrank, pool, alpha=alpha, beta=beta, damping=d)
