"""
Scoring roles and patterns
==========================

Pattern fitness blends two per-role signals: a TF-IDF weight (is the role
frequent in this pool but rare across pools?) and a TextRank centrality
(does the role co-occur with many other well-connected roles?).  Both are
min-max normalized and averaged; a pattern scores the mean of its roles.
"""
from nsg.event_model import EventPattern, build_pool
from nsg.fitness import (
    build_role_graph,
    combined_fitness,
    compute_role_stats,
    textrank_scores,
    tfidf_score,
)

# two fragments' pools; "flood" appears in both, so its IDF term vanishes
# in the global picture while "rain" and "wind" stay pool-specific
pool_a = build_pool("storm-piece", [
    EventPattern("storm", ("flood", "rain")),
    EventPattern("storm", ("flood", "wind")),
    EventPattern("report", ("rain",)),
])
pool_b = build_pool("quake-piece", [
    EventPattern("storm", ("flood",)),
    EventPattern("quake", ("damage",)),
])

stats = compute_role_stats([pool_a, pool_b])["storm-piece"]
print("TF-IDF per role in the storm pool:")
for role in sorted(pool_a.roles()):
    print(f"  {role:6s} {tfidf_score(role, stats): .6f}")
print()

# the role graph connects roles that share a pattern; edge weight counts
# how many patterns they share
graph = build_role_graph(pool_a)
print(f"role graph: {len(graph.nodes)} nodes, {len(graph.weights)} edges")
ranks = textrank_scores(graph)
print("TextRank per role:")
for role in sorted(ranks):
    print(f"  {role:6s} {ranks[role]:.6f}")
print()

table = combined_fitness(pool_a, stats)
print("blended quality per role (alpha=beta=0.5):")
for role in sorted(table.q_role):
    print(f"  {role:6s} {table.q_role[role]:.6f}")
print()

print("pattern scores (mean over the pattern's roles):")
for pattern in pool_a.patterns:
    print(f"  {pattern.event_type}{pattern.roles}  ->  {table.pattern_score(pattern):.6f}")
