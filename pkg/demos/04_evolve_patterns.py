"""
Evolving a pattern pool
=======================

The genetic step breeds better patterns inside each fragment's pool:
fitness-proportional (roulette) parent selection, role-swap crossover,
then an elitist merge back into the population under a size cap.  The
whole process is driven by one seeded generator per fragment, so reruns
reproduce the same trajectory bit for bit.
"""
from nsg.event_model import EventPattern, build_pool
from nsg.evolution import EvolutionConfig, evolve
from nsg.fitness import compute_role_stats

pool = build_pool("demo-frag", [
    EventPattern("storm", ("flood", "coast", "rain")),
    EventPattern("storm", ("wind", "roof")),
    EventPattern("rescue", ("crew", "boat", "flood")),
    EventPattern("report", ("mayor",)),
    EventPattern("report", ("cost", "insurer", "roof")),
])
stats = compute_role_stats([pool])[pool.fragment_id]

config = EvolutionConfig(max_generations=12, seed=7)
result = evolve(pool, stats, config)

print(f"ran {result.generations_run} generations "
      f"(cap {config.population_cap}, parent fraction {config.parent_fraction})")
print()
print("gen   best_q    mean_q   size")
for gen, row in enumerate(result.history):
    print(f"{gen:3d}  {row.best_q:.6f}  {row.mean_q:.6f}  {row.size:4d}")
print()

# best_q is a running maximum, so the first column never decreases
best_series = [row.best_q for row in result.history]
assert best_series == sorted(best_series)

# scores are normalized within the current pool, so the winner's final
# fitness can sit below the historical maximum in the table above
print(f"best pattern: {result.best.event_type}{result.best.roles} "
      f"with fitness {result.best_fitness:.6f}")
print(f"final pool: {len(result.final_pool.patterns)} patterns at "
      f"generation {result.final_pool.generation}")

# identical seed, identical outcome
again = evolve(pool, stats, config)
print(f"rerun with the same seed matches: {again == result}")
