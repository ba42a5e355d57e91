"""
Extracting event patterns from a fragment
=========================================

An event pattern is a type plus a set of argument roles, e.g.
"Type: flood; Arguments: city, river".  A completion client proposes
patterns for each fragment; here the offline mock client stands in for
a real model so the script runs without network access or keys.
"""
from importlib.resources import files

from nsg.corpus import load_corpus
from nsg.event_model import build_pool, serialize_pattern
from nsg.gateway import (
    MockCompletionClient,
    extract_patterns,
    generate_summary,
    generate_summary_direct,
)

corpus = load_corpus(files("nsg") / "data" / "mini_corpus.jsonl")
fragment = corpus.fragments[0]
client = MockCompletionClient(seed=7)

print(f"fragment {fragment.id}: {fragment.title}")
print()

# the client is asked for at most 8 patterns; duplicates are dropped and
# every survivor is tagged with the client's provenance
patterns = extract_patterns(client, fragment, per_fragment_target=8)
print(f"extracted {len(patterns)} patterns:")
for pattern in patterns:
    print(f"  {serialize_pattern(pattern)}  (origin={pattern.origin})")
print()

# patterns for one fragment live in a pool, the unit the evolution step
# later operates on
pool = build_pool(fragment.id, patterns)
print(f"pool for {pool.fragment_id}: {len(pool.patterns)} patterns, "
      f"{len(pool.roles())} distinct roles, generation {pool.generation}")
print()

# a pattern can guide summary generation; compare against the unguided ask
guided = generate_summary(client, fragment, patterns[0])
direct = generate_summary_direct(client, fragment)
print(f"guided  ({guided.system}): {guided.summary}")
print(f"direct  ({direct.system}): {direct.summary}")
