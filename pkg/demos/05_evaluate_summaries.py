"""
Scoring summaries
=================

Candidate summaries are scored against the fragment title (the reference)
with ROUGE-1/2/L and BLEU-1..4, plus an Overlap percentage that asks how
many candidate bigrams appear verbatim in the source text.  Extractive
methods copy sentences, so their Overlap sits at 100 by construction.
"""
from nsg.corpus import Corpus, NewsFragment, tokenize
from nsg.event_model import EventPattern
from nsg.gateway import SummaryRecord
from nsg.metrics import bleu, evaluate, overlap_pct, rouge_l, rouge_n

# the primitive metrics work on token lists
candidate = tokenize("storm floods coastal town")
reference = tokenize("storm floods small coastal town")
print("candidate:", candidate)
print("reference:", reference)
print(f"  ROUGE-1 f1 {rouge_n(candidate, reference, 1).f1:.4f}")
print(f"  ROUGE-2 f1 {rouge_n(candidate, reference, 2).f1:.4f}")
print(f"  ROUGE-L f1 {rouge_l(candidate, reference).f1:.4f}")
print(f"  BLEU-1..4  {[round(b, 4) for b in bleu(candidate, reference)]}")
print(f"  Overlap vs reference {overlap_pct(candidate, reference):.1f}%")
print()

# evaluate() aggregates whole runs: records carry (fragment, system, text)
corpus = Corpus((
    NewsFragment("n1", "storm floods coastal town",
                 "A storm floods the small coastal town. Crews rescued residents."),
    NewsFragment("n2", "council approves budget",
                 "The council approves the budget. Critics remain unconvinced."),
))
# nsg records remember the pattern that guided them
records = [
    SummaryRecord("n1", "glm_direct", "A storm floods the small coastal town."),
    SummaryRecord("n2", "glm_direct", "The council approves the budget."),
    SummaryRecord("n1", "nsg", "storm: town, crews",
                  guiding_pattern=EventPattern("storm", ("town", "crews"))),
    SummaryRecord("n2", "nsg", "approval: council, budget",
                  guiding_pattern=EventPattern("approval", ("council", "budget"))),
]
report = evaluate(records, corpus)

print(f"scored {len(report.breakdown)} records across {len(report.systems)} systems")
for name, scores in sorted(report.systems.items()):
    print(f"  {name:12s} R-1 {scores.rouge1:.3f}  R-L {scores.rougeL:.3f}  "
          f"B-1 {scores.bleu[0]:.3f}  Overlap {scores.overlap:.1f}")
print()

# per-record rows are available too, sorted by (system, fragment)
row = report.breakdown[0]
print(f"first row: system={row.system} fragment={row.fragment_id} "
      f"R-1 f1 {row.rouge1.f1:.3f}")
