"""News summary generation by evolving event-pattern populations.

The package is organized around the pipeline stages: ``corpus`` loads and
tokenizes news fragments, ``gateway`` extracts candidate event patterns
through a pluggable completion client, ``fitness`` scores argument roles
with TF-IDF and TextRank, ``evolution`` runs the genetic algorithm over
each pattern pool, ``metrics`` implements ROUGE/BLEU/Overlap, and
``pipeline`` wires everything together behind the ``nsg`` command line.
"""

__version__ = "0.1.0"
