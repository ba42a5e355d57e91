"""Summary quality metrics and corpus-level evaluation.

ROUGE-1/2 (clipped n-gram overlap), ROUGE-L (longest common subsequence),
cumulative BLEU-1..4, and a bigram overlap percentage against the source
text.  All ratios define 0/0 as 0 so empty inputs score zero rather than
raising.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .corpus import Corpus, TokenSequence, tokenize
from .gateway import SummaryRecord

OVERLAP_COMPARANDS = ("source", "reference")


class UnknownFragmentError(KeyError):
    """A summary record points at a fragment id absent from the corpus."""


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, overlap: int, candidate_total: int, reference_total: int) -> "PRF":
        precision = overlap / candidate_total if candidate_total else 0.0
        recall = overlap / reference_total if reference_total else 0.0
        denom = precision + recall
        f1 = 2.0 * precision * recall / denom if denom else 0.0
        return cls(precision, recall, f1)


def ngram_counts(tokens: TokenSequence, n: int) -> Counter:
    """Multiset of n-grams as tuples; empty when the text is shorter than n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _clipped_overlap(candidate: Counter, reference: Counter) -> int:
    return sum(min(count, reference[gram]) for gram, count in candidate.items())


def rouge_n(candidate: TokenSequence, reference: TokenSequence, n: int) -> PRF:
    """n-gram recall/precision/F1 with counts clipped to the reference."""
    if n not in (1, 2):
        raise ValueError("rouge_n is defined here for n in {1, 2}")
    cand = ngram_counts(candidate, n)
    ref = ngram_counts(reference, n)
    return PRF.from_counts(_clipped_overlap(cand, ref), sum(cand.values()), sum(ref.values()))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Classic O(len(a)*len(b)) dynamic program, one rolling row."""
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[len(b)]


def rouge_l(candidate: TokenSequence, reference: TokenSequence) -> PRF:
    """LCS-based PRF: precision over candidate length, recall over reference."""
    overlap = lcs_length(candidate, reference)
    return PRF.from_counts(overlap, len(candidate), len(reference))


def bleu(
    candidate: TokenSequence,
    reference: TokenSequence,
    max_n: int = 4,
    *,
    smoothing: bool = False,
) -> list[float]:
    """Cumulative BLEU-1..max_n against a single reference.

    Uses clipped modified precisions, uniform geometric weights, and a
    brevity penalty min(1, exp(1 - r/c)).  Any zero precision zeroes the
    cumulative scores it participates in; ``smoothing`` instead applies
    add-one smoothing to orders >= 2 (the usual sentence-level fallback).
    """
    if not 1 <= max_n <= 4:
        raise ValueError("max_n must lie in 1..4")
    if not candidate or not reference:
        return [0.0] * max_n
    precisions: list[float] = []
    for n in range(1, max_n + 1):
        cand = ngram_counts(candidate, n)
        ref = ngram_counts(reference, n)
        total = sum(cand.values())
        overlap = _clipped_overlap(cand, ref)
        if smoothing and n >= 2:
            precisions.append((overlap + 1) / (total + 1) if total else 0.0)
        else:
            precisions.append(overlap / total if total else 0.0)
    bp = min(1.0, math.exp(1.0 - len(reference) / len(candidate)))
    scores = []
    for n in range(1, max_n + 1):
        window = precisions[:n]
        if any(p == 0.0 for p in window):
            scores.append(0.0)
        else:
            log_mean = math.fsum(math.log(p) for p in window) / n
            scores.append(bp * math.exp(log_mean))
    return scores


def overlap_pct(candidate: TokenSequence, comparand: TokenSequence) -> float:
    """Percent of the candidate's distinct bigrams present in the comparand."""
    cand_bigrams = set(ngram_counts(candidate, 2))
    if not cand_bigrams:
        return 0.0
    comparand_bigrams = set(ngram_counts(comparand, 2))
    return 100.0 * len(cand_bigrams & comparand_bigrams) / len(cand_bigrams)


@dataclass(frozen=True)
class FragmentScores:
    system: str
    fragment_id: str
    rouge1: PRF
    rouge2: PRF
    rougeL: PRF
    bleu: tuple[float, float, float, float]
    overlap: float

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "fragment_id": self.fragment_id,
            "rouge1": vars(self.rouge1),
            "rouge2": vars(self.rouge2),
            "rougeL": vars(self.rougeL),
            "bleu": list(self.bleu),
            "overlap": self.overlap,
        }


@dataclass(frozen=True)
class SystemScores:
    """Per-system means over fragments (F1 for the ROUGE columns)."""

    system: str
    n_fragments: int
    rouge1: float
    rouge2: float
    rougeL: float
    bleu: tuple[float, float, float, float]
    overlap: float

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "n_fragments": self.n_fragments,
            "rouge1": self.rouge1,
            "rouge2": self.rouge2,
            "rougeL": self.rougeL,
            "bleu": list(self.bleu),
            "overlap": self.overlap,
        }


@dataclass(frozen=True)
class EvaluationReport:
    systems: Mapping[str, SystemScores]
    breakdown: tuple[FragmentScores, ...]
    overlap_comparand: str

    def to_dict(self) -> dict:
        return {
            "overlap_comparand": self.overlap_comparand,
            "systems": {name: self.systems[name].to_dict() for name in sorted(self.systems)},
            "breakdown": [row.to_dict() for row in self.breakdown],
        }


def _mean(values: Iterable[float]) -> float:
    values = list(values)
    return math.fsum(values) / len(values) if values else 0.0


def score_record(
    record: SummaryRecord,
    corpus: Corpus,
    *,
    overlap_comparand: str = "source",
    bleu_smoothing: bool = False,
) -> FragmentScores:
    """Score one summary against its fragment's title (and body for overlap)."""
    fragment = corpus.get(record.fragment_id)
    if fragment is None:
        raise UnknownFragmentError(record.fragment_id)
    candidate = tokenize(record.summary)
    reference = tokenize(fragment.title)
    comparand = tokenize(fragment.body) if overlap_comparand == "source" else reference
    b = bleu(candidate, reference, 4, smoothing=bleu_smoothing)
    return FragmentScores(
        system=record.system,
        fragment_id=record.fragment_id,
        rouge1=rouge_n(candidate, reference, 1),
        rouge2=rouge_n(candidate, reference, 2),
        rougeL=rouge_l(candidate, reference),
        bleu=(b[0], b[1], b[2], b[3]),
        overlap=overlap_pct(candidate, comparand),
    )


def evaluate(
    records: Sequence[SummaryRecord],
    corpus: Corpus,
    *,
    overlap_comparand: str = "source",
    bleu_smoothing: bool = False,
) -> EvaluationReport:
    """Score every record and aggregate per system.

    The breakdown is sorted by (system, fragment id), so the report does
    not depend on the order records arrive in.
    """
    if overlap_comparand not in OVERLAP_COMPARANDS:
        raise ValueError(f"overlap_comparand must be one of {OVERLAP_COMPARANDS}")
    rows = sorted(
        (
            score_record(
                record,
                corpus,
                overlap_comparand=overlap_comparand,
                bleu_smoothing=bleu_smoothing,
            )
            for record in records
        ),
        key=lambda row: (row.system, row.fragment_id),
    )
    systems: dict[str, SystemScores] = {}
    for name in sorted({row.system for row in rows}):
        group = [row for row in rows if row.system == name]
        systems[name] = SystemScores(
            system=name,
            n_fragments=len(group),
            rouge1=_mean(row.rouge1.f1 for row in group),
            rouge2=_mean(row.rouge2.f1 for row in group),
            rougeL=_mean(row.rougeL.f1 for row in group),
            bleu=tuple(_mean(row.bleu[i] for row in group) for i in range(4)),
            overlap=_mean(row.overlap for row in group),
        )
    return EvaluationReport(
        systems=systems,
        breakdown=tuple(rows),
        overlap_comparand=overlap_comparand,
    )
