"""Extractive baselines: TF-IDF sentence scoring and sentence-level TextRank.

Both pick whole sentences from the fragment body, so their summaries are
verbatim extracts; that property anchors the overlap metric near 100%.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping

from .corpus import Corpus, NewsFragment, split_sentences, tokenize
from .fitness import (
    DEFAULT_DAMPING,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    RoleGraph,
    textrank_scores,
)
from .gateway import SummaryRecord


@dataclass(frozen=True)
class CorpusTermStats:
    """Document frequencies over fragments, for corpus-level IDF."""

    doc_freq: Mapping[str, int]
    n_fragments: int


def corpus_term_stats(corpus: Corpus) -> CorpusTermStats:
    doc_freq: Counter[str] = Counter()
    for fragment in corpus:
        doc_freq.update(set(tokenize(fragment.body)))
    return CorpusTermStats(doc_freq=dict(doc_freq), n_fragments=len(corpus))


def _pick_sentences(scores: list[float], max_sentences: int) -> list[int]:
    # Highest score first, earlier sentence on ties; emit in original order.
    ranked = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return sorted(ranked[:max_sentences])


def baseline_tfidf_summary(
    fragment: NewsFragment,
    stats: CorpusTermStats,
    max_sentences: int = 1,
) -> SummaryRecord:
    """Extract the sentences with the highest mean TF-IDF.

    A sentence scores the mean over its distinct tokens of
    (1 + ln tf) * ln(N / df), with tf the token's count inside the sentence
    and df its fragment-level document frequency.  Token-free sentences
    score 0.
    """
    if max_sentences < 1:
        raise ValueError("max_sentences must be >= 1")
    sentences = split_sentences(fragment.body)
    scores = []
    for sentence in sentences:
        counts = Counter(tokenize(sentence))
        if not counts:
            scores.append(0.0)
            continue
        total = math.fsum(
            (1.0 + math.log(tf)) * math.log(stats.n_fragments / max(stats.doc_freq.get(t, 0), 1))
            for t, tf in counts.items()
        )
        scores.append(total / len(counts))
    chosen = _pick_sentences(scores, max_sentences)
    return SummaryRecord(
        fragment_id=fragment.id,
        system="tfidf_baseline",
        summary=" ".join(sentences[i] for i in chosen),
    )


def _sentence_similarity(tokens_a: list[str], tokens_b: list[str]) -> float:
    """Shared distinct tokens, length-normalized by log sentence lengths.

    When a sentence is so short the log-denominator is not positive the raw
    overlap count is used instead.
    """
    shared = len(set(tokens_a) & set(tokens_b))
    if shared == 0:
        return 0.0
    denominator = math.log(len(tokens_a)) + math.log(len(tokens_b))
    if denominator <= 0:
        return float(shared)
    return shared / denominator


def baseline_textrank_summary(
    fragment: NewsFragment,
    max_sentences: int = 1,
    *,
    d: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SummaryRecord:
    """Extract the sentences ranked centrally by TextRank.

    Sentences are nodes; edges join sentences sharing at least one token,
    weighted by similarity.  Reuses the same power iteration as role
    fitness.
    """
    if max_sentences < 1:
        raise ValueError("max_sentences must be >= 1")
    sentences = split_sentences(fragment.body)
    token_lists = [tokenize(s) for s in sentences]
    weights: dict[tuple[str, str], float] = {}
    for i in range(len(sentences)):
        if not token_lists[i]:
            continue
        for j in range(i + 1, len(sentences)):
            if not token_lists[j]:
                continue
            similarity = _sentence_similarity(token_lists[i], token_lists[j])
            if similarity > 0:
                u, v = sorted((str(i), str(j)))
                weights[(u, v)] = similarity
    graph = RoleGraph(nodes=tuple(str(i) for i in range(len(sentences))), weights=weights)
    ranks = textrank_scores(graph, d=d, tol=tol, max_iter=max_iter)
    scores = [ranks[str(i)] for i in range(len(sentences))]
    chosen = _pick_sentences(scores, max_sentences)
    return SummaryRecord(
        fragment_id=fragment.id,
        system="textrank_baseline",
        summary=" ".join(sentences[i] for i in chosen),
    )
