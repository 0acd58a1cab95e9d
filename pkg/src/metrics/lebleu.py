"""
LeBLEU: BLEU with Edit-Distance Soft Matching
=============================================

An n-gram pair contributes its character-level similarity
``1 - levenshtein(a, b) / max(|a|, |b|)`` (n-grams compared as space-joined
strings) when that similarity reaches the threshold. Clipping becomes a
one-to-one assignment between hypothesis and reference n-grams, built
greedily from the most similar pair down; ties break on (hyp index, ref index).
"""

from collections import Counter
from functools import lru_cache
from typing import List, Sequence, Tuple

from jellyfish import levenshtein_distance

from src.metrics.bleu import (
    BleuScore,
    BleuStats,
    InvalidThreshold,
    Sentence,
    Smoothing,
    check_corpus,
    ngrams,
    score_from_stats,
    tokens_of,
)


@lru_cache(maxsize=200_000)
def similarity(a: str, b: str) -> float:
    if a == b:
        return 1.0
    longest = max(len(a), len(b))
    return 1.0 - levenshtein_distance(a, b) / longest


def _exact_clip(hyp_grams: List[Tuple[str, ...]], ref_grams: List[Tuple[str, ...]]) -> float:
    ref_counts = Counter(ref_grams)
    return float(sum(min(c, ref_counts[g]) for g, c in Counter(hyp_grams).items()))


def _soft_clip(hyp_grams: List[Tuple[str, ...]], ref_grams: List[Tuple[str, ...]], threshold: float) -> float:
    hyp_strings = [" ".join(g) for g in hyp_grams]
    ref_strings = [" ".join(g) for g in ref_grams]
    candidates = []
    for i, h in enumerate(hyp_strings):
        for j, r in enumerate(ref_strings):
            s = similarity(h, r)
            if s >= threshold:
                candidates.append((-s, i, j))
    candidates.sort()

    used_hyp, used_ref = set(), set()
    matched = 0.0
    for neg_s, i, j in candidates:
        if i in used_hyp or j in used_ref:
            continue
        used_hyp.add(i)
        used_ref.add(j)
        matched += -neg_s
    return matched


def soft_sentence_stats(hyp: Sentence, ref: Sentence, threshold: float, max_n: int = 4) -> BleuStats:
    hyp_tokens, ref_tokens = tokens_of(hyp), tokens_of(ref)
    clipped, totals = [], []
    for n in range(1, max_n + 1):
        hyp_grams = ngrams(hyp_tokens, n)
        ref_grams = ngrams(ref_tokens, n)
        if threshold >= 1.0:
            clipped.append(_exact_clip(hyp_grams, ref_grams))
        else:
            clipped.append(_soft_clip(hyp_grams, ref_grams, threshold))
        totals.append(len(hyp_grams))
    return BleuStats(tuple(clipped), tuple(totals), len(hyp_tokens), len(ref_tokens))


def lebleu(
    hyps: Sequence[Sentence],
    refs: Sequence[Sentence],
    threshold: float = 0.6,
    max_n: int = 4,
    smoothing: Smoothing = Smoothing.FLOOR,
) -> BleuScore:
    if not 0.0 < threshold <= 1.0:
        raise InvalidThreshold(f"threshold must be in (0, 1], got {threshold}")
    check_corpus(hyps, refs)
    total = BleuStats((0,) * max_n, (0,) * max_n, 0, 0)
    for h, r in zip(hyps, refs):
        total = total + soft_sentence_stats(h, r, threshold, max_n)
    return BleuScore(score=score_from_stats(total, smoothing), stats=total)
