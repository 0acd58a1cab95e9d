"""
Corpus BLEU
===========

Single-reference corpus BLEU over whitespace-tokenized sentences, built on
additive per-sentence sufficient statistics so bootstrap resampling can
re-score any sentence subset without recounting n-grams.

Orders with no hypothesis n-grams in the whole corpus are left out of the
geometric mean. With ``Smoothing.FLOOR`` a zero match count for n >= 2 is
floored at 1e-9; ``Smoothing.EXACT`` scores 0 on any zero count.
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Sequence, Tuple, Union

import pandas as pd

FLOOR_EPSILON = 1e-9

Sentence = Union[str, Sequence[str]]


class MetricError(ValueError):
    pass


class LengthMismatch(MetricError):
    def __init__(self, n_hyps: int, n_refs: int):
        super().__init__(f"{n_hyps} hypotheses but {n_refs} references")
        self.n_hyps = n_hyps
        self.n_refs = n_refs


class EmptyCorpus(MetricError):
    pass


class InvalidThreshold(MetricError):
    pass


class TooFewResamples(MetricError):
    pass


class Smoothing(Enum):
    FLOOR = "floor"
    EXACT = "exact"


@dataclass
class BleuStats:
    """Sufficient statistics; counts may be fractional for soft matching."""

    clipped: Tuple[float, ...] = field(default_factory=lambda: (0,) * 4)
    totals: Tuple[int, ...] = field(default_factory=lambda: (0,) * 4)
    hyp_length: int = 0
    ref_length: int = 0

    def __post_init__(self):
        self.clipped = tuple(self.clipped)
        self.totals = tuple(self.totals)
        if len(self.clipped) != len(self.totals):
            raise MetricError("clipped and total counts must cover the same orders")
        for c, t in zip(self.clipped, self.totals):
            if c < 0 or t < 0 or c > t + 1e-9:
                raise MetricError(f"invalid counts clipped={c} total={t}")

    @property
    def max_n(self) -> int:
        return len(self.totals)

    def __add__(self, other: "BleuStats") -> "BleuStats":
        if self.max_n != other.max_n:
            raise MetricError("cannot add statistics of different orders")
        return BleuStats(
            clipped=tuple(a + b for a, b in zip(self.clipped, other.clipped)),
            totals=tuple(a + b for a, b in zip(self.totals, other.totals)),
            hyp_length=self.hyp_length + other.hyp_length,
            ref_length=self.ref_length + other.ref_length,
        )

    def to_row(self) -> List[float]:
        return [*self.clipped, *self.totals, self.hyp_length, self.ref_length]

    @classmethod
    def from_row(cls, row: Sequence[float], max_n: int = 4) -> "BleuStats":
        return cls(
            clipped=tuple(row[:max_n]),
            totals=tuple(int(t) for t in row[max_n:2 * max_n]),
            hyp_length=int(row[2 * max_n]),
            ref_length=int(row[2 * max_n + 1]),
        )

    def to_dict(self) -> dict:
        return {
            "clipped": list(self.clipped),
            "totals": list(self.totals),
            "hyp_length": self.hyp_length,
            "ref_length": self.ref_length,
        }


@dataclass
class BleuScore:
    score: float
    stats: BleuStats

    def __float__(self) -> float:
        return self.score


def tokens_of(sentence: Sentence) -> List[str]:
    if isinstance(sentence, str):
        return sentence.split()
    return list(sentence)


def ngrams(tokens: Sequence[str], n: int) -> List[Tuple[str, ...]]:
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def check_corpus(hyps: Sequence, refs: Sequence) -> None:
    if len(hyps) != len(refs):
        raise LengthMismatch(len(hyps), len(refs))
    if not hyps:
        raise EmptyCorpus("corpus has no sentences")


def sentence_stats(hyp: Sentence, ref: Sentence, max_n: int = 4) -> BleuStats:
    hyp_tokens, ref_tokens = tokens_of(hyp), tokens_of(ref)
    clipped, totals = [], []
    for n in range(1, max_n + 1):
        hyp_counts = Counter(ngrams(hyp_tokens, n))
        ref_counts = Counter(ngrams(ref_tokens, n))
        clipped.append(sum(min(c, ref_counts[g]) for g, c in hyp_counts.items()))
        totals.append(sum(hyp_counts.values()))
    return BleuStats(tuple(clipped), tuple(totals), len(hyp_tokens), len(ref_tokens))


def score_from_stats(stats: BleuStats, smoothing: Smoothing = Smoothing.FLOOR) -> float:
    smoothing = Smoothing(smoothing)
    if stats.hyp_length == 0:
        return 100.0 if stats.ref_length == 0 else 0.0
    if stats.clipped[0] <= 0:
        return 0.0

    log_sum = 0.0
    orders = 0
    for n, (c, t) in enumerate(zip(stats.clipped, stats.totals), start=1):
        if t == 0:
            continue
        if c <= 0:
            if smoothing == Smoothing.EXACT:
                return 0.0
            c = FLOOR_EPSILON
        log_sum += math.log(c / t)
        orders += 1

    h, r = stats.hyp_length, stats.ref_length
    brevity = 1.0 if h > r else math.exp(1.0 - r / h)
    score = 100.0 * brevity * math.exp(log_sum / orders)
    return min(100.0, max(0.0, score))


def sufficient_stats(hyps: Sequence[Sentence], refs: Sequence[Sentence], max_n: int = 4) -> pd.DataFrame:
    """One row of additive statistics per sentence pair."""
    check_corpus(hyps, refs)
    rows = [sentence_stats(h, r, max_n).to_row() for h, r in zip(hyps, refs)]
    return pd.DataFrame(rows, columns=stats_columns(max_n))


def stats_columns(max_n: int = 4) -> List[str]:
    return (
        [f"correct_{n}_grams" for n in range(1, max_n + 1)]
        + [f"total_{n}_grams" for n in range(1, max_n + 1)]
        + ["translation_length", "reference_length"]
    )


def bleu(
    hyps: Sequence[Sentence],
    refs: Sequence[Sentence],
    max_n: int = 4,
    smoothing: Smoothing = Smoothing.FLOOR,
) -> BleuScore:
    check_corpus(hyps, refs)
    total = BleuStats((0,) * max_n, (0,) * max_n, 0, 0)
    for h, r in zip(hyps, refs):
        total = total + sentence_stats(h, r, max_n)
    return BleuScore(score=score_from_stats(total, smoothing), stats=total)
