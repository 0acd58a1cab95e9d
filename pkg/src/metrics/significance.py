"""
Paired Bootstrap Resampling
===========================

Sentence indices are resampled with replacement; each resample re-scores both
systems from summed sufficient statistics. Resample ``i`` draws with a seed
derived from ``(seed, i)`` only, so results do not depend on evaluation order.

The system with the higher observed BLEU is the winner. The p-value is the
fraction of resamples in which the winner does not strictly win (ties count
against it). Equal observed scores have no winner and p = 1.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.utils import resample

from src.metrics.bleu import (
    BleuStats,
    LengthMismatch,
    Sentence,
    Smoothing,
    TooFewResamples,
    check_corpus,
    score_from_stats,
    sufficient_stats,
)

logger = logging.getLogger(__name__)

MIN_RESAMPLES = 100


@dataclass
class SignificanceResult:
    p_value: float
    n_resamples: int
    seed: int
    wins_a: int
    wins_b: int
    ties: int
    bleu_a: float
    bleu_b: float
    winner: Optional[str] = None

    def significant(self, alpha: float = 0.05) -> bool:
        return self.winner is not None and self.p_value < alpha

    def to_dict(self) -> dict:
        return asdict(self)


def resample_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([seed, i]).generate_state(1)[0])


def _score_rows(rows: np.ndarray, max_n: int, smoothing: Smoothing) -> float:
    return score_from_stats(BleuStats.from_row(rows.sum(axis=0), max_n), smoothing)


def paired_bootstrap(
    hyps_a: Sequence[Sentence],
    hyps_b: Sequence[Sentence],
    refs: Sequence[Sentence],
    n_resamples: int = 1000,
    seed: int = 0,
    max_n: int = 4,
    smoothing: Smoothing = Smoothing.FLOOR,
) -> SignificanceResult:
    if len(hyps_a) != len(hyps_b):
        raise LengthMismatch(len(hyps_a), len(hyps_b))
    check_corpus(hyps_a, refs)
    if n_resamples < MIN_RESAMPLES:
        raise TooFewResamples(f"need at least {MIN_RESAMPLES} resamples, got {n_resamples}")

    stats_a = sufficient_stats(hyps_a, refs, max_n).to_numpy(dtype=float)
    stats_b = sufficient_stats(hyps_b, refs, max_n).to_numpy(dtype=float)
    n = len(refs)
    indices = np.arange(n)

    bleu_a = _score_rows(stats_a, max_n, smoothing)
    bleu_b = _score_rows(stats_b, max_n, smoothing)

    wins_a = wins_b = ties = 0
    for i in range(n_resamples):
        sample = resample(indices, replace=True, n_samples=n, random_state=resample_seed(seed, i))
        score_a = _score_rows(stats_a[sample], max_n, smoothing)
        score_b = _score_rows(stats_b[sample], max_n, smoothing)
        if score_a > score_b:
            wins_a += 1
        elif score_b > score_a:
            wins_b += 1
        else:
            ties += 1

    if bleu_a > bleu_b:
        winner, p_value = "a", (n_resamples - wins_a) / n_resamples
    elif bleu_b > bleu_a:
        winner, p_value = "b", (n_resamples - wins_b) / n_resamples
    else:
        winner, p_value = None, 1.0

    logger.info(
        f"Bootstrap over {n} sentences x {n_resamples}: BLEU a={bleu_a:.2f} b={bleu_b:.2f}, "
        f"wins {wins_a}/{wins_b}/{ties}, p={p_value:.4f}"
    )
    return SignificanceResult(
        p_value=p_value,
        n_resamples=n_resamples,
        seed=seed,
        wins_a=wins_a,
        wins_b=wins_b,
        ties=ties,
        bleu_a=bleu_a,
        bleu_b=bleu_b,
        winner=winner,
    )
