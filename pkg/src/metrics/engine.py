"""
Metrics Engine - Scores translations from YAML metric definitions.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import yaml

from src.metrics.bleu import BleuScore, MetricError, Sentence, Smoothing, bleu, tokens_of
from src.metrics.lebleu import lebleu
from src.metrics.significance import SignificanceResult, paired_bootstrap

logger = logging.getLogger(__name__)

DEFAULT_DEFINITIONS = {
    "bleu": {"display_name": "BLEU", "category": "overlap", "max_n": 4, "smoothing": "floor"},
    "lebleu": {"display_name": "LeBLEU", "category": "overlap", "max_n": 4, "smoothing": "floor", "threshold": 0.6},
    "unk": {"display_name": "UNK count", "category": "vocabulary", "unk_token": "<unk>"},
}
DEFAULT_SIGNIFICANCE = {"n_resamples": 1000, "alpha": 0.05, "metric": "bleu"}


def count_unk(hyps: Sequence[Sentence], unk_token: str = "<unk>") -> int:
    return sum(tokens_of(h).count(unk_token) for h in hyps)


def read_sentences(path) -> List[str]:
    with open(Path(path), "r", encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f]


class MetricsEngine:
    """Loads YAML metric definitions and scores hypothesis corpora."""

    def __init__(self, config_path: Optional[str] = "config/metrics_definitions.yaml"):
        self.metrics: Dict[str, dict] = {k: dict(v) for k, v in DEFAULT_DEFINITIONS.items()}
        self.significance_params: Dict = dict(DEFAULT_SIGNIFICANCE)
        self.metadata: Dict = {}
        if config_path:
            self._load(config_path)

    def _load(self, path: str) -> None:
        if not Path(path).exists():
            logger.warning(f"Metric definitions not found at {path}, using built-in defaults")
            return
        with open(path) as f:
            data = yaml.safe_load(f) or {}
        self.metadata = data.get("metadata", {})
        for name, cfg in (data.get("metrics") or {}).items():
            self.metrics.setdefault(name, {}).update(cfg or {})
        self.significance_params.update(data.get("significance") or {})

    def list_metrics(self, category: str = None) -> List[str]:
        if category:
            return [n for n, m in self.metrics.items() if m.get("category") == category]
        return list(self.metrics.keys())

    def params(self, name: str) -> dict:
        m = self.metrics.get(name)
        if m is None:
            raise MetricError(f"Unknown metric: {name}")
        return m

    def score(self, name: str, hyps: Sequence[Sentence], refs: Sequence[Sentence], **overrides) -> BleuScore:
        m = {**self.params(name), **{k: v for k, v in overrides.items() if v is not None}}
        smoothing = Smoothing(m.get("smoothing", "floor"))
        if name == "bleu":
            return bleu(hyps, refs, max_n=m["max_n"], smoothing=smoothing)
        if name == "lebleu":
            return lebleu(hyps, refs, threshold=m["threshold"], max_n=m["max_n"], smoothing=smoothing)
        raise MetricError(f"Metric {name} is not a corpus score")

    def count_unk(self, hyps: Sequence[Sentence]) -> int:
        return count_unk(hyps, self.params("unk")["unk_token"])

    def significance(
        self,
        hyps_a: Sequence[Sentence],
        hyps_b: Sequence[Sentence],
        refs: Sequence[Sentence],
        seed: int = 0,
        n_resamples: Optional[int] = None,
    ) -> SignificanceResult:
        m = self.params("bleu")
        return paired_bootstrap(
            hyps_a,
            hyps_b,
            refs,
            n_resamples=n_resamples or self.significance_params["n_resamples"],
            seed=seed,
            max_n=m["max_n"],
            smoothing=Smoothing(m.get("smoothing", "floor")),
        )

    @property
    def alpha(self) -> float:
        return float(self.significance_params["alpha"])

    def describe(self) -> dict:
        """Parameters recorded alongside every report."""
        return {"metrics": self.metrics, "significance": self.significance_params}

    def get_documentation(self, name: str) -> str:
        m = self.metrics.get(name)
        if not m:
            return f"Unknown metric: {name}"
        params = {k: v for k, v in m.items() if k not in ("display_name", "category", "definition", "caveats")}
        return f"""
# {m.get('display_name', name)}
**Category:** {m.get('category', 'uncategorized')}

## Definition
{m.get('definition', '')}

## Parameters
{chr(10).join(f'- {k}: {v}' for k, v in params.items())}

## Caveats
{chr(10).join('- ' + c for c in m.get('caveats', []))}
"""


if __name__ == "__main__":
    engine = MetricsEngine()
    print("Available metrics:", engine.list_metrics())
    for name in engine.list_metrics():
        print(engine.get_documentation(name))
