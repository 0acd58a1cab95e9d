"""
Synthetic Language Grammar
==========================

A probabilistic context-free grammar shared by three language layers
(assisting, source, target). Layers differ only in their lexicon and in
word order: every production carries an optional ``sov`` permutation of its
right-hand side that SOV layers apply when realizing a derivation.

Grammar files are YAML:

    start: S
    max_depth: 8
    word_order: {assisting: SVO, source: SOV, target: SOV}
    productions:
      VP:
        - {rhs: [VB, NP], p: 0.5, sov: [1, 0]}
    lexicon:
      NN:
        assisting: [dog, cat]
        source: {pattern: "n{i:02d}_s", size: 2}
        target: {pattern: "n{i:02d}_t", size: 2}

Lexicon index ``i`` of each layer is a translation triple.
"""

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import yaml

LAYERS = ("assisting", "source", "target")


class WordOrder(Enum):
    SVO = "SVO"
    SOV = "SOV"


class GrammarInvalid(ValueError):
    """Raised when a grammar cannot be used; carries the validation report if any."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class Production:
    lhs: str
    rhs: Tuple[str, ...]
    prob: float
    sov: Optional[Tuple[int, ...]] = None

    def order(self, word_order: WordOrder) -> Tuple[int, ...]:
        if word_order == WordOrder.SOV and self.sov is not None:
            return self.sov
        return tuple(range(len(self.rhs)))


@dataclass
class Grammar:
    productions: Dict[str, List[Production]] = field(default_factory=dict)
    lexicon: Dict[str, Dict[str, List[str]]] = field(default_factory=dict)
    word_order: Dict[str, str] = field(default_factory=lambda: {"assisting": "SVO", "source": "SOV", "target": "SOV"})
    start: str = "S"
    max_depth: int = 8
    zipf_exponent: float = 1.0
    fingerprint: str = ""

    @property
    def nonterminals(self) -> List[str]:
        return list(self.productions.keys())

    @property
    def preterminals(self) -> List[str]:
        return list(self.lexicon.keys())

    def layer_order(self, layer: str) -> WordOrder:
        return WordOrder(self.word_order[layer])

    def words(self, pos: str, layer: str) -> List[str]:
        return self.lexicon[pos][layer]

    def dictionary_entries(self) -> List[Tuple[str, str]]:
        """(source word, assisting word) pairs in lexicon order."""
        entries = []
        for pos, layers in self.lexicon.items():
            for source_word, assisting_word in zip(layers.get("source", []), layers.get("assisting", [])):
                entries.append((source_word, assisting_word))
        return entries

    @classmethod
    def from_dict(cls, data: dict, fingerprint: str = "") -> "Grammar":
        if not isinstance(data, dict):
            raise GrammarInvalid("grammar must be a mapping")
        productions: Dict[str, List[Production]] = {}
        for lhs, options in (data.get("productions") or {}).items():
            productions[lhs] = []
            for opt in options or []:
                if "rhs" not in opt or "p" not in opt:
                    raise GrammarInvalid(f"production for {lhs} needs 'rhs' and 'p': {opt}")
                sov = opt.get("sov")
                productions[lhs].append(
                    Production(
                        lhs=lhs,
                        rhs=tuple(str(s) for s in opt["rhs"]),
                        prob=float(opt["p"]),
                        sov=tuple(int(i) for i in sov) if sov is not None else None,
                    )
                )

        lexicon: Dict[str, Dict[str, List[str]]] = {}
        for pos, layers in (data.get("lexicon") or {}).items():
            lexicon[pos] = {layer: _expand_words(spec, pos, layer) for layer, spec in (layers or {}).items()}

        return cls(
            productions=productions,
            lexicon=lexicon,
            word_order={k: str(v) for k, v in (data.get("word_order") or {}).items()},
            start=data.get("start", "S"),
            max_depth=int(data.get("max_depth", 8)),
            zipf_exponent=float(data.get("zipf_exponent", 1.0)),
            fingerprint=fingerprint,
        )


def _expand_words(spec, pos: str, layer: str) -> List[str]:
    if isinstance(spec, list):
        return [str(w) for w in spec]
    if isinstance(spec, dict) and "pattern" in spec:
        return [spec["pattern"].format(i=i) for i in range(int(spec.get("size", 0)))]
    raise GrammarInvalid(f"lexicon {pos}/{layer} must be a word list or a pattern block")


def load_grammar(path) -> Grammar:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    data = yaml.safe_load(text)
    return Grammar.from_dict(data, fingerprint=hashlib.sha256(text.encode("utf-8")).hexdigest())


def min_heights(grammar: Grammar) -> Dict[str, float]:
    """Smallest derivation height per symbol; a preterminal has height 1.

    Symbols that can never terminate get ``inf``.
    """
    heights: Dict[str, float] = {pos: 1.0 for pos in grammar.lexicon}
    for lhs in grammar.productions:
        heights.setdefault(lhs, float("inf"))

    changed = True
    while changed:
        changed = False
        for lhs, options in grammar.productions.items():
            if lhs in grammar.lexicon:
                continue
            for prod in options:
                h = 1 + max((heights.get(s, float("inf")) for s in prod.rhs), default=float("inf"))
                if h < heights[lhs]:
                    heights[lhs] = h
                    changed = True
    return heights
