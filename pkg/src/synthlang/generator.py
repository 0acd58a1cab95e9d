"""
Synthetic Parallel Corpus Generator
===================================

Samples derivations from a validated Grammar and realizes each one in the
three language layers, giving controlled parallel data for the transfer
experiments.

Files written by ``save``:
- assisting.trees    bracketed assisting-language trees
- assisting.txt      assisting sentences
- source.txt         source sentences (with noise)
- target.txt         target sentences
- dictionary.tsv     source<TAB>assisting word dictionary

Example ``i`` is sampled with ``default_rng([seed, i])``, so any example can
be regenerated on its own and parallel generation matches serial order.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from sklearn.utils import shuffle

from src.dictxlate.dictionary import save_dictionary
from src.synthlang.grammar import Grammar, GrammarInvalid, InsufficientData, Production, min_heights
from src.synthlang.validator import validate_grammar
from src.treebank.tree import ParseTree, serialize_tree

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

NOISE_SUFFIX = "_x"


@dataclass
class GeneratorConfig:
    """Configuration for synthetic corpus generation."""
    n_examples: int = 10000
    noise: float = 0.05
    seed: int = 42


@dataclass
class Derivation:
    symbol: str
    production: Optional[Production] = None
    lexeme: Optional[int] = None
    children: List["Derivation"] = field(default_factory=list)


@dataclass
class ParallelExample:
    index: int
    assisting_tree: ParseTree
    assisting_tokens: List[str]
    source_tokens: List[str]
    target_tokens: List[str]
    pivot_tokens: List[str]

    @property
    def assisting(self) -> str:
        return " ".join(self.assisting_tokens)

    @property
    def source(self) -> str:
        return " ".join(self.source_tokens)

    @property
    def target(self) -> str:
        return " ".join(self.target_tokens)

    @property
    def pivot(self) -> str:
        return " ".join(self.pivot_tokens)


@dataclass
class CorpusSplits:
    parent_train: List[ParallelExample]
    dev: List[ParallelExample]
    test: List[ParallelExample]
    child_pool: List[ParallelExample]

    def child_subset(self, k: int) -> List[ParallelExample]:
        """First ``k`` child-train examples; smaller subsets are prefixes of larger ones."""
        if k < 0 or k > len(self.child_pool):
            raise InsufficientData(f"child subset of {k} requested, pool has {len(self.child_pool)}")
        return self.child_pool[:k]

    def sizes(self) -> Dict[str, int]:
        return {
            "parent_train": len(self.parent_train),
            "child_train_max": len(self.child_pool),
            "dev": len(self.dev),
            "test": len(self.test),
        }


@dataclass
class SplitSizes:
    parent_train: int = 8000
    child_train_max: int = 800
    dev: int = 500
    test: int = 500

    @property
    def total(self) -> int:
        return self.parent_train + self.child_train_max + self.dev + self.test


class SyntheticCorpusGenerator:
    """Generates parallel assisting/source/target examples from a Grammar."""

    def __init__(self, grammar: Grammar, config: GeneratorConfig = None):
        self.grammar = grammar
        self.config = config or GeneratorConfig()
        report = validate_grammar(grammar)
        if not report.ok:
            raise GrammarInvalid(f"grammar failed validation:{report.summary()}", report)
        if not 0.0 <= self.config.noise <= 1.0:
            raise GrammarInvalid(f"noise must be in [0, 1], got {self.config.noise}")
        self._heights = min_heights(grammar)
        self._lexeme_weights = {
            pos: self._zipf(len(layers["assisting"])) for pos, layers in grammar.lexicon.items()
        }

    def _zipf(self, size: int) -> np.ndarray:
        weights = 1.0 / np.arange(1, size + 1) ** self.grammar.zipf_exponent
        return weights / weights.sum()

    def _expand(self, symbol: str, depth: int, rng: np.random.Generator) -> Derivation:
        g = self.grammar
        if symbol in g.lexicon:
            weights = self._lexeme_weights[symbol]
            return Derivation(symbol, lexeme=int(rng.choice(len(weights), p=weights)))

        budget = g.max_depth - depth + 1
        options = [p for p in g.productions[symbol] if 1 + max(self._heights[s] for s in p.rhs) <= budget]
        if not options:
            raise GrammarInvalid(f"no derivation of {symbol} fits within max_depth {g.max_depth}")
        probs = np.array([p.prob for p in options])
        production = options[int(rng.choice(len(options), p=probs / probs.sum()))]
        children = [self._expand(s, depth + 1, rng) for s in production.rhs]
        return Derivation(symbol, production=production, children=children)

    def _realize(self, node: Derivation, layer: str) -> List[str]:
        if node.lexeme is not None:
            return [self.grammar.words(node.symbol, layer)[node.lexeme]]
        order = node.production.order(self.grammar.layer_order(layer))
        tokens: List[str] = []
        for i in order:
            tokens.extend(self._realize(node.children[i], layer))
        return tokens

    def _realize_pivot(self, node: Derivation, source_layer: str = "source") -> List[str]:
        """Assisting words in source-language order."""
        if node.lexeme is not None:
            return [self.grammar.words(node.symbol, "assisting")[node.lexeme]]
        order = node.production.order(self.grammar.layer_order(source_layer))
        tokens: List[str] = []
        for i in order:
            tokens.extend(self._realize_pivot(node.children[i], source_layer))
        return tokens

    def _tree(self, node: Derivation) -> ParseTree:
        if node.lexeme is not None:
            word = self.grammar.words(node.symbol, "assisting")[node.lexeme]
            return ParseTree(label=node.symbol, children=(ParseTree.leaf(word),))
        order = node.production.order(self.grammar.layer_order("assisting"))
        return ParseTree(label=node.symbol, children=tuple(self._tree(node.children[i]) for i in order))

    def _add_noise(self, tokens: List[str], rng: np.random.Generator) -> List[str]:
        if self.config.noise <= 0:
            return tokens
        draws = rng.random(len(tokens))
        return [t + NOISE_SUFFIX if d < self.config.noise else t for t, d in zip(tokens, draws)]

    def sample(self, index: int) -> ParallelExample:
        rng = np.random.default_rng([self.config.seed, index])
        derivation = self._expand(self.grammar.start, 1, rng)
        tree = self._tree(derivation)
        return ParallelExample(
            index=index,
            assisting_tree=tree,
            assisting_tokens=self._realize(derivation, "assisting"),
            source_tokens=self._add_noise(self._realize(derivation, "source"), rng),
            target_tokens=self._realize(derivation, "target"),
            pivot_tokens=self._realize_pivot(derivation),
        )

    def generate(self) -> List[ParallelExample]:
        if self.config.n_examples < 1:
            raise GrammarInvalid(f"n must be at least 1, got {self.config.n_examples}")
        examples = [self.sample(i) for i in range(self.config.n_examples)]
        logger.info(f"Generated {len(examples):,} examples (seed={self.config.seed}, noise={self.config.noise})")
        return examples

    def save(self, examples: List[ParallelExample], output_dir) -> Dict[str, Path]:
        """Write the treebank, sentence files and dictionary for ``examples``."""
        output_path = Path(output_dir)
        output_path.mkdir(parents=True, exist_ok=True)
        files = {
            "treebank": output_path / "assisting.trees",
            "assisting": output_path / "assisting.txt",
            "source": output_path / "source.txt",
            "target": output_path / "target.txt",
            "dictionary": output_path / "dictionary.tsv",
        }
        writers = {
            "treebank": lambda ex: serialize_tree(ex.assisting_tree),
            "assisting": lambda ex: ex.assisting,
            "source": lambda ex: ex.source,
            "target": lambda ex: ex.target,
        }
        for name, render in writers.items():
            _write_lines(files[name], [render(ex) for ex in examples])
        save_dictionary(self.grammar.dictionary_entries(), files["dictionary"])

        logger.info(f"Corpus saved to: {output_path}")
        return files


def _write_lines(path: Path, lines: List[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line + "\n")


def generate_corpus(
    grammar: Grammar,
    n: int,
    seed: int,
    noise: float = 0.05,
    out_dir=None,
) -> Tuple[List[ParallelExample], Dict[str, Path]]:
    if n < 1:
        raise GrammarInvalid(f"n must be at least 1, got {n}")
    generator = SyntheticCorpusGenerator(grammar, GeneratorConfig(n_examples=n, noise=noise, seed=seed))
    examples = generator.generate()
    files = generator.save(examples, out_dir) if out_dir is not None else {}
    return examples, files


def split_corpus(examples: List[ParallelExample], sizes: SplitSizes, seed: int) -> CorpusSplits:
    """Disjoint parent/dev/test/child splits from one seeded shuffle."""
    if sizes.total > len(examples):
        raise InsufficientData(f"splits need {sizes.total} examples, corpus has {len(examples)}")
    for name, value in vars(sizes).items():
        if value < 0:
            raise InsufficientData(f"{name} cannot be negative")

    order = shuffle(np.arange(len(examples)), random_state=seed)
    picked = [examples[i] for i in order]
    a = sizes.parent_train
    b = a + sizes.dev
    c = b + sizes.test
    d = c + sizes.child_train_max
    return CorpusSplits(
        parent_train=picked[:a],
        dev=picked[a:b],
        test=picked[b:c],
        child_pool=picked[c:d],
    )
