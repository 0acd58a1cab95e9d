"""
Grammar Validation Framework
============================

Runs structural checks over a Grammar and returns a report of
severity-tagged results instead of raising. Callers decide what to do with
errors; ``generate_corpus`` refuses grammars whose report is not ``ok``.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

import numpy as np

from src.synthlang.grammar import LAYERS, Grammar, WordOrder, min_heights

logger = logging.getLogger(__name__)

PROBABILITY_TOLERANCE = 1e-9


class CheckSeverity(Enum):
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


@dataclass
class CheckResult:
    check_name: str
    passed: bool
    severity: CheckSeverity
    subject: Optional[str] = None
    details: Optional[str] = None

    def to_dict(self) -> Dict:
        return {
            "check_name": self.check_name,
            "passed": self.passed,
            "severity": self.severity.value,
            "subject": self.subject,
            "details": self.details,
        }


@dataclass
class ValidationReport:
    grammar_name: str
    checks_run: int = 0
    results: List[CheckResult] = field(default_factory=list)

    @property
    def diagnostics(self) -> List[CheckResult]:
        return [r for r in self.results if not r.passed]

    @property
    def errors(self) -> List[CheckResult]:
        return [r for r in self.diagnostics if r.severity == CheckSeverity.ERROR]

    @property
    def ok(self) -> bool:
        return not self.errors

    def has(self, check_name: str) -> bool:
        return any(r.check_name == check_name for r in self.diagnostics)

    def summary(self) -> str:
        status = "✅ PASSED" if self.ok else "❌ FAILED"
        lines = [
            f"\n{'='*60}",
            f"GRAMMAR REPORT: {self.grammar_name}",
            f"{'='*60}",
            f"Status: {status}",
            f"Checks: {self.checks_run}, diagnostics: {len(self.diagnostics)}",
        ]
        for result in self.diagnostics:
            icon = "✗" if result.severity == CheckSeverity.ERROR else "!"
            subject = f" [{result.subject}]" if result.subject else ""
            lines.append(f"  {icon} {result.check_name}{subject}: {result.details}")
        return "\n".join(lines)


class GrammarValidator:
    CHECKS = (
        "probability_sum",
        "undefined_symbol",
        "unreachable",
        "word_order",
        "sov_permutation",
        "lexicon_layers",
        "duplicate_wordform",
        "recursion",
    )

    def __init__(self, grammar: Grammar):
        self.grammar = grammar
        self.results: List[CheckResult] = []
        self.checks_run = 0

    def _fail(self, name: str, severity: CheckSeverity, subject: str, details: str) -> None:
        self.results.append(CheckResult(name, False, severity, subject, details))

    def validate(self, name: str = "grammar") -> ValidationReport:
        for check in self.CHECKS:
            self.checks_run += 1
            getattr(self, f"_check_{check}")()
        report = ValidationReport(grammar_name=name, checks_run=self.checks_run, results=self.results)
        if not report.ok:
            logger.warning(f"Grammar {name} has {len(report.errors)} errors")
        return report

    def _check_probability_sum(self):
        for lhs, options in self.grammar.productions.items():
            total = sum(p.prob for p in options)
            if abs(total - 1.0) > PROBABILITY_TOLERANCE:
                self._fail("probability_sum", CheckSeverity.ERROR, lhs, f"probabilities sum to {total:.6f}")
            for p in options:
                if p.prob < 0:
                    self._fail("probability_sum", CheckSeverity.ERROR, lhs, f"negative probability {p.prob}")

    def _check_undefined_symbol(self):
        g = self.grammar
        known = set(g.productions) | set(g.lexicon)
        if g.start not in g.productions:
            self._fail("undefined_symbol", CheckSeverity.ERROR, g.start, "start symbol has no productions")
        for lhs, options in g.productions.items():
            if lhs in g.lexicon:
                self._fail("undefined_symbol", CheckSeverity.ERROR, lhs, "symbol is both a nonterminal and a POS")
            for p in options:
                if not p.rhs:
                    self._fail("undefined_symbol", CheckSeverity.ERROR, lhs, "empty right-hand side")
                for s in p.rhs:
                    if s not in known:
                        self._fail("undefined_symbol", CheckSeverity.ERROR, lhs, f"{s} has no productions or lexicon")

    def _check_unreachable(self):
        g = self.grammar
        reached = {g.start}
        frontier = [g.start]
        while frontier:
            symbol = frontier.pop()
            for p in g.productions.get(symbol, []):
                for s in p.rhs:
                    if s not in reached:
                        reached.add(s)
                        frontier.append(s)
        for symbol in list(g.productions) + list(g.lexicon):
            if symbol not in reached:
                self._fail("unreachable", CheckSeverity.WARNING, symbol, "not reachable from the start symbol")

    def _check_word_order(self):
        allowed = {w.value for w in WordOrder}
        for layer in LAYERS:
            value = self.grammar.word_order.get(layer)
            if value not in allowed:
                self._fail("bad_word_order", CheckSeverity.ERROR, layer, f"word order {value!r} not in {sorted(allowed)}")

    def _check_sov_permutation(self):
        for lhs, options in self.grammar.productions.items():
            for p in options:
                if p.sov is not None and sorted(p.sov) != list(range(len(p.rhs))):
                    self._fail(
                        "bad_sov_permutation", CheckSeverity.ERROR, lhs,
                        f"{list(p.sov)} is not a permutation of {' '.join(p.rhs)}",
                    )

    def _check_lexicon_layers(self):
        for pos, layers in self.grammar.lexicon.items():
            missing = [layer for layer in LAYERS if layer not in layers]
            if missing:
                self._fail("missing_layer", CheckSeverity.ERROR, pos, f"no words for layer(s) {', '.join(missing)}")
                continue
            sizes = {layer: len(layers[layer]) for layer in LAYERS}
            if len(set(sizes.values())) != 1:
                self._fail("lexicon_misaligned", CheckSeverity.ERROR, pos, f"layer sizes differ: {sizes}")
            if any(size == 0 for size in sizes.values()):
                self._fail("empty_slot", CheckSeverity.ERROR, pos, "a layer has no words")

    def _check_duplicate_wordform(self):
        for layer in LAYERS:
            counts = Counter(w for layers in self.grammar.lexicon.values() for w in layers.get(layer, []))
            dupes = sorted(w for w, c in counts.items() if c > 1)
            if dupes:
                self._fail("duplicate_wordform", CheckSeverity.ERROR, layer, f"repeated words: {', '.join(dupes[:5])}")
        layer_words = {layer: {w for ls in self.grammar.lexicon.values() for w in ls.get(layer, [])} for layer in LAYERS}
        shared = layer_words["assisting"] & (layer_words["source"] | layer_words["target"])
        if shared:
            self._fail(
                "duplicate_wordform", CheckSeverity.WARNING, "assisting",
                f"words shared with source/target: {', '.join(sorted(shared)[:5])}",
            )

    def _check_recursion(self):
        g = self.grammar
        heights = min_heights(g)
        for symbol, h in heights.items():
            if symbol in g.productions and np.isinf(h):
                self._fail("unbounded_recursion", CheckSeverity.ERROR, symbol, "no finite derivation")
        start_height = heights.get(g.start, float("inf"))
        if np.isfinite(start_height) and start_height > g.max_depth:
            self._fail(
                "unbounded_recursion", CheckSeverity.ERROR, g.start,
                f"shortest derivation has height {int(start_height)} > max_depth {g.max_depth}",
            )

        # Expected-offspring matrix of the branching process over nonterminals.
        symbols = [s for s in g.productions if s not in g.lexicon]
        if not symbols:
            return
        index = {s: i for i, s in enumerate(symbols)}
        mean = np.zeros((len(symbols), len(symbols)))
        for lhs in symbols:
            for p in g.productions[lhs]:
                for s in p.rhs:
                    if s in index:
                        mean[index[lhs], index[s]] += p.prob
        radius = float(np.max(np.abs(np.linalg.eigvals(mean))))
        if radius >= 1.0:
            self._fail(
                "supercritical", CheckSeverity.WARNING, g.start,
                f"recursion mass {radius:.3f} >= 1; derivations rely on the max_depth cutoff",
            )


def validate_grammar(grammar: Grammar, name: str = "grammar") -> ValidationReport:
    return GrammarValidator(grammar).validate(name)
