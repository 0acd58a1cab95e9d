"""
Pre-ordering Engine
===================

Applies a RuleSet to constituency trees bottom-up so that the yield follows
the source language's word order, and runs that transform over treebank files.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from src.preorder.rules import ChildMatcher, ReorderRule, RuleSet
from src.treebank.tree import ParseTree, TreeParseError, parse_tree, raw_tokens, read_treebank, tree_yield

logger = logging.getLogger(__name__)


class ParseErrorPolicy(Enum):
    FAIL = "fail"
    PASSTHROUGH = "passthrough"


class ParseFailure(ValueError):
    def __init__(self, line: int, cause: Exception):
        super().__init__(f"line {line}: {cause}")
        self.line = line
        self.cause = cause


@dataclass
class PreorderSummary:
    reordered: int = 0
    unchanged: int = 0
    skipped: int = 0

    @property
    def total(self) -> int:
        return self.reordered + self.unchanged + self.skipped

    def to_dict(self) -> Dict[str, int]:
        return {"reordered": self.reordered, "unchanged": self.unchanged, "skipped": self.skipped}


def _matches(rule: ReorderRule, node: ParseTree, classes) -> bool:
    if not rule.parent.matches(node.label, classes):
        return False
    if len(node.children) != len(rule.child_pattern):
        return False
    for child, cm in zip(node.children, rule.child_pattern):
        if not _child_matches(cm, child, classes):
            return False
    return True


def _child_matches(cm: ChildMatcher, child: ParseTree, classes) -> bool:
    if not cm.matcher.matches(child.label, classes):
        return False
    if cm.nested is None:
        return True
    if child.is_leaf or len(child.children) != len(cm.nested):
        return False
    return all(m.matches(g.label, classes) for g, m in zip(child.children, cm.nested))


def _apply(rule: ReorderRule, node: ParseTree) -> ParseTree:
    raised: Dict[int, set] = {}
    for entry in rule.permutation:
        if entry.grandchild is not None:
            raised.setdefault(entry.child, set()).add(entry.grandchild)

    new_children: List[ParseTree] = []
    for entry in rule.permutation:
        child = node.children[entry.child]
        if entry.grandchild is not None:
            new_children.append(child.children[entry.grandchild])
            continue
        taken = raised.get(entry.child)
        if not taken:
            new_children.append(child)
            continue
        remnant = tuple(g for j, g in enumerate(child.children) if j not in taken)
        if remnant:
            new_children.append(ParseTree(label=child.label, children=remnant))
    return ParseTree(label=node.label, children=tuple(new_children))


def _first_rule(node: ParseTree, rules: RuleSet) -> Optional[ReorderRule]:
    for rule in rules.rules:
        if _matches(rule, node, rules.label_classes):
            return rule
    return None


def apply_rules(tree: ParseTree, rules: RuleSet) -> ParseTree:
    """Post-order pass; at each internal node the first matching rule fires once."""
    if not rules.rules:
        return tree

    # Iterative post-order: frames hold (node, rebuilt_children).
    stack: List[Tuple[ParseTree, List[ParseTree]]] = [(tree, [])]
    result: Optional[ParseTree] = None
    while stack:
        node, done = stack[-1]
        if node.is_leaf:
            stack.pop()
            rebuilt = node
        elif len(done) < len(node.children):
            stack.append((node.children[len(done)], []))
            continue
        else:
            stack.pop()
            rebuilt = node if all(a is b for a, b in zip(done, node.children)) else ParseTree(
                label=node.label, children=tuple(done)
            )
            rule = _first_rule(rebuilt, rules)
            if rule is not None:
                rebuilt = _apply(rule, rebuilt)
        if stack:
            stack[-1][1].append(rebuilt)
        else:
            result = rebuilt
    return result


def preorder_sentence(text: str, rules: RuleSet) -> List[str]:
    return tree_yield(apply_rules(parse_tree(text), rules))


def preorder_corpus(
    input_path,
    rules: RuleSet,
    output_path,
    on_parse_error: ParseErrorPolicy = ParseErrorPolicy.FAIL,
) -> PreorderSummary:
    """Write one reordered yield per treebank line, preserving line order."""
    on_parse_error = ParseErrorPolicy(on_parse_error)
    summary = PreorderSummary()
    lines: List[str] = []

    for line_no, text in read_treebank(input_path):
        try:
            tree = parse_tree(text)
        except TreeParseError as e:
            if on_parse_error == ParseErrorPolicy.FAIL:
                raise ParseFailure(line_no, e) from e
            logger.warning(f"Passing through malformed tree on line {line_no}: {e}")
            summary.skipped += 1
            lines.append(" ".join(raw_tokens(text)))
            continue

        before = tree_yield(tree)
        after = tree_yield(apply_rules(tree, rules))
        if after != before:
            summary.reordered += 1
        else:
            summary.unchanged += 1
        lines.append(" ".join(after))

    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with open(output_path, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line + "\n")

    logger.info(
        f"Pre-ordered {summary.total} trees with '{rules.name}': "
        f"{summary.reordered} reordered, {summary.unchanged} unchanged, {summary.skipped} skipped"
    )
    return summary
