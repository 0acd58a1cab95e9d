"""
Reordering Rule Files
=====================

Line-based DSL for declarative child-permutation rules:

    # comment
    class VERB = VB VBD VBZ VBP VBN VBG
    VP : @VERB NP -> 1 0
    VP : @AUX VP(NP @VERB) -> 1.0 0 1

A matcher is a label, ``@CLASS`` (or a bare name that is a defined class) or
``*``. One level of nesting, ``VP(NP @VERB)``, lets the permutation raise a
grandchild with ``i.j``; bare indices must form a permutation of 0..k-1.
Rules keep file order; the first matching rule wins.
"""

import hashlib
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Tuple


_CLASS_LINE = re.compile(r"^class\s+(\S+)\s*=\s*(.*)$")
_MATCHER_TOKEN = re.compile(r"[^\s(]+(?:\([^)]*\))?")
_NESTED = re.compile(r"^([^\s()]+)\(([^()]*)\)$")
_INDEX = re.compile(r"^(\d+)(?:\.(\d+))?$")


class RuleFileError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class RuleSyntaxError(RuleFileError):
    pass


class NotAPermutation(RuleFileError):
    pass


class UnknownClass(RuleFileError):
    def __init__(self, line: int, name: str):
        super().__init__(f"unknown label class {name!r}", line)
        self.name = name


class MatcherKind(Enum):
    LABEL = "label"
    CLASS = "class"
    ANY = "any"


@dataclass(frozen=True)
class LabelMatcher:
    kind: MatcherKind
    value: str = "*"

    def matches(self, label: str, classes: Dict[str, FrozenSet[str]]) -> bool:
        if self.kind == MatcherKind.ANY:
            return True
        if self.kind == MatcherKind.CLASS:
            return label in classes[self.value]
        return label == self.value

    def __str__(self) -> str:
        if self.kind == MatcherKind.ANY:
            return "*"
        if self.kind == MatcherKind.CLASS:
            return f"@{self.value}"
        return self.value


@dataclass(frozen=True)
class ChildMatcher:
    matcher: LabelMatcher
    nested: Optional[Tuple[LabelMatcher, ...]] = None

    def __str__(self) -> str:
        if self.nested is None:
            return str(self.matcher)
        return f"{self.matcher}({' '.join(str(m) for m in self.nested)})"


@dataclass(frozen=True)
class PermEntry:
    """Index of a matched child, or of a grandchild raised out of it."""

    child: int
    grandchild: Optional[int] = None

    def __str__(self) -> str:
        return str(self.child) if self.grandchild is None else f"{self.child}.{self.grandchild}"


@dataclass(frozen=True)
class ReorderRule:
    parent: LabelMatcher
    child_pattern: Tuple[ChildMatcher, ...]
    permutation: Tuple[PermEntry, ...]
    line: int = 0

    def __str__(self) -> str:
        pattern = " ".join(str(c) for c in self.child_pattern)
        perm = " ".join(str(p) for p in self.permutation)
        return f"{self.parent} : {pattern} -> {perm}"


@dataclass
class RuleSet:
    name: str
    label_classes: Dict[str, FrozenSet[str]] = field(default_factory=dict)
    rules: List[ReorderRule] = field(default_factory=list)
    fingerprint: str = ""

    def __len__(self) -> int:
        return len(self.rules)

    @classmethod
    def empty(cls, name: str = "none") -> "RuleSet":
        return cls(name=name, fingerprint=hashlib.sha256(b"").hexdigest())


def _parse_matcher(text: str, classes: Dict[str, FrozenSet[str]], line: int) -> LabelMatcher:
    if text == "*":
        return LabelMatcher(MatcherKind.ANY)
    if text.startswith("@"):
        name = text[1:]
        if name not in classes:
            raise UnknownClass(line, name)
        return LabelMatcher(MatcherKind.CLASS, name)
    if text in classes:
        return LabelMatcher(MatcherKind.CLASS, text)
    return LabelMatcher(MatcherKind.LABEL, text)


def _parse_child(text: str, classes: Dict[str, FrozenSet[str]], line: int) -> ChildMatcher:
    nested = _NESTED.match(text)
    if not nested:
        if "(" in text or ")" in text:
            raise RuleSyntaxError(f"malformed matcher {text!r}", line)
        return ChildMatcher(_parse_matcher(text, classes, line))
    inner = nested.group(2).split()
    if not inner:
        raise RuleSyntaxError(f"empty nested pattern in {text!r}", line)
    return ChildMatcher(
        _parse_matcher(nested.group(1), classes, line),
        tuple(_parse_matcher(t, classes, line) for t in inner),
    )


def _parse_permutation(text: str, pattern: Tuple[ChildMatcher, ...], line: int) -> Tuple[PermEntry, ...]:
    entries = []
    for tok in text.split():
        m = _INDEX.match(tok)
        if not m:
            raise RuleSyntaxError(f"bad permutation index {tok!r}", line)
        grandchild = int(m.group(2)) if m.group(2) is not None else None
        entries.append(PermEntry(int(m.group(1)), grandchild))

    k = len(pattern)
    bare = sorted(e.child for e in entries if e.grandchild is None)
    if bare != list(range(k)):
        raise NotAPermutation(f"indices {' '.join(str(e) for e in entries)} are not a permutation of 0..{k - 1}", line)

    raised = [e for e in entries if e.grandchild is not None]
    if len(set(raised)) != len(raised):
        raise NotAPermutation("a grandchild is raised twice", line)
    for e in raised:
        if e.child >= k or pattern[e.child].nested is None:
            raise NotAPermutation(f"{e} does not address a nested pattern", line)
        if e.grandchild >= len(pattern[e.child].nested):
            raise NotAPermutation(f"{e} is outside the nested pattern", line)
    return tuple(entries)


def parse_rules(text: str, name: str = "rules") -> RuleSet:
    """Parse rule-file text; classes may be defined anywhere in the file."""
    classes: Dict[str, FrozenSet[str]] = {}
    rule_lines: List[Tuple[int, str]] = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        class_match = _CLASS_LINE.match(line)
        if class_match:
            labels = class_match.group(2).split()
            if not labels:
                raise RuleSyntaxError(f"class {class_match.group(1)!r} has no labels", line_no)
            classes[class_match.group(1)] = frozenset(labels)
        else:
            rule_lines.append((line_no, line))

    rules = []
    for line_no, line in rule_lines:
        if line.count("->") != 1 or line.count(":") != 1:
            raise RuleSyntaxError(f"expected 'PARENT : M1 ... Mk -> p1 ... pk', got {line!r}", line_no)
        lhs, perm_text = line.split("->")
        parent_text, pattern_text = lhs.split(":")
        parent_tokens = parent_text.split()
        if len(parent_tokens) != 1:
            raise RuleSyntaxError(f"expected one parent matcher, got {parent_text.strip()!r}", line_no)

        pattern_tokens = _MATCHER_TOKEN.findall(pattern_text)
        if "".join(pattern_tokens).replace(" ", "") != pattern_text.replace(" ", "").strip():
            raise RuleSyntaxError(f"malformed child pattern {pattern_text.strip()!r}", line_no)
        if len(pattern_tokens) < 2:
            raise RuleSyntaxError("a rule needs at least two child matchers", line_no)

        if "(" in parent_tokens[0] or ")" in parent_tokens[0]:
            raise RuleSyntaxError("the parent matcher cannot be nested", line_no)
        parent = _parse_matcher(parent_tokens[0], classes, line_no)
        pattern = tuple(_parse_child(t, classes, line_no) for t in pattern_tokens)
        permutation = _parse_permutation(perm_text, pattern, line_no)
        rules.append(ReorderRule(parent, pattern, permutation, line_no))

    fingerprint = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return RuleSet(name=name, label_classes=classes, rules=rules, fingerprint=fingerprint)


def load_rules(path) -> RuleSet:
    """Load and validate a rule file; the rule set is named after the file stem."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_rules(text, name=path.stem)
