"""
Bracketed Constituency Trees
============================

Parse, validate and serialize Penn-Treebank style bracketings such as
``(S (NP (NNP Anurag)) (VP (MD will) (VP (VB meet) (NP (NNP Thakur)))))``.

POS tags are ordinary internal labels; a terminal is a leaf node whose label
mirrors its token. Trees are immutable values and safe to share across threads.
"""

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Tuple


_TOKEN_PATTERN = re.compile(r"\(|\)|[^()\s]+")
_BAD_SYMBOL = re.compile(r"[\s()]")


class TreeParseError(ValueError):
    """Raised when a bracketed string is not a single well-formed tree."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnbalancedParens(TreeParseError):
    pass


class EmptyNode(TreeParseError):
    pass


class TrailingInput(TreeParseError):
    pass


def _check_symbol(value: str, what: str) -> None:
    if not value or _BAD_SYMBOL.search(value):
        raise ValueError(f"{what} must be a non-empty string without whitespace or parentheses: {value!r}")


@dataclass(frozen=True)
class ParseTree:
    """Labeled ordered tree; a node has children or a token, never both."""

    label: str
    children: Tuple["ParseTree", ...] = field(default_factory=tuple)
    token: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.children, tuple):
            object.__setattr__(self, "children", tuple(self.children))
        _check_symbol(self.label, "label")
        if self.token is not None:
            _check_symbol(self.token, "token")
            if self.children:
                raise ValueError(f"leaf {self.token!r} cannot have children")
        elif not self.children:
            raise ValueError(f"internal node {self.label!r} needs at least one child")

    @classmethod
    def leaf(cls, token: str) -> "ParseTree":
        return cls(label=token, token=token)

    @property
    def is_leaf(self) -> bool:
        return self.token is not None

    def __str__(self) -> str:
        return serialize_tree(self)


def _lex(text: str) -> Iterator[Tuple[str, int]]:
    for match in _TOKEN_PATTERN.finditer(text):
        yield match.group(), match.start()


def parse_tree(text: str) -> ParseTree:
    """Parse a single bracketed expression ``(LABEL child ...)``."""
    tokens = list(_lex(text))
    if not tokens:
        raise EmptyNode("empty input", 0)

    first, first_pos = tokens[0]
    if first == ")":
        raise UnbalancedParens("unexpected ')' before any '('", first_pos)
    if first != "(":
        raise TrailingInput(f"expected '(' but found {first!r}", first_pos)

    # Each frame: [label, children, open_position]
    stack: List[list] = []
    root: Optional[ParseTree] = None
    i = 0
    while i < len(tokens):
        tok, pos = tokens[i]
        if root is not None:
            if tok == ")":
                raise UnbalancedParens("unexpected ')'", pos)
            raise TrailingInput(f"unexpected {tok!r} after the tree", pos)

        if tok == "(":
            if i + 1 >= len(tokens):
                raise UnbalancedParens("unclosed '('", pos)
            label, label_pos = tokens[i + 1]
            if label in ("(", ")"):
                raise EmptyNode("node without a label", label_pos)
            stack.append([label, [], pos])
            i += 2
            continue

        if tok == ")":
            if not stack:
                raise UnbalancedParens("unexpected ')'", pos)
            label, children, open_pos = stack.pop()
            if not children:
                raise EmptyNode(f"node {label!r} has no children", open_pos)
            node = ParseTree(label=label, children=tuple(children))
            if stack:
                stack[-1][1].append(node)
            else:
                root = node
            i += 1
            continue

        if not stack:
            raise TrailingInput(f"unexpected {tok!r} after the tree", pos)
        stack[-1][1].append(ParseTree.leaf(tok))
        i += 1

    if stack:
        raise UnbalancedParens(f"unclosed '(' for node {stack[-1][0]!r}", stack[-1][2])
    return root


def serialize_tree(tree: ParseTree) -> str:
    """Canonical single-line bracketing with single-space separators."""
    if tree.is_leaf:
        return tree.token
    parts: List[str] = []
    # Explicit stack of (node, next_child_index) keeps deep trees off the recursion limit.
    stack: List[list] = [[tree, 0]]
    parts.append(f"({tree.label}")
    while stack:
        frame = stack[-1]
        node, idx = frame
        if idx == len(node.children):
            parts.append(")")
            stack.pop()
            continue
        frame[1] += 1
        child = node.children[idx]
        if child.is_leaf:
            parts.append(f" {child.token}")
        else:
            parts.append(f" ({child.label}")
            stack.append([child, 0])
    return "".join(parts)


def tree_yield(tree: ParseTree) -> List[str]:
    """Left-to-right leaf tokens."""
    tokens: List[str] = []
    stack = [tree]
    while stack:
        node = stack.pop()
        if node.is_leaf:
            tokens.append(node.token)
        else:
            stack.extend(reversed(node.children))
    return tokens


def raw_tokens(text: str) -> List[str]:
    """Best-effort terminal tokens from a possibly malformed bracketing.

    A symbol directly after '(' is taken as a label; everything else that is
    not a parenthesis is a terminal.
    """
    tokens: List[str] = []
    previous = None
    for tok, _ in _lex(text):
        if tok not in ("(", ")") and previous != "(":
            tokens.append(tok)
        previous = tok
    return tokens


def read_treebank(path) -> Iterator[Tuple[int, str]]:
    """Yield (line_number, text) for each line of a treebank file (1-based)."""
    with open(Path(path), "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            yield line_no, line.rstrip("\n")
