#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
QA Tests for Bracketed Tree Handling
====================================

Parsing, canonical serialization, yields and the parse error contract.
"""

import sys
from pathlib import Path

import pytest

project_root = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(project_root))

from src.treebank.tree import (  # noqa: E402
    EmptyNode,
    ParseTree,
    TrailingInput,
    TreeParseError,
    UnbalancedParens,
    parse_tree,
    raw_tokens,
    read_treebank,
    serialize_tree,
    tree_yield,
)

MODAL_CLAUSE = "(S (NP (NNP Anurag)) (VP (MD will) (VP (VB meet) (NP (NNP Thakur)))))"


# ============================================================================
# SECTION 1: PARSING AND SERIALIZATION
# ============================================================================

def test_parse_and_yield():
    tree = parse_tree(MODAL_CLAUSE)
    assert tree.label == "S"
    assert len(tree.children) == 2
    assert tree_yield(tree) == ["Anurag", "will", "meet", "Thakur"]
    print("✓ Modal clause tree parsed")


def test_serialize_is_canonical():
    messy = "  (S\t(NP (NNP Anurag) )\n (VP (MD will) (VP (VB meet) (NP (NNP Thakur))) ) )  "
    assert serialize_tree(parse_tree(messy)) == MODAL_CLAUSE, "whitespace should normalize to single spaces"
    assert serialize_tree(parse_tree(MODAL_CLAUSE)) == MODAL_CLAUSE
    print("✓ Serialization is canonical")


def test_leaf_and_preterminal_structure():
    tree = parse_tree("(NP (DT the) (NN dog))")
    dt = tree.children[0]
    assert not dt.is_leaf
    assert dt.children[0].is_leaf and dt.children[0].token == "the"
    assert str(tree) == "(NP (DT the) (NN dog))"


def test_unicode_tokens_survive():
    tree = parse_tree("(S (NP (NNP अनुराग)) (VP (VB मिलेंगे)))")
    assert tree_yield(tree) == ["अनुराग", "मिलेंगे"]


def test_deep_tree_does_not_hit_recursion_limit():
    depth = 5000
    text = "(X " * depth + "w" + ")" * depth
    tree = parse_tree(text)
    assert tree_yield(tree) == ["w"]
    assert serialize_tree(tree) == text
    print(f"✓ Depth {depth} handled iteratively")


def test_trees_are_values():
    a = parse_tree("(NP (DT the) (NN dog))")
    b = parse_tree("(NP (DT the) (NN dog))")
    assert a == b
    assert hash(a) == hash(b)
    with pytest.raises(ValueError):
        ParseTree(label="NP", children=())


# ============================================================================
# SECTION 2: ERROR CONTRACT
# ============================================================================

@pytest.mark.parametrize(
    "text,error",
    [
        ("(S (NP (NN dog))", UnbalancedParens),
        ("(S (NP (NN dog))))", UnbalancedParens),
        ("(S ())", EmptyNode),
        ("(NP)", EmptyNode),
        ("", EmptyNode),
        ("(S (NN a)) (S (NN b))", TrailingInput),
        ("(S (NN a)) extra", TrailingInput),
        (") (S (NN a))", UnbalancedParens),
        ("the dog barks", TrailingInput),
    ],
)
def test_parse_errors(text, error):
    with pytest.raises(error) as info:
        parse_tree(text)
    assert isinstance(info.value, TreeParseError)
    assert type(info.value) is not TreeParseError, "callers match on the named subclasses"
    assert info.value.position >= 0


def test_error_position_points_at_problem():
    with pytest.raises(TrailingInput) as info:
        parse_tree("(S (NN a)) extra")
    assert info.value.position == len("(S (NN a)) ")


# ============================================================================
# SECTION 3: FILE HELPERS
# ============================================================================

def test_raw_tokens_from_malformed_line():
    assert raw_tokens("(S (NP (NN dog)) (VP (VB runs)") == ["dog", "runs"]


def test_read_treebank_numbers_lines(tmp_path):
    path = tmp_path / "tiny.trees"
    path.write_text("(S (NN a))\n(S (NN b))\n", encoding="utf-8")
    lines = list(read_treebank(path))
    assert lines == [(1, "(S (NN a))"), (2, "(S (NN b))")]
