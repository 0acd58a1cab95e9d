#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
QA Tests for the Synthetic Language Generator
=============================================

Covers:
- Grammar loading and validation diagnostics
- Deterministic generation and the per-example seeding contract
- Consistency between the generic rules and the grammar's SOV orders
- Corpus splits and child subsets
"""

import copy
import sys
from collections import Counter
from pathlib import Path

import pytest
import yaml

project_root = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(project_root))

from src.dictxlate.dictionary import load_dictionary, translate_word_by_word  # noqa: E402
from src.preorder.reorderer import apply_rules  # noqa: E402
from src.preorder.rules import load_rules  # noqa: E402
from src.synthlang.generator import (  # noqa: E402
    NOISE_SUFFIX,
    GeneratorConfig,
    SplitSizes,
    SyntheticCorpusGenerator,
    generate_corpus,
    split_corpus,
)
from src.synthlang.grammar import Grammar, GrammarInvalid, InsufficientData, load_grammar, min_heights  # noqa: E402
from src.synthlang.validator import CheckSeverity, validate_grammar  # noqa: E402
from src.treebank.tree import tree_yield  # noqa: E402

GRAMMAR_PATH = project_root / "config" / "grammar_default.yaml"


@pytest.fixture(scope="module")
def grammar():
    return load_grammar(GRAMMAR_PATH)


@pytest.fixture(scope="module")
def grammar_data():
    with open(GRAMMAR_PATH) as f:
        return yaml.safe_load(f)


def variant(data, mutate) -> Grammar:
    data = copy.deepcopy(data)
    mutate(data)
    return Grammar.from_dict(data)


# ============================================================================
# SECTION 1: GRAMMAR VALIDATION
# ============================================================================

def test_default_grammar_is_clean(grammar):
    report = validate_grammar(grammar, "default")
    assert report.ok
    assert report.diagnostics == [], report.summary()
    assert len(grammar.fingerprint) == 64
    print(report.summary())


def test_probability_sum_violation(grammar_data):
    def mutate(d):
        d["productions"]["NP"] = [
            {"rhs": ["DT", "NN"], "p": 0.5},
            {"rhs": ["DT", "JJ", "NN"], "p": 0.4},
        ]

    report = validate_grammar(variant(grammar_data, mutate))
    assert not report.ok
    assert report.has("probability_sum")
    np_result = [r for r in report.errors if r.check_name == "probability_sum"][0]
    assert np_result.subject == "NP"


def test_lexicon_misalignment(grammar_data):
    def mutate(d):
        d["lexicon"]["JJ"]["source"] = {"pattern": "j{i:02d}_s", "size": 9}

    report = validate_grammar(variant(grammar_data, mutate))
    assert report.has("lexicon_misaligned")
    assert not report.ok


def test_undefined_symbol_and_missing_layer(grammar_data):
    def mutate(d):
        d["productions"]["NP"].append({"rhs": ["DT", "ADV"], "p": 0.0})
        del d["lexicon"]["MD"]["target"]

    report = validate_grammar(variant(grammar_data, mutate))
    assert report.has("undefined_symbol")
    assert report.has("missing_layer")


def test_bad_sov_permutation_and_word_order(grammar_data):
    def mutate(d):
        d["productions"]["PP"][0]["sov"] = [1, 1]
        d["word_order"]["source"] = "VSO"

    report = validate_grammar(variant(grammar_data, mutate))
    assert report.has("bad_sov_permutation")
    assert report.has("bad_word_order")


def test_duplicate_wordform(grammar_data):
    def mutate(d):
        d["lexicon"]["JJ"]["assisting"][0] = "dog"

    report = validate_grammar(variant(grammar_data, mutate))
    dupes = [r for r in report.diagnostics if r.check_name == "duplicate_wordform"]
    assert dupes and dupes[0].severity == CheckSeverity.ERROR


def test_unbounded_recursion(grammar_data):
    def mutate(d):
        d["productions"]["NP"] = [{"rhs": ["NP", "PP"], "p": 1.0}]

    g = variant(grammar_data, mutate)
    assert min_heights(g)["NP"] == float("inf")
    assert validate_grammar(g).has("unbounded_recursion")


def test_supercritical_recursion_is_a_warning(grammar_data):
    def mutate(d):
        d["productions"]["NP"] = [
            {"rhs": ["DT", "NN"], "p": 0.4},
            {"rhs": ["NP", "PP"], "p": 0.6},
        ]

    report = validate_grammar(variant(grammar_data, mutate))
    assert report.has("supercritical")
    assert report.ok, "a supercritical grammar is still usable under max_depth"


def test_generator_rejects_invalid_grammar(grammar_data):
    def mutate(d):
        d["productions"]["S"][0]["p"] = 0.5

    with pytest.raises(GrammarInvalid) as info:
        SyntheticCorpusGenerator(variant(grammar_data, mutate))
    assert info.value.report is not None and not info.value.report.ok


# ============================================================================
# SECTION 2: GENERATION
# ============================================================================

def test_zero_examples_rejected(grammar):
    with pytest.raises(GrammarInvalid):
        generate_corpus(grammar, 0, seed=1)


def test_generation_is_deterministic(grammar):
    a, _ = generate_corpus(grammar, 50, seed=5)
    b, _ = generate_corpus(grammar, 50, seed=5)
    c, _ = generate_corpus(grammar, 50, seed=6)
    assert [e.source for e in a] == [e.source for e in b]
    assert [e.target for e in a] == [e.target for e in b]
    assert [e.source for e in a] != [e.source for e in c]


def test_examples_are_independently_seeded(grammar):
    generator = SyntheticCorpusGenerator(grammar, GeneratorConfig(n_examples=20, seed=3))
    examples = generator.generate()
    assert generator.sample(17).target == examples[17].target


def test_layers_are_parallel(grammar):
    examples, _ = generate_corpus(grammar, 200, seed=2, noise=0.0)
    for ex in examples:
        assert len(ex.assisting_tokens) == len(ex.source_tokens) == len(ex.target_tokens)
        assert tree_yield(ex.assisting_tree) == ex.assisting_tokens
        assert all(t.endswith("_t") for t in ex.target_tokens)


def test_noise_marks_source_tokens(grammar):
    examples, _ = generate_corpus(grammar, 300, seed=2, noise=0.2)
    noisy = sum(t.endswith(NOISE_SUFFIX) for ex in examples for t in ex.source_tokens)
    total = sum(len(ex.source_tokens) for ex in examples)
    assert 0.1 < noisy / total < 0.3, f"noise rate {noisy / total:.3f}"
    assert not any(t.endswith(NOISE_SUFFIX) for ex in examples for t in ex.target_tokens)


def test_generic_rules_reproduce_source_order(grammar):
    rules = load_rules(project_root / "rules" / "generic.rules")
    examples, _ = generate_corpus(grammar, 1000, seed=11)
    mismatches = [ex.index for ex in examples if tree_yield(apply_rules(ex.assisting_tree, rules)) != ex.pivot_tokens]
    assert not mismatches, f"{len(mismatches)} examples disagree, first {mismatches[:5]}"
    print("✓ Generic rules reproduce the SOV pivot order on 1000 examples")


def test_dictionary_pivot_matches_pivot_tokens(grammar, tmp_path):
    examples, files = generate_corpus(grammar, 100, seed=4, noise=0.0, out_dir=tmp_path)
    dictionary = load_dictionary(files["dictionary"])
    for ex in examples:
        assert translate_word_by_word(ex.source_tokens, dictionary).tokens == ex.pivot_tokens
        assert Counter(ex.pivot_tokens) == Counter(ex.assisting_tokens)
    written = files["source"].read_text(encoding="utf-8").splitlines()
    assert written == [ex.source for ex in examples]


# ============================================================================
# SECTION 3: SPLITS
# ============================================================================

def test_split_sizes_and_disjointness(grammar):
    examples, _ = generate_corpus(grammar, 120, seed=8)
    sizes = SplitSizes(parent_train=60, child_train_max=30, dev=15, test=15)
    splits = split_corpus(examples, sizes, seed=1)
    assert splits.sizes() == {"parent_train": 60, "child_train_max": 30, "dev": 15, "test": 15}
    groups = [splits.parent_train, splits.child_pool, splits.dev, splits.test]
    indices = [ex.index for group in groups for ex in group]
    assert len(indices) == len(set(indices)) == 120


def test_child_subsets_are_nested(grammar):
    examples, _ = generate_corpus(grammar, 60, seed=8)
    splits = split_corpus(examples, SplitSizes(parent_train=20, child_train_max=20, dev=10, test=10), seed=1)
    small, large = splits.child_subset(5), splits.child_subset(15)
    assert large[:5] == small
    assert splits.child_subset(0) == []
    with pytest.raises(InsufficientData):
        splits.child_subset(21)


def test_split_needs_enough_examples(grammar):
    examples, _ = generate_corpus(grammar, 10, seed=8)
    with pytest.raises(InsufficientData):
        split_corpus(examples, SplitSizes(parent_train=8, child_train_max=2, dev=1, test=1), seed=1)
