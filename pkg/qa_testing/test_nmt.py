#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
QA Tests for the Seq2Seq Model
==============================

Covers:
- Vocabulary construction and persistence
- Parameter layout, initialization and checkpoint round-trip
- Forward pass sanity (initial loss, attention normalization, masking)
- Finite-difference gradient check
- Training schedule, overfitting a tiny corpus, transfer and fine-tuning
- Greedy decoding
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

project_root = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(project_root))

from src.nmt.decoder import decode_corpus, greedy_decode  # noqa: E402
from src.nmt import model as model_module  # noqa: E402
from src.nmt.model import (  # noqa: E402
    IdOutOfRange,
    IncompatibleDims,
    InvalidDims,
    ModelDims,
    Seq2SeqModel,
    backward,
    encode_pair,
    forward_loss,
    gradient_check,
    init_model,
    make_batch,
    named_views,
    parameter_count,
)
from src.nmt.trainer import InvalidTrainConfig, TrainConfig, evaluate_loss, finetune, train, transfer_init  # noqa: E402
from src.nmt.vocab import BOS, EOS, PAD, SPECIALS, UNK, EmptyCorpus, Vocabulary, build_vocab  # noqa: E402

TOY_PAIRS = [
    ("a b c", "x y z"),
    ("b c", "y z"),
    ("c a", "z x"),
    ("a a b", "x x y"),
    ("c b a", "z y x"),
    ("b", "y"),
    ("a c", "x z"),
    ("c c b", "z z y"),
]


def toy_vocabs():
    src = build_vocab([s for s, _ in TOY_PAIRS])
    tgt = build_vocab([t for _, t in TOY_PAIRS])
    return src, tgt


def toy_model(emb=6, hidden=8, seed=0, precision="float64", **kwargs) -> Seq2SeqModel:
    src, tgt = toy_vocabs()
    dims = ModelDims(len(src), len(tgt), emb_dim=emb, hidden_dim=hidden, **kwargs)
    return init_model(dims, src, tgt, seed=seed, precision=precision)


def toy_batch(model: Seq2SeqModel, pairs=TOY_PAIRS):
    encoded = [encode_pair(model, s.split(), t.split()) for s, t in pairs]
    return make_batch([s for s, _ in encoded], [t for _, t in encoded])


def token_pairs(pairs):
    return [(s.split(), t.split()) for s, t in pairs]


# ============================================================================
# SECTION 1: VOCABULARY
# ============================================================================

def test_vocab_order_and_specials():
    vocab = build_vocab(["a a b"])
    assert vocab.itos == list(SPECIALS) + ["a", "b"]
    assert (PAD, BOS, EOS, UNK) == (0, 1, 2, 3)
    assert vocab.encode(["a", "zzz"], add_bos=True, add_eos=True) == [BOS, 4, UNK, EOS]
    print("✓ Vocabulary ids: " + ", ".join(f"{t}={i}" for i, t in enumerate(vocab.itos)))


def test_vocab_ties_break_lexicographically():
    vocab = build_vocab(["b a c", "c"])
    assert vocab.itos[4:] == ["c", "a", "b"]


def test_vocab_min_frequency_and_max_size():
    sentences = ["a a a b b c"]
    assert build_vocab(sentences, min_frequency=2).itos[4:] == ["a", "b"]
    assert build_vocab(sentences, max_size=1).itos[4:] == ["a"]


def test_vocab_decode_stops_at_eos():
    vocab = build_vocab(["a b"])
    assert vocab.decode([BOS, 4, PAD, 5, EOS, 4]) == ["a", "b"]


def test_vocab_errors():
    with pytest.raises(EmptyCorpus):
        build_vocab([])
    with pytest.raises(EmptyCorpus):
        build_vocab(["", "<unk>"])


def test_vocab_save_load(tmp_path):
    vocab = build_vocab(["a a b c"], min_frequency=1, max_size=2)
    vocab.save(tmp_path / "v.vocab")
    loaded = Vocabulary.load(tmp_path / "v.vocab")
    assert loaded.itos == vocab.itos
    assert loaded.freqs == vocab.freqs
    assert loaded.max_size == 2
    assert loaded.fingerprint == vocab.fingerprint


# ============================================================================
# SECTION 2: PARAMETERS AND CHECKPOINTS
# ============================================================================

def test_parameter_count_formula():
    assert parameter_count(ModelDims(100, 100, emb_dim=8, hidden_dim=16)) == 8996


def test_invalid_dims():
    with pytest.raises(InvalidDims):
        ModelDims(10, 10, cell="lstm").validate()
    with pytest.raises(InvalidDims):
        ModelDims(10, 10, hidden_dim=0).validate()
    with pytest.raises(InvalidDims):
        ModelDims(2, 10).validate()


def test_init_is_deterministic():
    a, b, c = toy_model(seed=4), toy_model(seed=4), toy_model(seed=5)
    assert np.array_equal(a.params, b.params)
    assert not np.array_equal(a.params, c.params)
    assert np.abs(a.params).max() <= 0.1


def test_views_share_the_flat_vector():
    model = toy_model()
    model.params[:] = 0.0
    assert not model.p["out_W"].any()


def test_checkpoint_round_trip(tmp_path):
    model = toy_model(precision="float32", enc_layers=2, input_feeding=True)
    model.save(tmp_path / "ckpt")
    loaded = Seq2SeqModel.load(tmp_path / "ckpt")
    assert loaded.dims == model.dims
    assert loaded.precision == "float32"
    assert np.array_equal(loaded.params, model.params)
    assert loaded.manifest() == model.manifest()


# ============================================================================
# SECTION 3: FORWARD PASS
# ============================================================================

def test_initial_loss_near_uniform():
    model = toy_model()
    loss, _ = forward_loss(model, toy_batch(model))
    assert abs(loss - math.log(model.dims.tgt_vocab_size)) < 0.2, f"loss {loss}"


def test_attention_rows_sum_to_one_and_respect_padding():
    model = toy_model()
    batch = toy_batch(model)
    _, cache = forward_loss(model, batch)
    attention = cache.attention
    assert attention.shape == (batch.src.shape[0], batch.tgt.shape[1] - 1, batch.src.shape[1])
    assert np.allclose(attention.sum(axis=-1), 1.0)
    padded = batch.src == PAD
    assert np.all(attention[np.broadcast_to(padded[:, None, :], attention.shape)] == 0.0)


def test_all_pad_targets_give_zero_gradient():
    model = toy_model()
    batch = make_batch([[4, EOS]], [[BOS, PAD, PAD]])
    loss, cache = forward_loss(model, batch)
    assert loss == 0.0
    assert not backward(model, cache).any()


def test_out_of_range_ids():
    model = toy_model()
    with pytest.raises(IdOutOfRange):
        forward_loss(model, make_batch([[999, EOS]], [[BOS, 4, EOS]]))


# ============================================================================
# SECTION 4: GRADIENT CHECK
# ============================================================================

@pytest.mark.parametrize(
    "kwargs",
    [
        {},
        {"enc_layers": 2, "dec_layers": 2, "input_feeding": True},
    ],
)
def test_gradient_check(kwargs):
    model = toy_model(emb=4, hidden=5, seed=1, **kwargs)
    result = gradient_check(model, toy_batch(model, TOY_PAIRS[:4]), n_coords=60, h=1e-5, seed=0)
    assert result.coords.size >= 50
    assert result.zero_mismatches == 0
    assert result.max_rel_error < 1e-4, f"max relative error {result.max_rel_error:.2e}"
    print(f"✓ Gradient check {kwargs or 'base'}: max rel error {result.max_rel_error:.2e}")


def test_gradient_check_samples_every_block():
    model = toy_model(emb=4, hidden=5, seed=1)
    result = gradient_check(model, toy_batch(model, TOY_PAIRS[:4]), n_coords=model.num_params, seed=0)
    assert result.coords.size == model.num_params
    assert np.array_equal(result.coords, np.arange(model.num_params))
    assert result.zero_mismatches == 0


def test_gradient_check_catches_a_dropped_encoder_gradient(monkeypatch):
    real_backward = model_module.backward

    def encoder_blind_backward(model, cache):
        grad = real_backward(model, cache)
        for name, view in named_views(grad, model.dims).items():
            if name.startswith("enc"):
                view[...] = 0.0
        return grad

    monkeypatch.setattr(model_module, "backward", encoder_blind_backward)
    model = toy_model(emb=4, hidden=5, seed=1)
    result = gradient_check(model, toy_batch(model, TOY_PAIRS[:4]), n_coords=60, seed=0)
    assert result.zero_mismatches > 0
    assert result.max_rel_error == pytest.approx(1.0)
    print(f"✓ Zeroed encoder gradient flagged at {result.zero_mismatches} coordinates")


# ============================================================================
# SECTION 5: TRAINING, TRANSFER, FINE-TUNING
# ============================================================================

def quick_config(**overrides) -> TrainConfig:
    values = dict(initial_lr=1.0, lr_decay=0.5, lr_floor=1e-3, batch_size=4, dropout=0.0, max_epochs=40, seed=0)
    values.update(overrides)
    return TrainConfig(**values)


@pytest.fixture(scope="module")
def memorized():
    """Desk dims trained on 32 sentences used as both train and dev."""
    pairs = token_pairs(TOY_PAIRS * 4)
    model = toy_model(emb=64, hidden=64)
    config = quick_config(batch_size=16, max_epochs=200, decay_patience=10)
    trained, history = train(model, pairs, pairs, config)
    return model, trained, history, pairs


def test_overfits_tiny_corpus(memorized):
    model, trained, history, pairs = memorized
    start = evaluate_loss(model, pairs)
    end = evaluate_loss(trained, pairs)
    assert history.epochs <= 200
    assert end < 0.1, f"loss went from {start:.3f} to {end:.3f} (final lr {history.final_lr:.4g})"
    assert history.best_dev_loss == pytest.approx(end)
    assert not np.array_equal(model.params, trained.params), "input model must not be modified in place"
    print(f"✓ Overfit 32 sentences: {start:.3f} -> {end:.3f} in {history.epochs} epochs")


def test_learning_rate_waits_for_patience():
    pairs = token_pairs(TOY_PAIRS)
    dev = token_pairs([("a b", "z z"), ("c", "x")])
    patience = 2
    _, history = train(toy_model(), pairs, dev, quick_config(max_epochs=15, initial_lr=2.0, decay_patience=patience))
    frame = history.to_frame()
    best = evaluate_loss(toy_model(), dev)
    stalled = 0
    for i in range(len(frame) - 1):
        if frame.loc[i, "dev_loss"] < best:
            best, stalled = frame.loc[i, "dev_loss"], 0
        else:
            stalled += 1
        decayed = stalled >= patience
        if decayed:
            stalled = 0
        expected = frame.loc[i, "lr"] * (0.5 if decayed else 1.0)
        assert frame.loc[i + 1, "lr"] == pytest.approx(expected), f"epoch {i + 1}"
    assert list(frame.columns) == ["epoch", "train_loss", "dev_loss", "lr"]


def test_learning_rate_decays_every_epoch_after_start():
    pairs = token_pairs(TOY_PAIRS)
    config = quick_config(max_epochs=30, lr_floor=0.01, start_decay_at=3, decay_patience=100)
    _, history = train(toy_model(), pairs, pairs, config)
    assert history.lrs() == pytest.approx([1.0, 1.0, 1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625])
    assert history.final_lr == pytest.approx(0.0078125)
    print(f"✓ Exponential tail stopped at epoch {history.epochs} below the floor")


@pytest.mark.parametrize(
    "overrides",
    [
        {"lr_decay": 1.0},
        {"lr_floor": 2.0},
        {"decay_patience": 0},
        {"start_decay_at": 0},
        {"dropout": 1.0},
    ],
)
def test_invalid_train_config(overrides):
    with pytest.raises(InvalidTrainConfig):
        quick_config(**overrides).validate()


def test_training_is_deterministic():
    pairs = token_pairs(TOY_PAIRS)
    config = quick_config(max_epochs=3, dropout=0.2)
    a, _ = train(toy_model(), pairs, pairs, config)
    b, _ = train(toy_model(), pairs, pairs, config)
    assert np.array_equal(a.params, b.params)


def test_train_rejects_empty_corpus():
    with pytest.raises(EmptyCorpus):
        train(toy_model(), [], [], quick_config())


def test_transfer_with_same_vocab_is_identity():
    parent = toy_model(seed=3)
    child = transfer_init(parent, parent.src_vocab, parent.tgt_vocab)
    assert np.array_equal(child.params, parent.params)
    assert child.params is not parent.params


def test_transfer_with_extra_token():
    parent = toy_model(seed=3)
    src = build_vocab([s for s, _ in TOY_PAIRS] + ["a b c newword"])
    child = transfer_init(parent, src, parent.tgt_vocab, seed=9)
    assert len(child.src_vocab) == len(parent.src_vocab) + 1
    for token in ("a", "b", "c"):
        assert np.array_equal(child.p["src_emb"][src.stoi[token]], parent.p["src_emb"][parent.src_vocab.stoi[token]])
    assert np.array_equal(child.p["dec0_Wh"], parent.p["dec0_Wh"])
    assert np.array_equal(child.p["out_W"], parent.p["out_W"])


def test_transfer_rejects_other_architecture():
    parent = toy_model()
    other = ModelDims(len(parent.src_vocab), len(parent.tgt_vocab), emb_dim=6, hidden_dim=9)
    with pytest.raises(IncompatibleDims):
        transfer_init(parent, parent.src_vocab, parent.tgt_vocab, dims=other)


def test_finetune_without_data_returns_parent_weights():
    parent = toy_model(seed=2)
    child, history = finetune(parent, [], [], quick_config())
    assert np.array_equal(child.params, parent.params)
    assert history.epochs == 0


# ============================================================================
# SECTION 6: DECODING
# ============================================================================

def test_decoding_learns_the_toy_mapping(memorized):
    _, trained, _, _ = memorized
    outputs = decode_corpus(trained, [s for s, _ in TOY_PAIRS], max_len=10)
    correct = sum(" ".join(o) == t for o, (_, t) in zip(outputs, TOY_PAIRS))
    assert correct >= 7, f"only {correct}/8 decoded correctly: {outputs}"


def test_decoding_limits():
    model = toy_model()
    assert greedy_decode(model, "a b", max_len=0) == []
    out = greedy_decode(model, "a b", max_len=3)
    assert len(out) <= 3
    assert not {"<pad>", "<s>"} & set(out)
    assert decode_corpus(model, []) == []


def test_batched_decoding_matches_single():
    model = toy_model(seed=6)
    sentences = [s for s, _ in TOY_PAIRS]
    batched = decode_corpus(model, sentences, max_len=6, batch_size=3)
    single = [greedy_decode(model, s, max_len=6) for s in sentences]
    assert batched == single
