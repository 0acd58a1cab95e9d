"""
Greedy Decoding
===============

Batched argmax decoding. PAD and BOS are never emitted; ties go to the
lowest id. Output stops at EOS or ``max_len`` tokens, and UNK ids are rendered
with the target vocabulary's UNK string.
"""

from typing import List, Sequence, Union

import numpy as np

from src.nmt.model import Seq2SeqModel, decoder_step, encode, pad_ids
from src.nmt.vocab import BOS, EOS, PAD

Sentence = Union[str, Sequence[str]]


def _tokens(sentence: Sentence) -> List[str]:
    return sentence.split() if isinstance(sentence, str) else list(sentence)


def decode_corpus(
    model: Seq2SeqModel,
    sentences: Sequence[Sentence],
    max_len: int = 40,
    batch_size: int = 64,
) -> List[List[str]]:
    results: List[List[str]] = []
    for start in range(0, len(sentences), batch_size):
        part = [_tokens(s) for s in sentences[start:start + batch_size]]
        results.extend(_decode_batch(model, part, max_len))
    return results


def _decode_batch(model: Seq2SeqModel, sentences: List[List[str]], max_len: int) -> List[List[str]]:
    B = len(sentences)
    if max_len <= 0 or B == 0:
        return [[] for _ in range(B)]

    src = pad_ids([model.src_vocab.encode(s, add_eos=True) for s in sentences])
    es = encode(model, src)
    states = es.init_states
    feed = np.zeros((B, model.dims.hidden_dim), dtype=model.dtype)
    y = np.full(B, BOS, dtype=np.int64)
    done = np.zeros(B, dtype=bool)
    out_ids = np.full((B, max_len), PAD, dtype=np.int64)

    for t in range(max_len):
        states, htilde, _ = decoder_step(model, y, feed, states, es)
        logits = htilde @ model.p["out_W"] + model.p["out_b"]
        logits[:, PAD] = -np.inf
        logits[:, BOS] = -np.inf
        y = np.argmax(logits, axis=1)
        out_ids[:, t] = np.where(done, PAD, y)
        done |= y == EOS
        feed = htilde
        if done.all():
            break

    return [model.tgt_vocab.decode(row) for row in out_ids]


def greedy_decode(model: Seq2SeqModel, sentence: Sentence, max_len: int = 40) -> List[str]:
    return decode_corpus(model, [sentence], max_len=max_len)[0]
