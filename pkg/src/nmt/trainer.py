"""
Training, Transfer and Fine-tuning
==================================

Plain SGD with gradient-norm clipping. After each epoch the dev loss is
checked. The learning rate is multiplied by ``lr_decay`` once the dev loss has
failed to improve for ``decay_patience`` epochs in a row, and on every epoch
from ``start_decay_at`` onwards when that is set. Training stops once the rate
falls below ``lr_floor`` or after ``max_epochs``. The best-dev parameters are
returned.

Batches come from a shuffled corpus cut into chunks of ``10 * batch_size``,
each chunk sorted by source length before slicing, and the batch order is
shuffled again. Epoch ``e`` draws from ``default_rng([seed, e])``.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.nmt.model import (
    Batch,
    IncompatibleDims,
    ModelDims,
    NonFiniteLoss,
    Seq2SeqModel,
    backward,
    encode_pair,
    forward_loss,
    init_model,
    make_batch,
)
from src.nmt.vocab import EmptyCorpus, Vocabulary

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

DECAY_TRIGGER = "dev_loss_stalled_for_patience_or_past_start_decay_at"
BUCKET_CHUNK = 10

TokenPair = Tuple[Sequence[str], Sequence[str]]


class InvalidTrainConfig(ValueError):
    pass


@dataclass
class TrainConfig:
    initial_lr: float = 1.0
    lr_decay: float = 0.5
    lr_floor: float = 0.001
    batch_size: int = 16
    dropout: float = 0.2
    max_epochs: int = 20
    seed: int = 0
    clip_norm: float = 5.0
    decay_patience: int = 3
    start_decay_at: Optional[int] = None

    def validate(self) -> None:
        if not self.initial_lr > self.lr_floor > 0:
            raise InvalidTrainConfig(f"need initial_lr > lr_floor > 0, got {self.initial_lr}, {self.lr_floor}")
        if not 0 < self.lr_decay < 1:
            raise InvalidTrainConfig(f"lr_decay must be in (0, 1), got {self.lr_decay}")
        if not 0 <= self.dropout < 1:
            raise InvalidTrainConfig(f"dropout must be in [0, 1), got {self.dropout}")
        if self.batch_size < 1 or self.max_epochs < 1 or self.clip_norm <= 0:
            raise InvalidTrainConfig("batch_size, max_epochs and clip_norm must be positive")
        if self.decay_patience < 1:
            raise InvalidTrainConfig(f"decay_patience must be >= 1, got {self.decay_patience}")
        if self.start_decay_at is not None and self.start_decay_at < 1:
            raise InvalidTrainConfig(f"start_decay_at must be >= 1, got {self.start_decay_at}")

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class TrainHistory:
    records: List[Dict] = field(default_factory=list)
    final_lr: Optional[float] = None
    best_epoch: Optional[int] = None
    best_dev_loss: Optional[float] = None
    precision: str = "float64"
    decay_trigger: str = DECAY_TRIGGER

    @property
    def epochs(self) -> int:
        return len(self.records)

    def lrs(self) -> List[float]:
        return [r["lr"] for r in self.records]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.records, columns=["epoch", "train_loss", "dev_loss", "lr"])

    def to_dict(self) -> Dict:
        return {
            "records": self.records,
            "final_lr": self.final_lr,
            "best_epoch": self.best_epoch,
            "best_dev_loss": self.best_dev_loss,
            "precision": self.precision,
            "decay_trigger": self.decay_trigger,
        }


def encode_pairs(model: Seq2SeqModel, pairs: Sequence[TokenPair]) -> List[Tuple[List[int], List[int]]]:
    return [encode_pair(model, list(src), list(tgt)) for src, tgt in pairs]


def make_batches(encoded: List[Tuple[List[int], List[int]]], batch_size: int, rng: np.random.Generator) -> List[Batch]:
    order = rng.permutation(len(encoded))
    chunk = batch_size * BUCKET_CHUNK
    groups: List[np.ndarray] = []
    for start in range(0, len(order), chunk):
        part = order[start:start + chunk]
        part = part[np.argsort([len(encoded[i][0]) for i in part], kind="stable")]
        groups.extend(part[i:i + batch_size] for i in range(0, len(part), batch_size))
    batches = []
    for k in rng.permutation(len(groups)):
        idx = groups[k]
        batches.append(make_batch([encoded[i][0] for i in idx], [encoded[i][1] for i in idx]))
    return batches


def corpus_loss(model: Seq2SeqModel, encoded: List[Tuple[List[int], List[int]]], batch_size: int = 64) -> float:
    """Token-weighted mean loss with dropout off."""
    total, tokens = 0.0, 0
    for start in range(0, len(encoded), batch_size):
        part = encoded[start:start + batch_size]
        batch = make_batch([s for s, _ in part], [t for _, t in part])
        loss, _ = forward_loss(model, batch)
        total += loss * batch.n_tokens
        tokens += batch.n_tokens
    return total / tokens if tokens else 0.0


def evaluate_loss(model: Seq2SeqModel, pairs: Sequence[TokenPair], batch_size: int = 64) -> float:
    return corpus_loss(model, encode_pairs(model, pairs), batch_size)


def train(
    model: Seq2SeqModel,
    pairs: Sequence[TokenPair],
    dev: Sequence[TokenPair],
    config: TrainConfig,
    label: str = "model",
) -> Tuple[Seq2SeqModel, TrainHistory]:
    """Train a copy of ``model``; returns the best-dev snapshot and the history."""
    config.validate()
    if not pairs:
        raise EmptyCorpus("training corpus is empty")
    work = model.copy()
    encoded = encode_pairs(work, pairs)
    dev_encoded = encode_pairs(work, dev) if dev else encoded

    history = TrainHistory(precision=work.precision)
    best_params = work.params.copy()
    best_dev = corpus_loss(work, dev_encoded)
    lr = config.initial_lr
    stalled = 0

    for epoch in range(1, config.max_epochs + 1):
        rng = np.random.default_rng([config.seed, epoch])
        total, tokens = 0.0, 0
        for batch in make_batches(encoded, config.batch_size, rng):
            try:
                loss, cache = forward_loss(work, batch, dropout_on=config.dropout > 0, dropout_rate=config.dropout, rng=rng)
            except NonFiniteLoss as e:
                last_good = work.copy()
                last_good.set_params(best_params)
                raise NonFiniteLoss(f"{label}: epoch {epoch}: {e}", last_good=last_good) from e
            grad = backward(work, cache)
            norm = float(np.sqrt(np.sum(grad.astype(np.float64) ** 2)))
            if norm > config.clip_norm:
                grad *= config.clip_norm / norm
            work.params -= lr * grad
            total += loss * batch.n_tokens
            tokens += batch.n_tokens

        train_loss = total / tokens if tokens else 0.0
        dev_loss = corpus_loss(work, dev_encoded)
        if not np.isfinite(dev_loss):
            last_good = work.copy()
            last_good.set_params(best_params)
            raise NonFiniteLoss(f"{label}: epoch {epoch}: dev loss became {dev_loss}", last_good=last_good)
        history.records.append({"epoch": epoch, "train_loss": train_loss, "dev_loss": dev_loss, "lr": lr})
        logger.info(f"[{label}] epoch {epoch}: train {train_loss:.4f}, dev {dev_loss:.4f}, lr {lr:.4g}")

        if dev_loss < best_dev:
            best_dev = dev_loss
            best_params = work.params.copy()
            history.best_epoch = epoch
            stalled = 0
        else:
            stalled += 1
        past_start = config.start_decay_at is not None and epoch >= config.start_decay_at
        if past_start or stalled >= config.decay_patience:
            lr *= config.lr_decay
            stalled = 0
            if lr < config.lr_floor:
                logger.info(f"[{label}] learning rate {lr:.4g} below floor, stopping")
                break

    history.final_lr = lr
    history.best_dev_loss = best_dev
    work.set_params(best_params)
    return work, history


def finetune(
    model: Seq2SeqModel,
    pairs: Sequence[TokenPair],
    dev: Sequence[TokenPair],
    config: TrainConfig,
    label: str = "finetune",
) -> Tuple[Seq2SeqModel, TrainHistory]:
    """Continue training from existing weights; no data leaves the model untouched."""
    if not pairs:
        return model.copy(), TrainHistory(precision=model.precision, final_lr=None)
    return train(model, pairs, dev, config, label=label)


def transfer_init(
    parent: Seq2SeqModel,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    dims: Optional[ModelDims] = None,
    seed: int = 0,
) -> Seq2SeqModel:
    """Child model initialized from the parent.

    With the parent's vocabularies this is an exact copy. Otherwise every
    vocabulary-independent matrix is copied, embedding rows and output
    columns are copied for shared tokens, and rows for new tokens keep a fresh
    seeded initialization.
    """
    child_dims = ModelDims(**{**parent.dims.to_dict(), "src_vocab_size": len(src_vocab), "tgt_vocab_size": len(tgt_vocab)})
    if dims is not None:
        if dims.architecture() != parent.dims.architecture():
            raise IncompatibleDims(f"child dims {dims.architecture()} differ from parent {parent.dims.architecture()}")
        if (dims.src_vocab_size, dims.tgt_vocab_size) != (len(src_vocab), len(tgt_vocab)):
            raise IncompatibleDims("child dims do not match the child vocabularies")

    if src_vocab.fingerprint == parent.src_vocab.fingerprint and tgt_vocab.fingerprint == parent.tgt_vocab.fingerprint:
        return parent.copy()

    child = init_model(child_dims, src_vocab, tgt_vocab, seed=seed, precision=parent.precision)
    for name, view in parent.p.items():
        if name not in ("src_emb", "tgt_emb", "out_W", "out_b"):
            child.p[name][...] = view

    shared_src = [(i, parent.src_vocab.stoi[t]) for i, t in enumerate(src_vocab.itos) if t in parent.src_vocab]
    shared_tgt = [(i, parent.tgt_vocab.stoi[t]) for i, t in enumerate(tgt_vocab.itos) if t in parent.tgt_vocab]
    for ci, pi in shared_src:
        child.p["src_emb"][ci] = parent.p["src_emb"][pi]
    for ci, pi in shared_tgt:
        child.p["tgt_emb"][ci] = parent.p["tgt_emb"][pi]
        child.p["out_W"][:, ci] = parent.p["out_W"][:, pi]
        child.p["out_b"][ci] = parent.p["out_b"][pi]
    logger.info(
        f"Transferred parent weights: {len(shared_src)}/{len(src_vocab)} source and "
        f"{len(shared_tgt)}/{len(tgt_vocab)} target tokens shared"
    )
    return child
