"""
Attention Encoder-Decoder
=========================

A GRU encoder-decoder with additive attention, written directly in numpy with
hand-derived backpropagation.

Architecture:
- bidirectional GRU encoder (``enc_layers`` stacked layers); EOS is appended
  to every source sequence, so no source is empty
- decoder GRU stack initialized by a bridge, ``tanh(mean(enc) W + b)`` per
  layer, over the masked mean of the top encoder states
- additive attention ``score = v . tanh(enc Wk + h Wq)`` with a masked softmax
- attentional state ``h~ = tanh([h; ctx] Wc + bc)``, fed back into the next
  decoder input when ``input_feeding`` is on
- output projection ``h~ W + b`` and token cross-entropy averaged over
  non-PAD target positions

Inverted dropout applies to the top encoder output and to ``h~``.

All parameters live in one flat vector; named matrices are reshaped views of
it, so an in-place update of the vector updates every view. With embedding
size E, hidden size H, vocab sizes Vs/Vt, the parameter count is::

    Vs*E + Vt*E                                   embeddings
    + sum over encoder layers: 2 * (I*3H + H*3H + 3H),  I = E, then 2H
    + L_dec * (2H*H + H)                          bridges
    + sum over decoder layers: I*3H + H*3H + 3H,  I = E (+H with feeding), then H
    + H*H + 2H*H + H                              attention
    + 3H*H + H                                    attentional state
    + H*Vt + Vt                                   output layer

(E=8, H=16, Vs=Vt=100, one layer each, no feeding: 8996.)
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src import __version__
from src.nmt.vocab import EOS, PAD, Vocabulary

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 1
PRECISIONS = {"float64": np.float64, "float32": np.float32}
ZERO_GRAD_TOL = 1e-8


class InvalidDims(ValueError):
    pass


class IncompatibleDims(ValueError):
    pass


class IdOutOfRange(ValueError):
    pass


class NonFiniteLoss(RuntimeError):
    def __init__(self, message: str, last_good: "Optional[Seq2SeqModel]" = None):
        super().__init__(message)
        self.last_good = last_good


@dataclass
class ModelDims:
    src_vocab_size: int
    tgt_vocab_size: int
    emb_dim: int = 64
    hidden_dim: int = 64
    enc_layers: int = 1
    dec_layers: int = 1
    input_feeding: bool = False
    cell: str = "gru"

    def validate(self) -> None:
        if self.cell != "gru":
            raise InvalidDims(f"unsupported cell {self.cell!r}; only 'gru' is implemented")
        for name in ("src_vocab_size", "tgt_vocab_size", "emb_dim", "hidden_dim", "enc_layers", "dec_layers"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise InvalidDims(f"{name} must be a positive integer, got {value!r}")
        if self.src_vocab_size <= EOS or self.tgt_vocab_size <= EOS:
            raise InvalidDims("vocabularies must include the special tokens")

    def architecture(self) -> tuple:
        """Everything except vocab sizes; transfer requires these to match."""
        return (self.emb_dim, self.hidden_dim, self.enc_layers, self.dec_layers, self.input_feeding, self.cell)

    def to_dict(self) -> Dict:
        return asdict(self)


def param_shapes(dims: ModelDims) -> List[Tuple[str, Tuple[int, ...]]]:
    E, H = dims.emb_dim, dims.hidden_dim
    shapes: List[Tuple[str, Tuple[int, ...]]] = [("src_emb", (dims.src_vocab_size, E))]
    for l in range(dims.enc_layers):
        in_dim = E if l == 0 else 2 * H
        for d in ("fwd", "bwd"):
            shapes += [(f"enc{l}_{d}_Wx", (in_dim, 3 * H)), (f"enc{l}_{d}_Wh", (H, 3 * H)), (f"enc{l}_{d}_b", (3 * H,))]
    shapes.append(("tgt_emb", (dims.tgt_vocab_size, E)))
    for l in range(dims.dec_layers):
        shapes += [(f"bridge{l}_W", (2 * H, H)), (f"bridge{l}_b", (H,))]
    for l in range(dims.dec_layers):
        in_dim = (E + (H if dims.input_feeding else 0)) if l == 0 else H
        shapes += [(f"dec{l}_Wx", (in_dim, 3 * H)), (f"dec{l}_Wh", (H, 3 * H)), (f"dec{l}_b", (3 * H,))]
    shapes += [("att_Wq", (H, H)), ("att_Wk", (2 * H, H)), ("att_v", (H,))]
    shapes += [("out_Wc", (3 * H, H)), ("out_bc", (H,))]
    shapes += [("out_W", (H, dims.tgt_vocab_size)), ("out_b", (dims.tgt_vocab_size,))]
    return shapes


def parameter_count(dims: ModelDims) -> int:
    return int(sum(np.prod(shape) for _, shape in param_shapes(dims)))


def named_views(flat: np.ndarray, dims: ModelDims) -> Dict[str, np.ndarray]:
    views, offset = {}, 0
    for name, shape in param_shapes(dims):
        size = int(np.prod(shape))
        views[name] = flat[offset:offset + size].reshape(shape)
        offset += size
    return views


class Seq2SeqModel:
    """Flat parameter store plus the vocabularies it was built for."""

    def __init__(
        self,
        dims: ModelDims,
        src_vocab: Vocabulary,
        tgt_vocab: Vocabulary,
        params: np.ndarray,
        seed: int = 0,
        precision: str = "float64",
    ):
        dims.validate()
        if precision not in PRECISIONS:
            raise InvalidDims(f"precision must be one of {sorted(PRECISIONS)}, got {precision!r}")
        if len(src_vocab) != dims.src_vocab_size or len(tgt_vocab) != dims.tgt_vocab_size:
            raise InvalidDims(
                f"vocab sizes {len(src_vocab)}/{len(tgt_vocab)} do not match dims "
                f"{dims.src_vocab_size}/{dims.tgt_vocab_size}"
            )
        expected = parameter_count(dims)
        if params.shape != (expected,):
            raise InvalidDims(f"expected {expected} parameters, got shape {params.shape}")
        self.dims = dims
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.seed = seed
        self.precision = precision
        self.params = np.ascontiguousarray(params, dtype=PRECISIONS[precision])
        self.p = named_views(self.params, dims)

    @property
    def dtype(self):
        return self.params.dtype

    @property
    def num_params(self) -> int:
        return self.params.size

    def copy(self) -> "Seq2SeqModel":
        return Seq2SeqModel(self.dims, self.src_vocab, self.tgt_vocab, self.params.copy(), self.seed, self.precision)

    def set_params(self, values: np.ndarray) -> None:
        self.params[...] = values

    def manifest(self) -> Dict:
        return {
            "format_version": CHECKPOINT_FORMAT,
            "toolkit_version": __version__,
            "dims": self.dims.to_dict(),
            "precision": self.precision,
            "seed": self.seed,
            "num_params": self.num_params,
            "src_vocab_sha256": self.src_vocab.fingerprint,
            "tgt_vocab_sha256": self.tgt_vocab.fingerprint,
        }

    def save(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        np.savez(directory / "params.npz", params=self.params)
        self.src_vocab.save(directory / "src.vocab")
        self.tgt_vocab.save(directory / "tgt.vocab")
        with open(directory / "manifest.json", "w", encoding="utf-8") as f:
            json.dump(self.manifest(), f, indent=2, sort_keys=True)
        logger.info(f"Saved model ({self.num_params:,} parameters) to {directory}")
        return directory

    @classmethod
    def load(cls, directory) -> "Seq2SeqModel":
        directory = Path(directory)
        with open(directory / "manifest.json", encoding="utf-8") as f:
            manifest = json.load(f)
        if manifest.get("format_version") != CHECKPOINT_FORMAT:
            raise IncompatibleDims(f"unsupported checkpoint format {manifest.get('format_version')}")
        src_vocab = Vocabulary.load(directory / "src.vocab")
        tgt_vocab = Vocabulary.load(directory / "tgt.vocab")
        if src_vocab.fingerprint != manifest["src_vocab_sha256"] or tgt_vocab.fingerprint != manifest["tgt_vocab_sha256"]:
            raise IncompatibleDims(f"vocabulary files in {directory} do not match the manifest")
        with np.load(directory / "params.npz") as data:
            params = data["params"]
        return cls(
            ModelDims(**manifest["dims"]),
            src_vocab,
            tgt_vocab,
            params,
            seed=manifest["seed"],
            precision=manifest["precision"],
        )


def init_model(
    dims: ModelDims,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    seed: int = 0,
    precision: str = "float64",
) -> Seq2SeqModel:
    """Uniform initialization in [-0.1, 0.1] from ``default_rng(seed)``."""
    dims.validate()
    rng = np.random.default_rng(seed)
    params = rng.uniform(-0.1, 0.1, size=parameter_count(dims))
    return Seq2SeqModel(dims, src_vocab, tgt_vocab, params, seed=seed, precision=precision)


# ---------------------------------------------------------------------------
# Batches
# ---------------------------------------------------------------------------

@dataclass
class Batch:
    src: np.ndarray  # (B, S), EOS-terminated, PAD-padded
    tgt: np.ndarray  # (B, T+1), BOS ... EOS, PAD-padded

    @property
    def n_tokens(self) -> int:
        return int((self.tgt[:, 1:] != PAD).sum())


def pad_ids(seqs: Sequence[Sequence[int]]) -> np.ndarray:
    width = max((len(s) for s in seqs), default=0)
    out = np.full((len(seqs), width), PAD, dtype=np.int64)
    for i, s in enumerate(seqs):
        out[i, :len(s)] = s
    return out


def make_batch(src_seqs: Sequence[Sequence[int]], tgt_seqs: Sequence[Sequence[int]]) -> Batch:
    return Batch(src=pad_ids(src_seqs), tgt=pad_ids(tgt_seqs))


def encode_pair(model: Seq2SeqModel, src_tokens: Sequence[str], tgt_tokens: Sequence[str]) -> Tuple[List[int], List[int]]:
    return (
        model.src_vocab.encode(src_tokens, add_eos=True),
        model.tgt_vocab.encode(tgt_tokens, add_bos=True, add_eos=True),
    )


# ---------------------------------------------------------------------------
# GRU cell
# ---------------------------------------------------------------------------

def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def gru_forward(x, h, Wx, Wh, b):
    H = h.shape[1]
    gx = x @ Wx + b
    gh = h @ Wh
    r = _sigmoid(gx[:, :H] + gh[:, :H])
    z = _sigmoid(gx[:, H:2 * H] + gh[:, H:2 * H])
    ghn = gh[:, 2 * H:]
    n = np.tanh(gx[:, 2 * H:] + r * ghn)
    h_new = (1.0 - z) * n + z * h
    return h_new, (x, h, r, z, n, ghn)


def gru_backward(dh_new, cache, Wx, Wh):
    x, h, r, z, n, ghn = cache
    dn = dh_new * (1.0 - z)
    dz = dh_new * (h - n)
    dan = dn * (1.0 - n * n)
    dar = dan * ghn * r * (1.0 - r)
    daz = dz * z * (1.0 - z)
    dgx = np.concatenate([dar, daz, dan], axis=1)
    dgh = np.concatenate([dar, daz, dan * r], axis=1)
    dx = dgx @ Wx.T
    dh = dh_new * z + dgh @ Wh.T
    return dx, dh, x.T @ dgx, h.T @ dgh, dgx.sum(axis=0)


def _dropout_mask(shape, rate: float, rng: np.random.Generator, dtype) -> np.ndarray:
    keep = rng.random(shape) >= rate
    return (keep / (1.0 - rate)).astype(dtype)


def masked_softmax(scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax over the last axis with exact zeros where ``mask`` is False."""
    top = np.max(np.where(mask, scores, -np.inf), axis=-1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    ex = np.exp(np.where(mask, scores - top, -np.inf))
    denom = ex.sum(axis=-1, keepdims=True)
    return ex / np.where(denom > 0, denom, 1.0)


# ---------------------------------------------------------------------------
# Encoder
# ---------------------------------------------------------------------------

@dataclass
class EncoderState:
    enc: np.ndarray          # (B, S, 2H) after dropout
    keys: np.ndarray         # (B, S, H)
    mask: np.ndarray         # (B, S) bool
    init_states: List[np.ndarray]
    layer_inputs: List[np.ndarray] = field(default_factory=list)
    step_caches: List[Dict[str, list]] = field(default_factory=list)
    dropout: Optional[np.ndarray] = None
    mean: Optional[np.ndarray] = None


def encode(model: Seq2SeqModel, src: np.ndarray, dropout_rate: float = 0.0, rng=None) -> EncoderState:
    p, dims = model.p, model.dims
    H = dims.hidden_dim
    B, S = src.shape
    mask = src != PAD
    m = mask.astype(model.dtype)[:, :, None]

    layer_in = p["src_emb"][src]
    inputs, caches = [], []
    for l in range(dims.enc_layers):
        inputs.append(layer_in)
        outs, layer_caches = [], {}
        for d in ("fwd", "bwd"):
            Wx, Wh, b = p[f"enc{l}_{d}_Wx"], p[f"enc{l}_{d}_Wh"], p[f"enc{l}_{d}_b"]
            h = np.zeros((B, H), dtype=model.dtype)
            out = np.zeros((B, S, H), dtype=model.dtype)
            steps = range(S) if d == "fwd" else reversed(range(S))
            step_cache = [None] * S
            for t in steps:
                h_new, step_cache[t] = gru_forward(layer_in[:, t], h, Wx, Wh, b)
                h = m[:, t] * h_new + (1.0 - m[:, t]) * h
                out[:, t] = h
            outs.append(out)
            layer_caches[d] = step_cache
        caches.append(layer_caches)
        layer_in = np.concatenate(outs, axis=2)

    drop = None
    enc = layer_in
    if dropout_rate > 0:
        drop = _dropout_mask(enc.shape, dropout_rate, rng, model.dtype)
        enc = enc * drop

    counts = np.maximum(m.sum(axis=1), 1.0)
    mean = (enc * m).sum(axis=1) / counts
    init_states = [np.tanh(mean @ p[f"bridge{l}_W"] + p[f"bridge{l}_b"]) for l in range(dims.dec_layers)]
    keys = enc @ p["att_Wk"]
    return EncoderState(enc, keys, mask, init_states, inputs, caches, drop, mean)


# ---------------------------------------------------------------------------
# Decoder step
# ---------------------------------------------------------------------------

def decoder_step(model: Seq2SeqModel, y_ids: np.ndarray, feed: np.ndarray, states: List[np.ndarray], es: EncoderState):
    """One teacher-forced or greedy step; returns (states, h~, cache)."""
    p, dims = model.p, model.dims
    x = p["tgt_emb"][y_ids]
    if dims.input_feeding:
        x = np.concatenate([x, feed], axis=1)
    new_states, cell_caches = [], []
    for l in range(dims.dec_layers):
        h_new, c = gru_forward(x, states[l], p[f"dec{l}_Wx"], p[f"dec{l}_Wh"], p[f"dec{l}_b"])
        new_states.append(h_new)
        cell_caches.append(c)
        x = h_new
    top = x
    e = np.tanh(es.keys + (top @ p["att_Wq"])[:, None, :])
    attn = masked_softmax(e @ p["att_v"], es.mask)
    ctx = np.einsum("bs,bsk->bk", attn, es.enc)
    c_in = np.concatenate([top, ctx], axis=1)
    htilde = np.tanh(c_in @ p["out_Wc"] + p["out_bc"])
    return new_states, htilde, {"cells": cell_caches, "top": top, "e": e, "attn": attn, "c_in": c_in, "htilde": htilde}


# ---------------------------------------------------------------------------
# Loss and gradients
# ---------------------------------------------------------------------------

@dataclass
class ForwardCache:
    batch: Batch
    enc: EncoderState
    steps: List[dict]
    dropouts: List[Optional[np.ndarray]]
    outputs: np.ndarray      # (B, T, H) post-dropout h~
    probs: np.ndarray        # (B, T, Vt)
    labels: np.ndarray       # (B, T)
    n_tokens: int
    attention: np.ndarray    # (B, T, S)


def _check_ids(model: Seq2SeqModel, batch: Batch) -> None:
    for name, ids, size in (("source", batch.src, model.dims.src_vocab_size), ("target", batch.tgt, model.dims.tgt_vocab_size)):
        if ids.size and (ids.min() < 0 or ids.max() >= size):
            raise IdOutOfRange(f"{name} ids must lie in [0, {size}), got range [{ids.min()}, {ids.max()}]")


def forward_loss(
    model: Seq2SeqModel,
    batch: Batch,
    dropout_on: bool = False,
    dropout_rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, ForwardCache]:
    """Teacher-forced cross-entropy, mean over non-PAD target positions."""
    _check_ids(model, batch)
    rate = dropout_rate if dropout_on else 0.0
    if rate > 0 and rng is None:
        raise ValueError("dropout needs an rng")

    es = encode(model, batch.src, rate, rng)
    dec_in, labels = batch.tgt[:, :-1], batch.tgt[:, 1:]
    B, T = labels.shape
    H = model.dims.hidden_dim

    states = es.init_states
    feed = np.zeros((B, H), dtype=model.dtype)
    steps, drops, outputs = [], [], np.zeros((B, T, H), dtype=model.dtype)
    for t in range(T):
        states, htilde, cache = decoder_step(model, dec_in[:, t], feed, states, es)
        drop = _dropout_mask(htilde.shape, rate, rng, model.dtype) if rate > 0 else None
        out = htilde * drop if drop is not None else htilde
        outputs[:, t] = out
        feed = out
        steps.append(cache)
        drops.append(drop)

    logits = outputs @ model.p["out_W"] + model.p["out_b"]
    logits = logits - logits.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(logits).sum(axis=-1, keepdims=True))
    log_probs = logits - log_z
    tok_mask = labels != PAD
    n_tokens = int(tok_mask.sum())
    if n_tokens:
        picked = np.take_along_axis(log_probs, labels[:, :, None], axis=-1)[:, :, 0]
        loss = float(-(picked * tok_mask).sum() / n_tokens)
    else:
        loss = 0.0
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"loss became {loss}")

    attention = np.stack([s["attn"] for s in steps], axis=1) if steps else np.zeros((B, 0, batch.src.shape[1]))
    cache = ForwardCache(batch, es, steps, drops, outputs, np.exp(log_probs), labels, n_tokens, attention)
    return loss, cache


def backward(model: Seq2SeqModel, cache: ForwardCache) -> np.ndarray:
    """Gradient of the forward loss, flat and aligned with ``model.params``."""
    p, dims = model.p, model.dims
    H = dims.hidden_dim
    E = dims.emb_dim
    grad = np.zeros_like(model.params)
    g = named_views(grad, dims)
    if cache.n_tokens == 0:
        return grad

    es = cache.enc
    B, T = cache.labels.shape
    tok_mask = (cache.labels != PAD).astype(model.dtype)

    dlogits = cache.probs.copy()
    np.put_along_axis(dlogits, cache.labels[:, :, None], np.take_along_axis(dlogits, cache.labels[:, :, None], axis=-1) - 1.0, axis=-1)
    dlogits *= tok_mask[:, :, None] / cache.n_tokens

    g["out_W"] += np.einsum("bth,btv->hv", cache.outputs, dlogits)
    g["out_b"] += dlogits.sum(axis=(0, 1))
    d_outputs = dlogits @ p["out_W"].T

    d_enc = np.zeros_like(es.enc)
    d_keys = np.zeros_like(es.keys)
    d_states = [np.zeros((B, H), dtype=model.dtype) for _ in range(dims.dec_layers)]
    d_feed = np.zeros((B, H), dtype=model.dtype)
    dec_in = cache.batch.tgt[:, :-1]

    for t in reversed(range(T)):
        sc = cache.steps[t]
        d_out = d_outputs[:, t] + d_feed
        drop = cache.dropouts[t]
        d_htilde = d_out * drop if drop is not None else d_out

        d_pre = d_htilde * (1.0 - sc["htilde"] ** 2)
        g["out_Wc"] += sc["c_in"].T @ d_pre
        g["out_bc"] += d_pre.sum(axis=0)
        d_c = d_pre @ p["out_Wc"].T
        d_top = d_c[:, :H].copy()
        d_ctx = d_c[:, H:]

        attn = sc["attn"]
        d_enc += attn[:, :, None] * d_ctx[:, None, :]
        d_attn = np.einsum("bsk,bk->bs", es.enc, d_ctx)
        d_score = attn * (d_attn - (attn * d_attn).sum(axis=1, keepdims=True))
        e = sc["e"]
        g["att_v"] += np.einsum("bs,bsh->h", d_score, e)
        d_e_pre = d_score[:, :, None] * p["att_v"] * (1.0 - e * e)
        d_keys += d_e_pre
        d_q = d_e_pre.sum(axis=1)
        g["att_Wq"] += sc["top"].T @ d_q
        d_top += d_q @ p["att_Wq"].T

        d_x = d_top
        for l in reversed(range(dims.dec_layers)):
            d_h = d_x + d_states[l]
            dx, dh_prev, dWx, dWh, db = gru_backward(d_h, sc["cells"][l], p[f"dec{l}_Wx"], p[f"dec{l}_Wh"])
            g[f"dec{l}_Wx"] += dWx
            g[f"dec{l}_Wh"] += dWh
            g[f"dec{l}_b"] += db
            d_states[l] = dh_prev
            d_x = dx
        if dims.input_feeding:
            d_feed = d_x[:, E:]
            d_x = d_x[:, :E]
        np.add.at(g["tgt_emb"], dec_in[:, t], d_x)

    # Bridge from the masked mean of the encoder output.
    m = es.mask.astype(model.dtype)[:, :, None]
    counts = np.maximum(m.sum(axis=1), 1.0)
    d_mean = np.zeros((B, 2 * H), dtype=model.dtype)
    for l in range(dims.dec_layers):
        h0 = es.init_states[l]
        d_a = d_states[l] * (1.0 - h0 * h0)
        g[f"bridge{l}_W"] += es.mean.T @ d_a
        g[f"bridge{l}_b"] += d_a.sum(axis=0)
        d_mean += d_a @ p[f"bridge{l}_W"].T
    d_enc += d_mean[:, None, :] * m / counts[:, None, :]

    g["att_Wk"] += np.einsum("bsk,bsh->kh", es.enc, d_keys)
    d_enc += d_keys @ p["att_Wk"].T
    if es.dropout is not None:
        d_enc = d_enc * es.dropout

    d_layer = d_enc
    for l in reversed(range(dims.enc_layers)):
        d_in = np.zeros_like(es.layer_inputs[l])
        for k, d in enumerate(("fwd", "bwd")):
            Wx, Wh = p[f"enc{l}_{d}_Wx"], p[f"enc{l}_{d}_Wh"]
            d_out = d_layer[:, :, k * H:(k + 1) * H]
            carry = np.zeros((B, H), dtype=model.dtype)
            steps = reversed(range(d_out.shape[1])) if d == "fwd" else range(d_out.shape[1])
            for t in steps:
                d_h = d_out[:, t] + carry
                mt = m[:, t]
                dx, dh_prev, dWx, dWh, db = gru_backward(mt * d_h, es.step_caches[l][d][t], Wx, Wh)
                g[f"enc{l}_{d}_Wx"] += dWx
                g[f"enc{l}_{d}_Wh"] += dWh
                g[f"enc{l}_{d}_b"] += db
                carry = dh_prev + (1.0 - mt) * d_h
                d_in[:, t] += dx
        d_layer = d_in
    np.add.at(g["src_emb"], cache.batch.src, d_layer)
    return grad


# ---------------------------------------------------------------------------
# Gradient check
# ---------------------------------------------------------------------------

@dataclass
class GradientCheckResult:
    coords: np.ndarray
    analytic: np.ndarray
    numeric: np.ndarray
    rel_errors: np.ndarray

    @property
    def max_rel_error(self) -> float:
        return float(self.rel_errors.max()) if self.rel_errors.size else 0.0

    @property
    def zero_mismatches(self) -> int:
        """Coordinates where backward gave exactly zero but the loss does move."""
        return int(np.sum((self.analytic == 0) & (np.abs(self.numeric) > ZERO_GRAD_TOL)))


def gradient_check(
    model: Seq2SeqModel,
    batch: Batch,
    n_coords: int = 50,
    h: float = 1e-5,
    seed: int = 0,
) -> GradientCheckResult:
    """Central differences on coordinates drawn uniformly from all parameters.

    A zero analytic gradient against a nonzero numeric one scores a relative
    error of 1.
    """
    _, cache = forward_loss(model, batch)
    analytic_full = backward(model, cache)
    rng = np.random.default_rng(seed)
    coords = np.sort(rng.choice(model.num_params, size=min(n_coords, model.num_params), replace=False))

    numeric = np.zeros(coords.size)
    for k, i in enumerate(coords):
        original = model.params[i]
        model.params[i] = original + h
        plus, _ = forward_loss(model, batch)
        model.params[i] = original - h
        minus, _ = forward_loss(model, batch)
        model.params[i] = original
        numeric[k] = (plus - minus) / (2 * h)

    analytic = analytic_full[coords].astype(np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-5)
    rel_errors = np.abs(analytic - numeric) / denom
    rel_errors[(analytic == 0) & (np.abs(numeric) > ZERO_GRAD_TOL)] = 1.0
    return GradientCheckResult(coords, analytic, numeric, rel_errors)
