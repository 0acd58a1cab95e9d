"""
Command-Line Entry Points
=========================

One console script per toolkit area:

- ``preorder``   reorder a treebank with a rule file
- ``xlate``      word-by-word dictionary translation
- ``score``      corpus BLEU / LeBLEU
- ``sigtest``    paired bootstrap between two systems
- ``synth``      generate or validate a synthetic grammar
- ``nmt``        train, fine-tune or decode with the seq2seq model
- ``experiment`` run, report or sweep the full transfer experiment

Commands print a human-readable table followed by one JSON line per record.
Exit status is 0 on success, 1 on a reported error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import yaml

from src.dictxlate.dictionary import DictionaryError, OovPolicy, load_dictionary, translate_corpus
from src.metrics.bleu import MetricError, Smoothing
from src.metrics.engine import MetricsEngine, read_sentences
from src.nmt.decoder import decode_corpus
from src.nmt.model import InvalidDims, IncompatibleDims, NonFiniteLoss, Seq2SeqModel, init_model
from src.nmt.trainer import InvalidTrainConfig, TrainConfig, finetune, train, transfer_init
from src.nmt.vocab import EmptyCorpus, build_vocab
from src.pipeline.config import ConfigError, DecodeConfig, ExperimentConfig, ModelConfig, VocabConfig, build_section
from src.pipeline.experiment import LockHeld, OutputExists, run_experiment
from src.pipeline.report import load_report, render_report
from src.pipeline.stages import StageFailed
from src.pipeline.sweep import render_summary, run_sweep, seed_list
from src.preorder.reorderer import ParseErrorPolicy, ParseFailure, preorder_corpus
from src.preorder.rules import RuleFileError, load_rules
from src.synthlang.generator import generate_corpus
from src.synthlang.grammar import GrammarInvalid, InsufficientData, load_grammar
from src.synthlang.validator import validate_grammar

logger = logging.getLogger(__name__)

DEFAULT_METRICS = "config/metrics_definitions.yaml"
DEFAULT_NMT = "config/nmt_default.yaml"

# Errors that end a command with a message instead of a traceback
HANDLED = (
    ConfigError,
    DictionaryError,
    EmptyCorpus,
    GrammarInvalid,
    IncompatibleDims,
    InsufficientData,
    InvalidDims,
    InvalidTrainConfig,
    LockHeld,
    MetricError,
    NonFiniteLoss,
    OutputExists,
    ParseFailure,
    RuleFileError,
    StageFailed,
    FileNotFoundError,
)


def emit(title: str, rows: List[Dict]) -> None:
    """Human table, then the same rows as JSON lines."""
    print(title)
    if rows:
        keys = list(rows[0].keys())
        widths = {k: max(len(k), *(len(_fmt(r.get(k))) for r in rows)) for k in keys}
        print("  ".join(k.ljust(widths[k]) for k in keys))
        print("  ".join("-" * widths[k] for k in keys))
        for r in rows:
            print("  ".join(_fmt(r.get(k)).ljust(widths[k]) for k in keys))
    for r in rows:
        print(json.dumps(r, sort_keys=True, ensure_ascii=False))


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _run(handler, args) -> int:
    try:
        handler(args)
    except HANDLED as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


# ============================================================================
# preorder / xlate
# ============================================================================


def main_preorder(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="preorder", description="Reorder treebank sentences with a rule file")
    parser.add_argument("--rules", required=True)
    parser.add_argument("--input", required=True, help="treebank file, one bracketed tree per line")
    parser.add_argument("--output", required=True)
    parser.add_argument("--on-parse-error", choices=[p.value for p in ParseErrorPolicy], default="fail")
    args = parser.parse_args(argv)

    def handler(a):
        rules = load_rules(a.rules)
        summary = preorder_corpus(a.input, rules, a.output, ParseErrorPolicy(a.on_parse_error))
        emit("Pre-ordering summary", [{"rules": rules.name, **summary.to_dict(), "output": a.output}])

    return _run(handler, args)


def main_xlate(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="xlate", description="Word-by-word dictionary translation")
    parser.add_argument("--dict", required=True, dest="dictionary")
    parser.add_argument("--input", required=True)
    parser.add_argument("--output", required=True)
    parser.add_argument("--oov", choices=[p.value for p in OovPolicy], default="copy")
    parser.add_argument("--lowercase", action=argparse.BooleanOptionalAction, default=True)
    args = parser.parse_args(argv)

    def handler(a):
        dictionary = load_dictionary(a.dictionary, lowercase=a.lowercase, oov_policy=OovPolicy(a.oov))
        stats = translate_corpus(a.input, a.output, dictionary)
        emit("Translation summary", [{**stats, "entries": len(dictionary.entries), "output": a.output}])

    return _run(handler, args)


# ============================================================================
# score / sigtest
# ============================================================================


def main_score(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="score", description="Corpus BLEU or LeBLEU")
    parser.add_argument("--metric", choices=["bleu", "lebleu"], default="bleu")
    parser.add_argument("--hyp", required=True)
    parser.add_argument("--ref", required=True)
    parser.add_argument("--threshold", type=float, default=None, help="LeBLEU similarity threshold")
    parser.add_argument("--exact", action="store_true", help="no smoothing; any zero n-gram count gives 0")
    parser.add_argument("--metrics-config", default=DEFAULT_METRICS)
    args = parser.parse_args(argv)

    def handler(a):
        engine = MetricsEngine(a.metrics_config)
        hyps, refs = read_sentences(a.hyp), read_sentences(a.ref)
        overrides = {"smoothing": Smoothing.EXACT.value if a.exact else None}
        if a.metric == "lebleu":
            overrides["threshold"] = a.threshold
        result = engine.score(a.metric, hyps, refs, **overrides)
        emit(f"{a.metric.upper()} on {len(hyps)} sentences", [{"metric": a.metric, "score": result.score, **result.stats.to_dict()}])

    return _run(handler, args)


def main_sigtest(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="sigtest", description="Paired bootstrap significance test")
    parser.add_argument("--hyp-a", required=True)
    parser.add_argument("--hyp-b", required=True)
    parser.add_argument("--ref", required=True)
    parser.add_argument("--n", type=int, default=1000, help="number of resamples")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--metrics-config", default=DEFAULT_METRICS)
    args = parser.parse_args(argv)

    def handler(a):
        engine = MetricsEngine(a.metrics_config)
        result = engine.significance(
            read_sentences(a.hyp_a), read_sentences(a.hyp_b), read_sentences(a.ref), seed=a.seed, n_resamples=a.n
        )
        emit("Paired bootstrap", [{**result.to_dict(), "significant": result.significant(engine.alpha)}])

    return _run(handler, args)


# ============================================================================
# synth
# ============================================================================


def main_synth(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="synth", description="Synthetic parallel corpus generation")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a corpus")
    gen.add_argument("--grammar", required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=42)
    gen.add_argument("--noise", type=float, default=0.05)
    gen.add_argument("--out", required=True)

    val = sub.add_parser("validate", help="report grammar diagnostics")
    val.add_argument("--grammar", required=True)
    args = parser.parse_args(argv)

    def handler(a):
        grammar = load_grammar(a.grammar)
        if a.command == "validate":
            report = validate_grammar(grammar, Path(a.grammar).name)
            print(report.summary())
            for r in report.diagnostics:
                print(json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False))
            if not report.ok:
                raise GrammarInvalid(f"{len(report.errors)} grammar errors", report)
            return
        examples, files = generate_corpus(grammar, a.n, a.seed, noise=a.noise, out_dir=a.out)
        emit(f"Generated {len(examples)} examples", [{"file": name, "path": str(path)} for name, path in files.items()])

    return _run(handler, args)


# ============================================================================
# nmt
# ============================================================================


def _load_nmt_config(path: str) -> Dict:
    with open(path) as f:
        data = yaml.safe_load(f) or {}
    training = data.get("training") or {}
    return {
        "vocab": build_section(VocabConfig, data.get("vocab")),
        "model": build_section(ModelConfig, data.get("model")),
        "training": build_section(TrainConfig, training),
        "finetune": build_section(TrainConfig, {**training, **(data.get("finetune") or {})}),
        "decode": build_section(DecodeConfig, data.get("decode")),
    }


def _pairs(src_path: Optional[str], tgt_path: Optional[str], limit: Optional[int] = None):
    if not src_path or not tgt_path:
        return []
    src, tgt = read_sentences(src_path), read_sentences(tgt_path)
    if len(src) != len(tgt):
        raise ConfigError("corpus", f"{src_path} has {len(src)} lines, {tgt_path} has {len(tgt)}")
    pairs = [(s.split(), t.split()) for s, t in zip(src, tgt)]
    return pairs[:limit] if limit is not None else pairs


def main_nmt(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="nmt", description="Attentional GRU seq2seq model")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("train", "finetune", "decode"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=DEFAULT_NMT)
        p.add_argument("--model", required=True, help="checkpoint directory")
        if name in ("train", "finetune"):
            p.add_argument("--src", required=True)
            p.add_argument("--tgt", required=True)
            p.add_argument("--dev-src")
            p.add_argument("--dev-tgt")
            p.add_argument("--seed", type=int, default=None)
        if name == "finetune":
            p.add_argument("--parent", required=True, help="parent checkpoint directory")
            p.add_argument("--size", type=int, default=None, help="use only the first N pairs")
        if name == "decode":
            p.add_argument("--input", required=True)
            p.add_argument("--output", required=True)
            p.add_argument("--max-len", type=int, default=None)
    args = parser.parse_args(argv)

    def handler(a):
        cfg = _load_nmt_config(a.config)
        if a.command == "decode":
            model = Seq2SeqModel.load(a.model)
            max_len = a.max_len if a.max_len is not None else cfg["decode"].max_len
            hyps = decode_corpus(model, read_sentences(a.input), max_len=max_len)
            Path(a.output).parent.mkdir(parents=True, exist_ok=True)
            with open(a.output, "w", encoding="utf-8", newline="\n") as f:
                f.writelines(" ".join(h) + "\n" for h in hyps)
            emit("Decoding summary", [{"sentences": len(hyps), "output": a.output}])
            return

        dev = _pairs(a.dev_src, a.dev_tgt)
        if a.command == "train":
            train_cfg = cfg["training"] if a.seed is None else TrainConfig(**{**cfg["training"].to_dict(), "seed": a.seed})
            pairs = _pairs(a.src, a.tgt)
            v = cfg["vocab"]
            src_vocab = build_vocab([" ".join(s) for s, _ in pairs], v.src_min_frequency, v.src_max_size)
            tgt_vocab = build_vocab([" ".join(t) for _, t in pairs], v.tgt_min_frequency, v.tgt_max_size)
            dims = cfg["model"].dims(len(src_vocab), len(tgt_vocab))
            model = init_model(dims, src_vocab, tgt_vocab, seed=train_cfg.seed, precision=cfg["model"].precision)
            trained, history = train(model, pairs, dev, train_cfg, label="train")
        else:
            train_cfg = cfg["finetune"] if a.seed is None else TrainConfig(**{**cfg["finetune"].to_dict(), "seed": a.seed})
            parent = Seq2SeqModel.load(a.parent)
            child = transfer_init(parent, parent.src_vocab, parent.tgt_vocab, seed=train_cfg.seed)
            pairs = _pairs(a.src, a.tgt, a.size)
            trained, history = finetune(child, pairs, dev, train_cfg, label="finetune")
        trained.save(a.model)
        emit(f"{a.command} history", history.records or [{"epoch": 0, "note": "no training data"}])

    return _run(handler, args)


# ============================================================================
# experiment
# ============================================================================


def main_experiment(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="experiment", description="Pre-ordering transfer experiment")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--force", action="store_true")
    run.add_argument("--resume", action="store_true")

    rep = sub.add_parser("report")
    rep.add_argument("--out", required=True)
    rep.add_argument("--format", choices=["text", "machine"], default="text")

    sweep = sub.add_parser("sweep")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--seeds", default="1-5", help="e.g. 1-5 or 3,7,11")
    sweep.add_argument("--force", action="store_true")
    sweep.add_argument("--resume", action="store_true")
    args = parser.parse_args(argv)

    def handler(a):
        if a.command == "report":
            print(render_report(load_report(Path(a.out) / "report.jsonl"), a.format), end="")
            return
        config = ExperimentConfig.from_yaml(a.config)
        if a.command == "run":
            report = run_experiment(config, a.out, force=a.force, resume=a.resume)
            print(render_report(report, "text"), end="")
            return
        summary = run_sweep(config, seed_list(a.seeds), a.out, force=a.force, resume=a.resume)
        print(render_summary(summary), end="")
        print(json.dumps(summary, sort_keys=True))

    return _run(handler, args)


if __name__ == "__main__":
    commands = {
        "preorder": main_preorder,
        "xlate": main_xlate,
        "score": main_score,
        "sigtest": main_sigtest,
        "synth": main_synth,
        "nmt": main_nmt,
        "experiment": main_experiment,
    }
    if len(sys.argv) < 2 or sys.argv[1] not in commands:
        print(f"usage: python -m src.cli {{{','.join(commands)}}} ...", file=sys.stderr)
        sys.exit(2)
    sys.exit(commands[sys.argv[1]](sys.argv[2:]))
