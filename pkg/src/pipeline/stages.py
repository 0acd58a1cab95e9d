"""
Experiment Stage Framework
==========================

Every unit of experiment work is a stage with declared input files, output
files and parameters. A stage's cache key hashes its parameters together with
the content of its inputs, so a resumed run re-executes only stages whose
inputs or settings changed.

All stages inherit from BaseStage; ``create_stage`` builds them from the
registry by type name.
"""

import hashlib
import json
import logging
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

from src import __version__
from src.dictxlate.dictionary import OovPolicy, load_dictionary, translate_corpus
from src.metrics.engine import MetricsEngine, read_sentences
from src.nmt.decoder import decode_corpus
from src.nmt.model import Seq2SeqModel, init_model
from src.nmt.trainer import TrainConfig, finetune, train, transfer_init
from src.nmt.vocab import Vocabulary, build_vocab
from src.pipeline.config import BASELINE, NO_PREORDER, ExperimentConfig
from src.pipeline.report import Cell, EvalReport, Sample, SignificanceEntry, write_report
from src.preorder.reorderer import preorder_corpus
from src.preorder.rules import RuleSet, load_rules
from src.synthlang.generator import generate_corpus, split_corpus
from src.synthlang.grammar import load_grammar
from src.treebank.tree import serialize_tree

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

DECISIONS = {
    "bleu_smoothing": "floor 1e-9 for zero n>=2 counts; orders without hypothesis n-grams excluded",
    "lebleu_matching": "space-joined n-gram strings, greedy highest-similarity one-to-one assignment",
    "bootstrap_p_value": "fraction of resamples where the observed winner does not strictly win",
    "lr_decay_trigger": "dev loss stalled for decay_patience epochs, or every epoch from start_decay_at",
    "decoding": "greedy, lowest id wins ties, PAD/BOS masked",
    "dropout_placement": "top encoder output and attentional state",
    "preordering": "parent training and dev data only; child inputs are dictionary-pivoted in source order",
    "baseline_size_0": "N/A",
}


class StageFailed(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage} failed: {message}")
        self.stage = stage


def derive_seed(seed: int, *labels: Any) -> int:
    """Stable 31-bit seed for a (seed, labels...) tuple."""
    digest = hashlib.sha256(json.dumps([seed, *labels]).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big") & 0x7FFFFFFF


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def read_lines(path) -> List[str]:
    return read_sentences(path)


def write_lines(path, lines) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line + "\n")


def write_json(path, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)


def token_pairs(src_lines: List[str], tgt_lines: List[str]):
    return [(s.split(), t.split()) for s, t in zip(src_lines, tgt_lines)]


@dataclass
class StageContext:
    config: ExperimentConfig
    out_dir: Path

    def p(self, *parts: str) -> Path:
        return self.out_dir.joinpath(*parts)

    # Shared artifact locations
    def corpus(self, name: str) -> Path:
        return self.p("data", "corpus", name)

    def split(self, name: str) -> Path:
        return self.p("data", "splits", name)

    def preordered(self, system: str, name: str) -> Path:
        return self.p("preorder", system, name)

    def pivot(self, name: str) -> Path:
        return self.p("pivot", name)

    def vocab(self, side: str) -> Path:
        return self.p("vocab", f"{side}.vocab")

    def model_dir(self, system: str) -> Path:
        return self.p("models", f"parent_{system}")

    def output_dir(self, system: str, size: int) -> Path:
        return self.p("outputs", system, f"size_{size}")


MODEL_FILES = ("params.npz", "manifest.json", "src.vocab", "tgt.vocab")


@dataclass
class StageResult:
    """Outcome of one stage execution or cache hit."""
    stage: str
    key: str
    status: str
    inputs: List[str] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    elapsed_seconds: float = 0.0
    error_message: Optional[str] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.status in ("ran", "cached")

    def to_dict(self) -> Dict:
        return {
            "stage": self.stage,
            "key": self.key,
            "status": self.status,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "elapsed_seconds": round(self.elapsed_seconds, 3),
            "error_message": self.error_message,
            "metadata": self.metadata,
        }


class BaseStage(ABC):
    """
    Abstract base class for experiment stages.

    Subclasses must implement:
    - inputs()
    - outputs()
    - params()
    - execute()
    """

    stage_type = "stage"

    def __init__(self, ctx: StageContext):
        self.ctx = ctx
        self.config = ctx.config

    @property
    def name(self) -> str:
        return self.stage_type

    @abstractmethod
    def inputs(self) -> List[Path]:
        """Files read by the stage."""

    @abstractmethod
    def outputs(self) -> List[Path]:
        """Files written by the stage."""

    @abstractmethod
    def params(self) -> Dict[str, Any]:
        """JSON-serializable settings that change the stage's outputs."""

    @abstractmethod
    def execute(self) -> Dict[str, Any]:
        """Produce the outputs; returns metadata for the stage manifest."""

    def _rel(self, path: Path) -> str:
        try:
            return str(Path(path).relative_to(self.ctx.out_dir))
        except ValueError:
            return Path(path).name

    def cache_key(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps({"stage": self.name, "version": __version__, "params": self.params()}, sort_keys=True).encode("utf-8"))
        for path in self.inputs():
            h.update(self._rel(path).encode("utf-8"))
            h.update(file_sha256(path).encode("ascii"))
        return h.hexdigest()

    def check_acyclic(self) -> None:
        overlap = {str(p) for p in self.inputs()} & {str(p) for p in self.outputs()}
        if overlap:
            raise StageFailed(self.name, f"reads its own outputs: {sorted(overlap)}")

    def run(self, previous: Optional[Dict] = None, resume: bool = False) -> StageResult:
        """Execute unless a resumable manifest entry with the same key exists."""
        self.check_acyclic()
        key = self.cache_key()
        inputs = [self._rel(p) for p in self.inputs()]
        outputs = [self._rel(p) for p in self.outputs()]

        if (
            resume
            and previous
            and previous.get("key") == key
            and previous.get("status") in ("ran", "cached")
            and all(Path(p).exists() for p in self.outputs())
        ):
            logger.info(f"Skipping {self.name} (cached)")
            return StageResult(self.name, key, "cached", inputs, outputs, 0.0, metadata=previous.get("metadata", {}))

        logger.info(f"Running {self.name}...")
        start_time = time.time()
        try:
            metadata = self.execute() or {}
        except Exception as e:
            elapsed = time.time() - start_time
            logger.error(f"{self.name} failed after {elapsed:.2f}s: {e}")
            return StageResult(self.name, key, "failed", inputs, outputs, elapsed, error_message=f"{type(e).__name__}: {e}")
        elapsed = time.time() - start_time
        logger.info(f"Finished {self.name} in {elapsed:.2f}s")
        return StageResult(self.name, key, "ran", inputs, outputs, elapsed, metadata=metadata)


class DataStage(BaseStage):
    """Synthetic corpus generation and splitting."""

    stage_type = "data"

    def inputs(self) -> List[Path]:
        return [self.config.grammar_path]

    def outputs(self) -> List[Path]:
        corpus = [self.ctx.corpus(n) for n in ("assisting.trees", "assisting.txt", "source.txt", "target.txt", "dictionary.tsv")]
        splits = [
            self.ctx.split(n)
            for n in (
                "parent_train.trees", "parent_train.txt", "parent_train.tgt",
                "dev.trees", "dev.src", "dev.tgt",
                "test.src", "test.tgt",
                "child_pool.src", "child_pool.tgt",
            )
        ]
        return corpus + splits

    def params(self) -> Dict[str, Any]:
        d = self.config.data
        return {"seed": self.config.seed, "n": d.n_examples, "noise": d.noise, "splits": vars(d.splits)}

    def execute(self) -> Dict[str, Any]:
        d = self.config.data
        grammar = load_grammar(self.config.grammar_path)
        examples, _ = generate_corpus(grammar, d.n_examples, self.config.seed, d.noise, out_dir=self.ctx.p("data", "corpus"))
        splits = split_corpus(examples, d.splits, seed=derive_seed(self.config.seed, "split"))

        write_lines(self.ctx.split("parent_train.trees"), [serialize_tree(e.assisting_tree) for e in splits.parent_train])
        write_lines(self.ctx.split("parent_train.txt"), [e.assisting for e in splits.parent_train])
        write_lines(self.ctx.split("parent_train.tgt"), [e.target for e in splits.parent_train])
        write_lines(self.ctx.split("dev.trees"), [serialize_tree(e.assisting_tree) for e in splits.dev])
        write_lines(self.ctx.split("dev.src"), [e.source for e in splits.dev])
        write_lines(self.ctx.split("dev.tgt"), [e.target for e in splits.dev])
        write_lines(self.ctx.split("test.src"), [e.source for e in splits.test])
        write_lines(self.ctx.split("test.tgt"), [e.target for e in splits.test])
        write_lines(self.ctx.split("child_pool.src"), [e.source for e in splits.child_pool])
        write_lines(self.ctx.split("child_pool.tgt"), [e.target for e in splits.child_pool])
        return {"examples": len(examples), **splits.sizes()}


class PreorderStage(BaseStage):
    """Reorders the parent training and dev trees with one system's rules."""

    stage_type = "preorder"

    def __init__(self, ctx: StageContext, system: str):
        super().__init__(ctx)
        self.system = system

    @property
    def name(self) -> str:
        return f"preorder:{self.system}"

    def _rules_file(self) -> Optional[Path]:
        return self.config.rules_path(self.system)

    def inputs(self) -> List[Path]:
        files = [self.ctx.split("parent_train.trees"), self.ctx.split("dev.trees")]
        rules = self._rules_file()
        return files + ([rules] if rules else [])

    def outputs(self) -> List[Path]:
        return [self.ctx.preordered(self.system, "parent_train.txt"), self.ctx.preordered(self.system, "dev.txt")]

    def params(self) -> Dict[str, Any]:
        return {"system": self.system, "on_parse_error": self.config.on_parse_error}

    def execute(self) -> Dict[str, Any]:
        rules_file = self._rules_file()
        rules = load_rules(rules_file) if rules_file else RuleSet.empty(NO_PREORDER)
        train_summary = preorder_corpus(
            self.ctx.split("parent_train.trees"), rules, self.outputs()[0], self.config.on_parse_error
        )
        dev_summary = preorder_corpus(self.ctx.split("dev.trees"), rules, self.outputs()[1], self.config.on_parse_error)
        return {"rules": len(rules), "train": train_summary.to_dict(), "dev": dev_summary.to_dict()}


class XlateStage(BaseStage):
    """Word-by-word dictionary pivot of every child-side source file."""

    stage_type = "xlate"
    FILES = {"child_pool.src": "child_pool.txt", "dev.src": "dev.txt", "test.src": "test.txt"}

    def inputs(self) -> List[Path]:
        return [self.ctx.corpus("dictionary.tsv")] + [self.ctx.split(n) for n in self.FILES]

    def outputs(self) -> List[Path]:
        return [self.ctx.pivot(n) for n in self.FILES.values()]

    def params(self) -> Dict[str, Any]:
        return vars(self.config.dictionary)

    def execute(self) -> Dict[str, Any]:
        cfg = self.config.dictionary
        dictionary = load_dictionary(self.ctx.corpus("dictionary.tsv"), lowercase=cfg.lowercase, oov_policy=OovPolicy(cfg.oov))
        return {
            src: translate_corpus(self.ctx.split(src), self.ctx.pivot(dst), dictionary)
            for src, dst in self.FILES.items()
        }


class VocabStage(BaseStage):
    """Vocabularies shared by every system; pre-ordering never changes token counts."""

    stage_type = "vocab"

    def inputs(self) -> List[Path]:
        return [self.ctx.split("parent_train.txt"), self.ctx.split("parent_train.tgt")]

    def outputs(self) -> List[Path]:
        return [self.ctx.vocab("src"), self.ctx.vocab("tgt")]

    def params(self) -> Dict[str, Any]:
        return vars(self.config.vocab)

    def execute(self) -> Dict[str, Any]:
        v = self.config.vocab
        src = build_vocab(read_lines(self.ctx.split("parent_train.txt")), v.src_min_frequency, v.src_max_size)
        tgt = build_vocab(read_lines(self.ctx.split("parent_train.tgt")), v.tgt_min_frequency, v.tgt_max_size)
        src.save(self.ctx.vocab("src"))
        tgt.save(self.ctx.vocab("tgt"))
        return {"src_size": len(src), "tgt_size": len(tgt)}


def _load_vocabs(ctx: StageContext):
    return Vocabulary.load(ctx.vocab("src")), Vocabulary.load(ctx.vocab("tgt"))


def _decode_to(model: Seq2SeqModel, ctx: StageContext, path: Path) -> int:
    sentences = read_lines(ctx.pivot("test.txt"))
    hyps = decode_corpus(model, sentences, max_len=ctx.config.decode.max_len)
    write_lines(path, [" ".join(h) for h in hyps])
    return len(hyps)


class ParentTrainStage(BaseStage):
    """Trains one parent model on (pre-ordered assisting, target) pairs."""

    stage_type = "parent"

    def __init__(self, ctx: StageContext, system: str):
        super().__init__(ctx)
        self.system = system

    @property
    def name(self) -> str:
        return f"parent:{self.system}"

    def inputs(self) -> List[Path]:
        return [
            self.ctx.preordered(self.system, "parent_train.txt"),
            self.ctx.split("parent_train.tgt"),
            self.ctx.preordered(self.system, "dev.txt"),
            self.ctx.split("dev.tgt"),
            self.ctx.vocab("src"),
            self.ctx.vocab("tgt"),
        ]

    def outputs(self) -> List[Path]:
        d = self.ctx.model_dir(self.system)
        return [d / f for f in MODEL_FILES] + [d / "history.json"]

    def _train_config(self) -> TrainConfig:
        return replace(self.config.parent_training, seed=derive_seed(self.config.seed, "parent", self.system))

    def params(self) -> Dict[str, Any]:
        return {
            "system": self.system,
            "model": vars(self.config.model),
            "training": self._train_config().to_dict(),
            "init_seed": derive_seed(self.config.seed, "init", self.system),
        }

    def execute(self) -> Dict[str, Any]:
        src_vocab, tgt_vocab = _load_vocabs(self.ctx)
        dims = self.config.model.dims(len(src_vocab), len(tgt_vocab))
        model = init_model(dims, src_vocab, tgt_vocab, seed=self.params()["init_seed"], precision=self.config.model.precision)
        pairs = token_pairs(read_lines(self.inputs()[0]), read_lines(self.inputs()[1]))
        dev = token_pairs(read_lines(self.inputs()[2]), read_lines(self.inputs()[3]))
        trained, history = train(model, pairs, dev, self._train_config(), label=f"parent {self.system}")
        trained.save(self.ctx.model_dir(self.system))
        write_json(self.ctx.model_dir(self.system) / "history.json", history.to_dict())
        return {"epochs": history.epochs, "best_dev_loss": history.best_dev_loss, "params": trained.num_params}


class ChildStage(BaseStage):
    """Transfers a parent, fine-tunes on ``size`` child pairs and decodes the test set."""

    stage_type = "child"

    def __init__(self, ctx: StageContext, system: str, size: int):
        super().__init__(ctx)
        self.system = system
        self.size = size

    @property
    def name(self) -> str:
        return f"child:{self.system}:{self.size}"

    def inputs(self) -> List[Path]:
        model_files = [self.ctx.model_dir(self.system) / f for f in MODEL_FILES]
        return model_files + [
            self.ctx.pivot("child_pool.txt"),
            self.ctx.split("child_pool.tgt"),
            self.ctx.pivot("dev.txt"),
            self.ctx.split("dev.tgt"),
            self.ctx.pivot("test.txt"),
        ]

    def outputs(self) -> List[Path]:
        d = self.ctx.output_dir(self.system, self.size)
        return [d / "hyp.txt", d / "history.json"]

    def _train_config(self) -> TrainConfig:
        return replace(self.config.finetune_training, seed=derive_seed(self.config.seed, "finetune", self.system, self.size))

    def params(self) -> Dict[str, Any]:
        return {
            "system": self.system,
            "size": self.size,
            "training": self._train_config().to_dict(),
            "max_len": self.config.decode.max_len,
        }

    def execute(self) -> Dict[str, Any]:
        parent = Seq2SeqModel.load(self.ctx.model_dir(self.system))
        child = transfer_init(parent, parent.src_vocab, parent.tgt_vocab, seed=derive_seed(self.config.seed, "transfer", self.system))
        pairs = token_pairs(
            read_lines(self.ctx.pivot("child_pool.txt"))[:self.size],
            read_lines(self.ctx.split("child_pool.tgt"))[:self.size],
        )
        dev = token_pairs(read_lines(self.ctx.pivot("dev.txt")), read_lines(self.ctx.split("dev.tgt")))
        tuned, history = finetune(child, pairs, dev, self._train_config(), label=f"child {self.system}/{self.size}")
        n = _decode_to(tuned, self.ctx, self.outputs()[0])
        write_json(self.outputs()[1], history.to_dict())
        return {"decoded": n, "epochs": history.epochs}


class BaselineStage(BaseStage):
    """Randomly initialized model trained only on the child data."""

    stage_type = "baseline"

    def __init__(self, ctx: StageContext, size: int):
        super().__init__(ctx)
        self.size = size

    @property
    def name(self) -> str:
        return f"baseline:{self.size}"

    def inputs(self) -> List[Path]:
        return [
            self.ctx.vocab("src"),
            self.ctx.vocab("tgt"),
            self.ctx.pivot("child_pool.txt"),
            self.ctx.split("child_pool.tgt"),
            self.ctx.pivot("dev.txt"),
            self.ctx.split("dev.tgt"),
            self.ctx.pivot("test.txt"),
        ]

    def outputs(self) -> List[Path]:
        d = self.ctx.output_dir(BASELINE, self.size)
        return [d / "hyp.txt", d / "history.json"]

    def _train_config(self) -> TrainConfig:
        return replace(self.config.baseline_training, seed=derive_seed(self.config.seed, "baseline", self.size))

    def params(self) -> Dict[str, Any]:
        return {
            "size": self.size,
            "model": vars(self.config.model),
            "training": self._train_config().to_dict(),
            "init_seed": derive_seed(self.config.seed, "baseline_init", self.size),
            "max_len": self.config.decode.max_len,
        }

    def execute(self) -> Dict[str, Any]:
        src_vocab, tgt_vocab = _load_vocabs(self.ctx)
        dims = self.config.model.dims(len(src_vocab), len(tgt_vocab))
        model = init_model(dims, src_vocab, tgt_vocab, seed=self.params()["init_seed"], precision=self.config.model.precision)
        pairs = token_pairs(
            read_lines(self.ctx.pivot("child_pool.txt"))[:self.size],
            read_lines(self.ctx.split("child_pool.tgt"))[:self.size],
        )
        dev = token_pairs(read_lines(self.ctx.pivot("dev.txt")), read_lines(self.ctx.split("dev.tgt")))
        trained, history = train(model, pairs, dev, self._train_config(), label=f"baseline/{self.size}")
        n = _decode_to(trained, self.ctx, self.outputs()[0])
        write_json(self.outputs()[1], history.to_dict())
        return {"decoded": n, "epochs": history.epochs}


class EvaluateStage(BaseStage):
    """Scores every system/size cell and runs the significance tests."""

    stage_type = "evaluate"

    def _hyp_files(self) -> Dict[tuple, Path]:
        files = {}
        for size in self.config.ladder:
            if size > 0:
                files[(BASELINE, size)] = self.ctx.output_dir(BASELINE, size) / "hyp.txt"
            for system in self.config.systems:
                files[(system, size)] = self.ctx.output_dir(system, size) / "hyp.txt"
        return files

    def inputs(self) -> List[Path]:
        rules = [self.config.rules_path(s) for s in self.config.preordered_systems]
        return (
            [self.ctx.split("test.tgt"), self.ctx.pivot("test.txt"), self.config.grammar_path, self.config.metrics_path]
            + rules
            + list(self._hyp_files().values())
        )

    def outputs(self) -> List[Path]:
        return [self.ctx.p("report.jsonl"), self.ctx.p("report.txt")]

    def params(self) -> Dict[str, Any]:
        return {
            "seed": self.config.seed,
            "systems": list(self.config.systems),
            "ladder": self.config.ladder,
            "n_resamples": self.config.n_resamples,
            "samples": self.config.decode.samples,
            "config_hash": self.config.config_hash(),
        }

    def provenance(self, engine: MetricsEngine) -> Dict[str, Any]:
        return {
            "version": __version__,
            "seed": self.config.seed,
            "config_hash": self.config.config_hash(),
            "grammar_sha256": file_sha256(self.config.grammar_path),
            "rules_sha256": {s: file_sha256(self.config.rules_path(s)) for s in self.config.preordered_systems},
            "metrics": engine.describe(),
            "precision": self.config.model.precision,
            "ladder": self.config.ladder,
            "decisions": DECISIONS,
        }

    def build_report(self) -> EvalReport:
        engine = MetricsEngine(str(self.config.metrics_path))
        refs = read_lines(self.ctx.split("test.tgt"))
        sources = read_lines(self.ctx.pivot("test.txt"))
        hyps = {cell: read_lines(path) for cell, path in self._hyp_files().items()}
        n_resamples = self.config.n_resamples or engine.significance_params["n_resamples"]

        cells, significance, samples = [], [], []
        for (system, size), lines in hyps.items():
            cells.append(
                Cell(
                    system=system,
                    child_size=size,
                    bleu=engine.score("bleu", lines, refs).score,
                    lebleu=engine.score("lebleu", lines, refs).score,
                    unk_count=engine.count_unk(lines),
                    seed=self.config.seed,
                    n_sentences=len(lines),
                )
            )
            for i in range(min(self.config.decode.samples, len(lines))):
                samples.append(Sample(system, size, i, sources[i], lines[i], refs[i]))

        for size in self.config.ladder:
            for system in self.config.preordered_systems:
                sig_seed = derive_seed(self.config.seed, "significance", system, size)
                result = engine.significance(
                    hyps[(system, size)], hyps[(NO_PREORDER, size)], refs, seed=sig_seed, n_resamples=n_resamples
                )
                significance.append(SignificanceEntry.from_result(system, NO_PREORDER, size, result, engine.alpha))

        return EvalReport(cells=cells, significance=significance, samples=samples, provenance=self.provenance(engine))

    def execute(self) -> Dict[str, Any]:
        report = self.build_report()
        write_report(report, self.outputs()[0], "machine")
        write_report(report, self.outputs()[1], "text")
        return {"cells": len(report.cells), "significance": len(report.significance)}


# Stage registry
STAGE_REGISTRY: Dict[str, type] = {
    "data": DataStage,
    "preorder": PreorderStage,
    "xlate": XlateStage,
    "vocab": VocabStage,
    "parent": ParentTrainStage,
    "child": ChildStage,
    "baseline": BaselineStage,
    "evaluate": EvaluateStage,
}


def create_stage(stage_type: str, ctx: StageContext, **kwargs) -> BaseStage:
    """Factory function to create stages."""
    stage_class = STAGE_REGISTRY.get(stage_type)
    if not stage_class:
        raise ValueError(f"Unknown stage type: {stage_type}")
    return stage_class(ctx, **kwargs)
