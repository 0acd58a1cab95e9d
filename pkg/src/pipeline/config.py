"""
Experiment Configuration
========================

YAML experiment files are loaded into dataclasses. Every file path is
resolved relative to the directory of the config file. Validation failures
raise ConfigError naming the offending field.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional

import yaml

from src.nmt.model import InvalidDims, ModelDims, PRECISIONS
from src.nmt.trainer import InvalidTrainConfig, TrainConfig
from src.synthlang.generator import SplitSizes

BASELINE = "baseline"
NO_PREORDER = "none"


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class DataConfig:
    grammar: str = "grammar_default.yaml"
    n_examples: int = 10000
    noise: float = 0.05
    splits: SplitSizes = field(default_factory=SplitSizes)


@dataclass
class DictionaryConfig:
    lowercase: bool = True
    oov: str = "copy"


@dataclass
class VocabConfig:
    src_min_frequency: int = 2
    tgt_min_frequency: int = 5
    src_max_size: Optional[int] = None
    tgt_max_size: Optional[int] = 60


@dataclass
class ModelConfig:
    emb_dim: int = 64
    hidden_dim: int = 64
    enc_layers: int = 1
    dec_layers: int = 1
    input_feeding: bool = False
    cell: str = "gru"
    precision: str = "float32"

    def dims(self, src_vocab_size: int, tgt_vocab_size: int) -> ModelDims:
        return ModelDims(
            src_vocab_size=src_vocab_size,
            tgt_vocab_size=tgt_vocab_size,
            emb_dim=self.emb_dim,
            hidden_dim=self.hidden_dim,
            enc_layers=self.enc_layers,
            dec_layers=self.dec_layers,
            input_feeding=self.input_feeding,
            cell=self.cell,
        )


@dataclass
class DecodeConfig:
    max_len: int = 40
    samples: int = 5


@dataclass
class ExperimentConfig:
    seed: int = 1
    data: DataConfig = field(default_factory=DataConfig)
    systems: Dict[str, Optional[str]] = field(default_factory=lambda: {NO_PREORDER: None})
    on_parse_error: str = "fail"
    dictionary: DictionaryConfig = field(default_factory=DictionaryConfig)
    vocab: VocabConfig = field(default_factory=VocabConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    parent_training: TrainConfig = field(default_factory=TrainConfig)
    finetune_training: TrainConfig = field(default_factory=lambda: TrainConfig(initial_lr=0.5, max_epochs=10))
    baseline_training: TrainConfig = field(default_factory=TrainConfig)
    ladder: List[int] = field(default_factory=lambda: [0, 50, 100, 200, 400, 800])
    metrics: str = "metrics_definitions.yaml"
    n_resamples: Optional[int] = None
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    workers: int = 1
    config_dir: str = "."

    def path(self, relative: str) -> Path:
        p = Path(relative)
        return p if p.is_absolute() else (Path(self.config_dir) / p).resolve()

    @property
    def grammar_path(self) -> Path:
        return self.path(self.data.grammar)

    @property
    def metrics_path(self) -> Path:
        return self.path(self.metrics)

    def rules_path(self, system: str) -> Optional[Path]:
        rel = self.systems[system]
        return self.path(rel) if rel else None

    @property
    def preordered_systems(self) -> List[str]:
        return [s for s in self.systems if s != NO_PREORDER]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed)

    def with_ladder(self, ladder: List[int]) -> "ExperimentConfig":
        return replace(self, ladder=list(ladder))

    def to_dict(self) -> Dict:
        """Canonical form used for hashing; ``config_dir`` is left out."""
        d = asdict(self)
        d.pop("config_dir")
        return d

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def validate(self) -> None:
        if not isinstance(self.seed, int):
            raise ConfigError("seed", f"must be an integer, got {self.seed!r}")
        if not self.ladder or self.ladder[0] != 0:
            raise ConfigError("ladder", "must start at 0")
        if any(b <= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise ConfigError("ladder", f"must be strictly increasing, got {self.ladder}")
        splits = self.data.splits
        if self.ladder[-1] > splits.child_train_max:
            raise ConfigError("ladder", f"largest size {self.ladder[-1]} exceeds child_train_max {splits.child_train_max}")
        if splits.total > self.data.n_examples:
            raise ConfigError("data.splits", f"splits need {splits.total} examples, n_examples is {self.data.n_examples}")
        if min(splits.parent_train, splits.dev, splits.test) < 1:
            raise ConfigError("data.splits", "parent_train, dev and test must be non-empty")
        if not 0.0 <= self.data.noise <= 1.0:
            raise ConfigError("data.noise", f"must be in [0, 1], got {self.data.noise}")
        if NO_PREORDER not in self.systems:
            raise ConfigError("preorder.systems", f"must include the '{NO_PREORDER}' system")
        if BASELINE in self.systems:
            raise ConfigError("preorder.systems", f"'{BASELINE}' is reserved")
        if self.systems[NO_PREORDER]:
            raise ConfigError("preorder.systems", f"'{NO_PREORDER}' cannot have a rule file")
        if self.on_parse_error not in ("fail", "passthrough"):
            raise ConfigError("preorder.on_parse_error", f"unknown policy {self.on_parse_error!r}")
        if self.dictionary.oov not in ("copy", "unk"):
            raise ConfigError("dictionary.oov", f"unknown policy {self.dictionary.oov!r}")
        if self.model.precision not in PRECISIONS:
            raise ConfigError("model.precision", f"must be one of {sorted(PRECISIONS)}")
        try:
            self.model.dims(4, 4).validate()
        except InvalidDims as e:
            raise ConfigError("model", str(e)) from e
        for name in ("parent_training", "finetune_training", "baseline_training"):
            try:
                getattr(self, name).validate()
            except InvalidTrainConfig as e:
                raise ConfigError(f"training.{name.split('_')[0]}", str(e)) from e
        if self.workers < 1:
            raise ConfigError("workers", "must be at least 1")
        if self.decode.max_len < 0 or self.decode.samples < 0:
            raise ConfigError("decode", "max_len and samples cannot be negative")

        for field_name, p in [("data.grammar", self.grammar_path), ("metrics", self.metrics_path)] + [
            (f"preorder.systems.{s}", self.rules_path(s)) for s in self.preordered_systems
        ]:
            if p is None or not p.is_file():
                raise ConfigError(field_name, f"file not found: {p}")

    @classmethod
    def from_dict(cls, data: Dict, config_dir: str = ".") -> "ExperimentConfig":
        data = data or {}
        try:
            d = data.get("data", {}) or {}
            pre = data.get("preorder", {}) or {}
            tr = data.get("training", {}) or {}
            config = cls(
                seed=data.get("seed", 1),
                data=DataConfig(
                    grammar=d.get("grammar", "grammar_default.yaml"),
                    n_examples=d.get("n_examples", 10000),
                    noise=d.get("noise", 0.05),
                    splits=build_section(SplitSizes, d.get("splits")),
                ),
                systems=dict(pre.get("systems", {NO_PREORDER: None})),
                on_parse_error=pre.get("on_parse_error", "fail"),
                dictionary=build_section(DictionaryConfig, data.get("dictionary")),
                vocab=build_section(VocabConfig, data.get("vocab")),
                model=build_section(ModelConfig, data.get("model")),
                parent_training=build_section(TrainConfig, tr.get("parent")),
                finetune_training=build_section(TrainConfig, tr.get("finetune")),
                baseline_training=build_section(TrainConfig, tr.get("baseline")),
                ladder=list(data.get("ladder", [0, 50, 100, 200, 400, 800])),
                metrics=(data.get("metrics") or {}).get("definitions", "metrics_definitions.yaml"),
                n_resamples=(data.get("metrics") or {}).get("n_resamples"),
                decode=build_section(DecodeConfig, data.get("decode")),
                workers=data.get("workers", 1),
                config_dir=str(config_dir),
            )
        except TypeError as e:
            raise ConfigError("config", f"unknown or malformed field: {e}") from e
        return config

    @classmethod
    def from_yaml(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError("config", f"file not found: {path}")
        with open(path) as f:
            data = yaml.safe_load(f)
        config = cls.from_dict(data, config_dir=str(path.resolve().parent))
        config.validate()
        return config


def build_section(cls, values):
    values = values or {}
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise TypeError(f"{cls.__name__} got unknown fields {sorted(unknown)}")
    return cls(**values)
