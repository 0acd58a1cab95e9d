"""
Word-by-Word Dictionary Pivot
=============================

Translates source-language sentences token by token into the assisting
language through a single-translation bilingual dictionary. Order is never
changed; out-of-dictionary tokens are copied through or replaced by an UNK
string.
"""

import logging
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

logger = logging.getLogger(__name__)


class OovPolicy(Enum):
    COPY = "copy"
    UNK = "unk"


class DictionaryError(ValueError):
    pass


class MalformedLine(DictionaryError):
    def __init__(self, line: int, text: str):
        super().__init__(f"line {line}: expected 'source<TAB>assisting', got {text!r}")
        self.line = line


class EmptyFile(DictionaryError):
    pass


def normalize_token(token: str, lowercase: bool = True) -> str:
    token = unicodedata.normalize("NFC", token)
    return token.lower() if lowercase else token


@dataclass
class BilingualDictionary:
    entries: Dict[str, str] = field(default_factory=dict)
    oov_policy: OovPolicy = OovPolicy.COPY
    unk_token: str = "<unk>"
    lowercase: bool = True
    duplicates: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, token: str) -> bool:
        return normalize_token(token, self.lowercase) in self.entries

    def lookup(self, token: str):
        return self.entries.get(normalize_token(token, self.lowercase))


@dataclass
class Translation:
    tokens: List[str]
    oov_count: int

    @property
    def oov_rate(self) -> float:
        return self.oov_count / len(self.tokens) if self.tokens else 0.0


def load_dictionary(
    path,
    lowercase: bool = True,
    oov_policy: OovPolicy = OovPolicy.COPY,
    unk_token: str = "<unk>",
) -> BilingualDictionary:
    """Read a ``source<TAB>assisting`` TSV; duplicate keys keep the first entry."""
    entries: Dict[str, str] = {}
    duplicates = 0
    with open(Path(path), "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise MalformedLine(line_no, line)
            source, assisting = parts[0].strip(), parts[1].strip()
            if not source or not assisting or len(source.split()) != 1 or len(assisting.split()) != 1:
                raise MalformedLine(line_no, line)
            key = normalize_token(source, lowercase)
            if key in entries:
                duplicates += 1
                continue
            entries[key] = unicodedata.normalize("NFC", assisting)

    if not entries:
        raise EmptyFile(f"no dictionary entries in {path}")

    logger.info(f"Loaded {len(entries)} dictionary entries from {path} ({duplicates} duplicates ignored)")
    return BilingualDictionary(
        entries=entries,
        oov_policy=OovPolicy(oov_policy),
        unk_token=unk_token,
        lowercase=lowercase,
        duplicates=duplicates,
    )


def save_dictionary(entries: Iterable, path) -> None:
    """Write (source, assisting) pairs as TSV in the given order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for source, assisting in entries:
            f.write(f"{source}\t{assisting}\n")


def translate_word_by_word(sentence: Sequence[str], dictionary: BilingualDictionary) -> Translation:
    out: List[str] = []
    oov = 0
    for token in sentence:
        hit = dictionary.lookup(token)
        if hit is not None:
            out.append(hit)
            continue
        oov += 1
        out.append(token if dictionary.oov_policy == OovPolicy.COPY else dictionary.unk_token)
    return Translation(tokens=out, oov_count=oov)


def translate_corpus(input_path, output_path, dictionary: BilingualDictionary) -> Dict[str, float]:
    """Pivot a whitespace-tokenized sentence file line by line."""
    n_tokens = 0
    n_oov = 0
    lines = []
    with open(Path(input_path), "r", encoding="utf-8") as f:
        for raw in f:
            result = translate_word_by_word(raw.split(), dictionary)
            n_tokens += len(result.tokens)
            n_oov += result.oov_count
            lines.append(" ".join(result.tokens))

    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with open(output_path, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line + "\n")

    rate = n_oov / n_tokens if n_tokens else 0.0
    logger.info(f"Pivoted {len(lines)} sentences, OOV rate {rate:.2%}")
    return {"sentences": len(lines), "tokens": n_tokens, "oov": n_oov, "oov_rate": rate}
