"""
Vocabularies
============

Token/id maps with fixed special ids. Non-special tokens are ordered by
descending corpus frequency, ties broken lexicographically, so a vocabulary is
a pure function of (corpus, min_frequency, max_size).

Vocab files hold one ``token<TAB>frequency`` line per entry after a
``#vocab`` header line carrying the build settings.
"""

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ("<pad>", "<s>", "</s>", "<unk>")


class EmptyCorpus(ValueError):
    pass


@dataclass
class Vocabulary:
    itos: List[str]
    freqs: Dict[str, int] = field(default_factory=dict)
    min_frequency: int = 1
    max_size: Optional[int] = None

    def __post_init__(self):
        if tuple(self.itos[:len(SPECIALS)]) != SPECIALS:
            raise ValueError(f"vocabulary must start with the special tokens {SPECIALS}")
        self.stoi = {tok: i for i, tok in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("vocabulary tokens must be unique")

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    @property
    def unk_token(self) -> str:
        return self.itos[UNK]

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256("\n".join(self.itos).encode("utf-8")).hexdigest()

    def encode(self, tokens: Sequence[str], add_bos: bool = False, add_eos: bool = False) -> List[int]:
        ids = [self.stoi.get(t, UNK) for t in tokens]
        if add_bos:
            ids = [BOS] + ids
        if add_eos:
            ids = ids + [EOS]
        return ids

    def decode(self, ids: Iterable[int]) -> List[str]:
        """Tokens up to the first EOS; PAD and BOS are dropped."""
        out = []
        for i in ids:
            i = int(i)
            if i == EOS:
                break
            if i in (PAD, BOS):
                continue
            out.append(self.itos[i])
        return out

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(f"#vocab\tmin_frequency={self.min_frequency}\tmax_size={self.max_size}\n")
            for tok in self.itos:
                f.write(f"{tok}\t{self.freqs.get(tok, 0)}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        itos, freqs = [], {}
        min_frequency, max_size = 1, None
        with open(Path(path), "r", encoding="utf-8") as f:
            header = f.readline().rstrip("\n").split("\t")
            for item in header[1:]:
                key, _, value = item.partition("=")
                if key == "min_frequency":
                    min_frequency = int(value)
                elif key == "max_size" and value != "None":
                    max_size = int(value)
            for line in f:
                tok, _, freq = line.rstrip("\n").partition("\t")
                itos.append(tok)
                freqs[tok] = int(freq or 0)
        return cls(itos=itos, freqs={t: c for t, c in freqs.items() if t not in SPECIALS},
                   min_frequency=min_frequency, max_size=max_size)


def build_vocab(
    sentences: Iterable[Union[str, Sequence[str]]],
    min_frequency: int = 1,
    max_size: Optional[int] = None,
) -> Vocabulary:
    """Build from tokenized sentences; ``max_size`` caps the non-special entries."""
    if min_frequency < 1:
        raise ValueError(f"min_frequency must be >= 1, got {min_frequency}")
    counts: Counter = Counter()
    for sentence in sentences:
        counts.update(sentence.split() if isinstance(sentence, str) else sentence)
    for special in SPECIALS:
        counts.pop(special, None)
    if not counts:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")

    kept = sorted((t for t, c in counts.items() if c >= min_frequency), key=lambda t: (-counts[t], t))
    if max_size is not None:
        kept = kept[:max_size]
    return Vocabulary(
        itos=list(SPECIALS) + kept,
        freqs={t: counts[t] for t in kept},
        min_frequency=min_frequency,
        max_size=max_size,
    )
