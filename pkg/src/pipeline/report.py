"""
Experiment Reports
==================

An EvalReport holds one scored cell per (system, child size), the
pre-ordered-vs-unordered significance tests, decode samples and a provenance
block. It renders as

- ``text``: BLEU, LeBLEU and UNK tables with child sizes as rows and systems
  as columns; a dagger marks a significant difference from the unordered
  system, and the baseline shows N/A at size 0
- ``machine``: one JSON object per line, keys sorted, which parses back to an
  equal report
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

DAGGER = "†"
NOT_AVAILABLE = "N/A"
BASELINE = "baseline"
NO_PREORDER = "none"

COLUMN_TITLES = {BASELINE: "No-Transfer", NO_PREORDER: "No-Preorder"}


@dataclass
class Cell:
    system: str
    child_size: int
    bleu: float
    lebleu: float
    unk_count: int
    seed: int
    n_sentences: int


@dataclass
class SignificanceEntry:
    system: str
    reference: str
    child_size: int
    p_value: float
    n_resamples: int
    seed: int
    wins_a: int
    wins_b: int
    ties: int
    bleu_a: float
    bleu_b: float
    winner: Optional[str]
    significant: bool

    @classmethod
    def from_result(cls, system: str, reference: str, child_size: int, result, alpha: float) -> "SignificanceEntry":
        return cls(
            system=system,
            reference=reference,
            child_size=child_size,
            p_value=result.p_value,
            n_resamples=result.n_resamples,
            seed=result.seed,
            wins_a=result.wins_a,
            wins_b=result.wins_b,
            ties=result.ties,
            bleu_a=result.bleu_a,
            bleu_b=result.bleu_b,
            winner=result.winner,
            significant=result.significant(alpha),
        )


@dataclass
class Sample:
    system: str
    child_size: int
    index: int
    source: str
    hypothesis: str
    reference: str


@dataclass
class EvalReport:
    cells: List[Cell] = field(default_factory=list)
    significance: List[SignificanceEntry] = field(default_factory=list)
    samples: List[Sample] = field(default_factory=list)
    provenance: Dict[str, Any] = field(default_factory=dict)

    def cell(self, system: str, size: int) -> Optional[Cell]:
        return next((c for c in self.cells if c.system == system and c.child_size == size), None)

    def test(self, system: str, size: int) -> Optional[SignificanceEntry]:
        return next((s for s in self.significance if s.system == system and s.child_size == size), None)

    @property
    def sizes(self) -> List[int]:
        return sorted({c.child_size for c in self.cells})

    @property
    def systems(self) -> List[str]:
        seen = []
        for c in self.cells:
            if c.system not in seen:
                seen.append(c.system)
        ordered = [s for s in (BASELINE, NO_PREORDER) if s in seen]
        return ordered + [s for s in seen if s not in ordered]

    def to_records(self) -> List[Dict[str, Any]]:
        records = [{"record": "provenance", **self.provenance}]
        records += [{"record": "cell", **asdict(c)} for c in self.cells]
        records += [{"record": "significance", **asdict(s)} for s in self.significance]
        records += [{"record": "sample", **asdict(s)} for s in self.samples]
        return records

    @classmethod
    def from_records(cls, records: List[Dict[str, Any]]) -> "EvalReport":
        report = cls()
        builders = {"cell": Cell, "significance": SignificanceEntry, "sample": Sample}
        targets = {"cell": report.cells, "significance": report.significance, "sample": report.samples}
        for record in records:
            record = dict(record)
            kind = record.pop("record")
            if kind == "provenance":
                report.provenance = record
            elif kind in builders:
                targets[kind].append(builders[kind](**record))
            else:
                raise ValueError(f"unknown record type {kind!r}")
        return report


def render_machine(report: EvalReport) -> str:
    return "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in report.to_records())


def parse_machine(text: str) -> EvalReport:
    return EvalReport.from_records([json.loads(line) for line in text.splitlines() if line.strip()])


def _table(report: EvalReport, title: str, value, mark_significance: bool = False) -> List[str]:
    systems = report.systems
    headers = ["Size"] + [COLUMN_TITLES.get(s, s) for s in systems]
    widths = [max(8, len(h) + 2) for h in headers]
    lines = [title, "".join(h.rjust(w) for h, w in zip(headers, widths)), "-" * sum(widths)]
    for size in report.sizes:
        row = [str(size)]
        for system in systems:
            cell = report.cell(system, size)
            if cell is None:
                row.append(NOT_AVAILABLE)
                continue
            text = value(cell)
            test = report.test(system, size) if mark_significance else None
            if test is not None and test.significant:
                text += DAGGER
            row.append(text)
        lines.append("".join(v.rjust(w) for v, w in zip(row, widths)))
    return lines


def render_text(report: EvalReport) -> str:
    lines = _table(report, "BLEU", lambda c: f"{c.bleu:.2f}", mark_significance=True)
    lines += [""] + _table(report, "LeBLEU", lambda c: f"{c.lebleu:.2f}")
    lines += [""] + _table(report, "UNK tokens", lambda c: str(c.unk_count))
    if report.significance:
        lines += ["", f"{DAGGER} significant difference from {COLUMN_TITLES[NO_PREORDER]} (paired bootstrap)"]
    if report.samples:
        lines += ["", "Sample translations"]
        for s in report.samples:
            lines.append(f"  [{COLUMN_TITLES.get(s.system, s.system)} @ {s.child_size}] #{s.index}")
            lines.append(f"    src: {s.source}")
            lines.append(f"    hyp: {s.hypothesis}")
            lines.append(f"    ref: {s.reference}")
    if report.provenance:
        lines += ["", "Provenance"]
        for key in ("version", "seed", "config_hash", "grammar_sha256", "precision"):
            if key in report.provenance:
                lines.append(f"  {key}: {report.provenance[key]}")
    return "\n".join(lines) + "\n"


def render_report(report: EvalReport, fmt: str = "text") -> str:
    if fmt == "text":
        return render_text(report)
    if fmt == "machine":
        return render_machine(report)
    raise ValueError(f"unknown report format {fmt!r}")


def write_report(report: EvalReport, path, fmt: str = "text") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(render_report(report, fmt))
    return path


def load_report(path) -> EvalReport:
    return parse_machine(Path(path).read_text(encoding="utf-8"))
