"""
Seed Sweep
==========

Runs the experiment once per seed and checks the directional claims across
seeds: pre-ordering helps with no child data, produces fewer UNKs, loses its
edge as the child corpus grows, and every transfer system beats training from
scratch.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd

from src.metrics.engine import MetricsEngine
from src.pipeline.config import BASELINE, NO_PREORDER, ExperimentConfig
from src.pipeline.experiment import run_experiment
from src.pipeline.report import EvalReport, SignificanceEntry

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


def cells_frame(reports: Dict[int, EvalReport]) -> pd.DataFrame:
    rows = []
    for seed, report in reports.items():
        for c in report.cells:
            rows.append({"seed": seed, "system": c.system, "size": c.child_size, "bleu": c.bleu, "unk": c.unk_count})
    return pd.DataFrame(rows, columns=["seed", "system", "size", "bleu", "unk"])


def _significantly_better(test: Optional[SignificanceEntry], alpha: float) -> bool:
    """Pre-ordered system (side a) won and the bootstrap p-value clears alpha."""
    return test is not None and test.winner == "a" and test.p_value < alpha


def summarize(reports: Dict[int, EvalReport], alpha: float = 0.05) -> Dict:
    frame = cells_frame(reports)
    if frame.empty:
        return {"seeds": [], "systems": {}}
    sizes = sorted(frame["size"].unique())
    largest = int(sizes[-1])
    zero = frame[frame["size"] == 0]
    systems = [s for s in zero["system"].unique() if s != BASELINE]
    bleu = frame.pivot_table(index=["seed", "size"], columns="system", values="bleu")
    unk0 = zero.pivot_table(index="seed", columns="system", values="unk")

    summary = {"seeds": sorted(int(s) for s in reports), "alpha": alpha, "largest_size": largest, "systems": {}}
    for system in systems:
        entry = {"median_bleu_size_0": float(zero[zero["system"] == system]["bleu"].median())}
        if system != NO_PREORDER:
            gap = bleu[system] - bleu[NO_PREORDER]
            gap0 = gap.xs(0, level="size")
            gap_last = gap.xs(largest, level="size")
            entry.update(
                {
                    "median_gap_size_0": float(gap0.median()),
                    "significant_size_0": sum(1 for r in reports.values() if _significantly_better(r.test(system, 0), alpha)),
                    "fewer_or_equal_unk": int((unk0[system] <= unk0[NO_PREORDER]).sum()),
                    "gap_narrows": int((gap_last < gap0).sum()) if largest > 0 else 0,
                }
            )
        summary["systems"][system] = entry

    nonzero = frame[(frame["size"] > 0)]
    baseline_wins = 0
    if not nonzero.empty and BASELINE in set(nonzero["system"]):
        table = nonzero.pivot_table(index=["seed", "size"], columns="system", values="bleu")
        transfer = [s for s in table.columns if s != BASELINE]
        beats = table[transfer].gt(table[BASELINE], axis=0).all(axis=1)
        baseline_wins = int(beats.groupby(level="seed").all().sum())
    summary["transfer_beats_baseline"] = baseline_wins
    return summary


def render_summary(summary: Dict) -> str:
    n = len(summary.get("seeds", []))
    lines = [f"Seed sweep over {n} seeds: {summary.get('seeds')}", ""]
    header = f"{'System':<12}{'Median BLEU@0':>15}{'Gap@0':>9}{'p<alpha':>9}{'UNK<=':>8}{'Narrows':>9}"
    lines += [header, "-" * len(header)]
    for system, e in summary.get("systems", {}).items():
        if "median_gap_size_0" in e:
            lines.append(
                f"{system:<12}{e['median_bleu_size_0']:>15.2f}{e['median_gap_size_0']:>9.2f}"
                f"{e['significant_size_0']:>6}/{n:<2}{e['fewer_or_equal_unk']:>5}/{n:<2}{e['gap_narrows']:>6}/{n:<2}"
            )
        else:
            lines.append(f"{system:<12}{e['median_bleu_size_0']:>15.2f}")
    if "transfer_beats_baseline" in summary:
        lines += ["", f"All transfer systems beat the no-transfer baseline: {summary['transfer_beats_baseline']}/{n} seeds"]
    return "\n".join(lines) + "\n"


def run_sweep(
    config: ExperimentConfig,
    seeds: Sequence[int],
    out,
    force: bool = False,
    resume: bool = False,
) -> Dict:
    out = Path(out)
    reports: Dict[int, EvalReport] = {}
    for seed in seeds:
        logger.info(f"Sweep: running seed {seed}")
        reports[seed] = run_experiment(config.with_seed(seed), out / f"seed_{seed}", force=force, resume=resume)

    alpha = MetricsEngine(str(config.metrics_path)).alpha
    summary = summarize(reports, alpha)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep_summary.json", "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    (out / "sweep_summary.txt").write_text(render_summary(summary), encoding="utf-8")
    logger.info(f"Sweep summary written to {out / 'sweep_summary.txt'}")
    return summary


def seed_list(spec: str) -> List[int]:
    """Parse ``1,2,3`` or ``1-5``."""
    seeds: List[int] = []
    for part in spec.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    return seeds
