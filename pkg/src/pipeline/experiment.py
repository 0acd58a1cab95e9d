"""
Experiment Orchestrator
=======================

Runs the full transfer experiment from one config:

1. generate and split the synthetic corpus
2. pre-order the parent data per system, pivot the child data through the dictionary
3. build shared vocabularies
4. train one parent per system
5. per child size: transfer + fine-tune each parent and train the no-transfer baseline
6. score, test significance and write the report

Stage results are recorded in ``stages.json``. A rerun into a used directory
needs ``force`` (run every stage again) or ``resume`` (skip stages whose cache
key is unchanged). A lock file keeps two runs out of the same directory.
"""

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional

from src.pipeline.config import ExperimentConfig
from src.pipeline.report import EvalReport, load_report
from src.pipeline.stages import BaseStage, StageContext, StageFailed, StageResult, create_stage

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

MANIFEST = "stages.json"
LOCK = ".lock"


class OutputExists(RuntimeError):
    pass


class LockHeld(RuntimeError):
    pass


class RunLock:
    """Exclusive lock file inside the output directory."""

    def __init__(self, out_dir: Path):
        self.path = Path(out_dir) / LOCK
        self._held = False

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError as e:
            raise LockHeld(f"another run holds {self.path}") from e
        with os.fdopen(fd, "w") as f:
            f.write(str(os.getpid()))
        self._held = True
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self._held:
            self.path.unlink(missing_ok=True)
            self._held = False


class StageManifest:
    def __init__(self, path: Path):
        self.path = Path(path)
        self.entries: Dict[str, Dict] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as f:
                self.entries = json.load(f).get("stages", {})

    def get(self, name: str) -> Optional[Dict]:
        return self.entries.get(name)

    def record(self, result: StageResult) -> None:
        self.entries[result.stage] = result.to_dict()
        self.save()

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump({"stages": self.entries}, f, indent=2, sort_keys=True)
        os.replace(tmp, self.path)


def _run_stage(stage: BaseStage, previous: Optional[Dict], resume: bool) -> StageResult:
    return stage.run(previous, resume)


class ExperimentRunner:
    def __init__(self, config: ExperimentConfig, out_dir, force: bool = False, resume: bool = False):
        self.config = config
        self.out_dir = Path(out_dir).resolve()
        self.force = force
        self.resume = resume and not force
        self.ctx = StageContext(config, self.out_dir)

    def plan(self) -> List[List[BaseStage]]:
        """Stages grouped in phases; stages inside a phase are independent."""
        c, ctx = self.config, self.ctx
        systems = list(c.systems)
        phases = [
            [create_stage("data", ctx)],
            [create_stage("preorder", ctx, system=s) for s in systems] + [create_stage("xlate", ctx), create_stage("vocab", ctx)],
            [create_stage("parent", ctx, system=s) for s in systems],
            [create_stage("child", ctx, system=s, size=k) for k in c.ladder for s in systems]
            + [create_stage("baseline", ctx, size=k) for k in c.ladder if k > 0],
            [create_stage("evaluate", ctx)],
        ]
        self._check_dag(phases)
        return phases

    def _check_dag(self, phases: List[List[BaseStage]]) -> None:
        produced = set()
        for phase in phases:
            for stage in phase:
                stage.check_acyclic()
                for path in stage.inputs():
                    if self.out_dir in Path(path).parents and path not in produced:
                        raise StageFailed(stage.name, f"input {path} is not produced by an earlier stage")
            for stage in phase:
                produced.update(stage.outputs())

    def _check_output_dir(self) -> None:
        used = (self.out_dir / MANIFEST).exists() or (self.out_dir / "report.jsonl").exists()
        if used and not (self.force or self.resume):
            raise OutputExists(f"{self.out_dir} already holds an experiment; use --force or --resume")

    def run(self) -> EvalReport:
        self._check_output_dir()
        with RunLock(self.out_dir):
            manifest = StageManifest(self.out_dir / MANIFEST)
            if self.force:
                manifest.entries = {}
            phase_names = ["generating synthetic data", "preparing corpora", "training parents",
                           "transferring to child sizes", "evaluating"]
            for n, (title, phase) in enumerate(zip(phase_names, self.plan()), start=1):
                logger.info(f"Phase {n}: {title}... ({len(phase)} stages)")
                self._run_phase(phase, manifest, parallel=n in (3, 4))
            logger.info(f"Experiment complete: {self.out_dir / 'report.txt'}")
        return load_report(self.out_dir / "report.jsonl")

    def _run_phase(self, phase: List[BaseStage], manifest: StageManifest, parallel: bool) -> None:
        if parallel and self.config.workers > 1 and len(phase) > 1:
            with ProcessPoolExecutor(max_workers=self.config.workers) as pool:
                futures = [pool.submit(_run_stage, s, manifest.get(s.name), self.resume) for s in phase]
                results = [f.result() for f in futures]
        else:
            results = []
            for stage in phase:
                results.append(_run_stage(stage, manifest.get(stage.name), self.resume))
                if not results[-1].success:
                    break
        for result in results:
            manifest.record(result)
        for result in results:
            if not result.success:
                raise StageFailed(result.stage, result.error_message or "unknown error")


def run_experiment(config: ExperimentConfig, out_dir, force: bool = False, resume: bool = False) -> EvalReport:
    return ExperimentRunner(config, out_dir, force=force, resume=resume).run()
