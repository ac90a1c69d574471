"""End-to-end planning runs and batch statistics."""

from __future__ import annotations

import json
import os
import random
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .dispatch import DispatchInfeasible, DispatchResult, dispatch
from .extension import LandmarkSchedule, MapOverflow, extend_targets
from .navigation import SimLog, navigate
from .scenario import Scenario
from .tree import AssemblyTree, NoValidDivision, tree_from_placements

__all__ = [
    "StageError",
    "PipelineResult",
    "BatchReport",
    "plan",
    "run_pipeline",
    "write_outputs",
    "batch",
    "WORKERS_ENV",
]

WORKERS_ENV = "USV_ASSEMBLY_WORKERS"
REPORT_FORMAT = "usv-assembly-batch"
REPORT_VERSION = 1


class StageError(Exception):
    """A pipeline stage could not produce its output."""

    def __init__(self, stage: str, cause: Exception):
        self.stage, self.cause = stage, cause
        super().__init__(f"[{stage}] {cause}")

    @property
    def infeasible(self) -> bool:
        return isinstance(self.cause, DispatchInfeasible)


@dataclass
class PipelineResult:
    scenario: Scenario
    dispatch: DispatchResult
    tree: AssemblyTree
    schedule: LandmarkSchedule
    log: Optional[SimLog]
    timings: dict = field(default_factory=dict)

    @property
    def outcome(self) -> str:
        return self.log.outcome if self.log is not None else "Planned"

    def summary(self) -> dict:
        d = self.dispatch
        out = {
            "scenario": self.scenario.name,
            "seed": self.scenario.seed,
            "regime": self.scenario.regime,
            "outcome": self.outcome,
            "c_min": d.c_min,
            "best_cost": d.best_cost,
            "feasible_solution_count": d.feasible_solution_count,
            "iterations": d.iterations,
            "tree_height": self.tree.height,
            "interval": self.schedule.interval,
        }
        if self.log is not None:
            out.update(
                total_steps=self.log.total_steps,
                robot_moves=self.log.robot_moves(),
                final_connectivity=self.log.final_connectivity,
                diagnostic=self.log.diagnostic,
            )
        return out


def plan(scenario: Scenario) -> tuple[DispatchResult, AssemblyTree, LandmarkSchedule]:
    """Stages I to III."""
    try:
        result = dispatch(scenario.targets, scenario.robots, scenario.dispatch)
    except (DispatchInfeasible, ValueError) as e:
        raise StageError("dispatch", e) from e
    placements = result.best.placements(scenario.targets)
    dmls = {r.id: r.dml for r in scenario.robots}
    try:
        tree = tree_from_placements(placements, dmls)
    except NoValidDivision as e:
        raise StageError("tree", e) from e
    try:
        schedule = extend_targets(tree, interval=scenario.interval, grid_map=scenario.grid_map)
    except MapOverflow as e:
        raise StageError("extension", e) from e
    return result, tree, schedule


def run_pipeline(
    scenario: Scenario, out_dir: Union[str, Path, None] = None, navigate_stage: bool = True
) -> PipelineResult:
    """Run every stage and optionally write the artifacts to ``out_dir``."""
    t0 = time.perf_counter()
    result, tree, schedule = plan(scenario)
    t1 = time.perf_counter()
    log = None
    if navigate_stage:
        placements = result.best.placements(scenario.targets)
        log = navigate(
            tree,
            scenario.grid_map,
            schedule,
            scenario.robots,
            placements,
            rng=random.Random(scenario.seed),
            params=scenario.navigation,
        )
    t2 = time.perf_counter()
    out = PipelineResult(scenario, result, tree, schedule, log, {"plan": t1 - t0, "navigate": t2 - t1})
    if out_dir is not None:
        write_outputs(out, out_dir)
    return out


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=False) + "\n"


def write_outputs(res: PipelineResult, out_dir: Union[str, Path]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "tree.json").write_text(_dump(res.tree.to_dict()))
    (out / "schedule.json").write_text(_dump(res.schedule.to_dict()))
    (out / "dispatch.json").write_text(_dump(res.dispatch.to_dict()))
    (out / "summary.json").write_text(_dump(res.summary()))
    if res.log is not None:
        (out / "steps.jsonl").write_text(res.log.to_jsonl())


def _run_row(scenario: Scenario) -> dict:
    t0 = time.perf_counter()
    row = {"seed": scenario.seed, "regime": scenario.regime}
    try:
        res = run_pipeline(scenario)
    except StageError as e:
        row.update(outcome="Infeasible" if e.infeasible else "Fail", stage=e.stage, error=str(e.cause))
        row.update(feasible_solution_count=0, total_steps=None)
    else:
        row.update(
            outcome=res.outcome,
            feasible_solution_count=res.dispatch.feasible_solution_count,
            total_steps=res.log.total_steps,
            robot_moves=res.log.robot_moves(),
        )
        row["timings"] = {k: round(v, 6) for k, v in res.timings.items()}
    row.setdefault("timings", {})
    row["timings"]["total"] = round(time.perf_counter() - t0, 6)
    return row


def _stats(values) -> dict:
    values = [v for v in values if v is not None]
    if not values:
        return {"n": 0, "mean": None, "std": None}
    mean = statistics.fmean(values)
    std = statistics.pstdev(values) if len(values) > 1 else 0.0
    return {"n": len(values), "mean": mean, "std": std}


@dataclass
class BatchReport:
    scenario: str
    regime: str
    rows: list[dict]

    @property
    def aggregates(self) -> dict:
        ok = [r for r in self.rows if r["outcome"] == "Success"]
        return {
            "runs": len(self.rows),
            "success": len(ok),
            "feasible_solution_count": _stats(r["feasible_solution_count"] for r in self.rows),
            "total_steps": _stats(r["total_steps"] for r in ok),
        }

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "scenario": self.scenario,
            "regime": self.regime,
            "aggregates": self.aggregates,
            "rows": self.rows,
        }

    def to_json(self) -> str:
        return _dump(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "BatchReport":
        if data.get("format") != REPORT_FORMAT or data.get("version") != REPORT_VERSION:
            raise ValueError("not a batch report")
        return cls(data["scenario"], data["regime"], list(data["rows"]))


def _workers(requested: Optional[int]) -> int:
    if requested is not None:
        return max(1, requested)
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return 1


def batch(scenario: Scenario, runs: int, workers: Optional[int] = None) -> BatchReport:
    """Run the pipeline with seeds ``seed .. seed + runs - 1``.

    Rows come back in seed order whatever the worker count, which is read
    from the ``USV_ASSEMBLY_WORKERS`` environment variable when not given.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    scenarios = [scenario.with_seed(scenario.seed + k) for k in range(runs)]
    n = _workers(workers)
    if n == 1:
        rows = [_run_row(s) for s in scenarios]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(_run_row, scenarios))
    return BatchReport(scenario.name, scenario.regime, rows)
