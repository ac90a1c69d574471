"""Self-assembly planning for modular unmanned surface vessels.

The pipeline runs in four stages: dispatch robots to target cells
(``dispatch``), split the structure into an assembly tree (``tree``), push
the targets apart into per-level landmarks (``extension``) and simulate
gathering and docking on the grid (``navigation``).  ``dynamics`` holds the
continuous vessel model and its controllers.
"""

from .core import Cell, Dml, FaceKind, GridMap, Placement, RobotSpec, connectivity_count
from .dispatch import DispatchInfeasible, DispatchParams, DispatchResult, Solution, dispatch
from .extension import LandmarkSchedule, MapOverflow, extend_targets, replay_reverse
from .mapgen import bundled, bundled_names
from .navigation import NavParams, SimLog, navigate
from .pipeline import BatchReport, PipelineResult, StageError, batch, plan, run_pipeline
from .scenario import ParseError, Scenario, ValidationError, dump_scenario, load_scenario, parse_scenario
from .tree import AssemblyNode, AssemblyTree, NoValidDivision, best_division, tree_from_placements, tree_generation

__version__ = "0.1.0"

__all__ = [
    "Cell", "Dml", "FaceKind", "GridMap", "Placement", "RobotSpec", "connectivity_count",
    "DispatchInfeasible", "DispatchParams", "DispatchResult", "Solution", "dispatch",
    "LandmarkSchedule", "MapOverflow", "extend_targets", "replay_reverse",
    "bundled", "bundled_names",
    "NavParams", "SimLog", "navigate",
    "BatchReport", "PipelineResult", "StageError", "batch", "plan", "run_pipeline",
    "ParseError", "Scenario", "ValidationError", "dump_scenario", "load_scenario", "parse_scenario",
    "AssemblyNode", "AssemblyTree", "NoValidDivision", "best_division", "tree_from_placements", "tree_generation",
]
