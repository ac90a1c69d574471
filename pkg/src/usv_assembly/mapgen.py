"""Generator and loader for the bundled scenarios.

A bundled map fixes a target shape, the robot and docking-mechanism counts
and a map size.  Docking mechanisms are placed by drawing a random spanning
tree of the shape's grid graph plus extra edges until the dock total is
used up, so the shape is known to be assemblable.  Each robot then gets
the faces of one target cell, a random body rotation and a random start on
the map border.  The genderless and gendered variants of a map share the
shape, the edge set and the starts; in the gendered variant each docking
edge carries one male and one female face.

Regenerate the files with ``python -m usv_assembly.mapgen <out_dir>``.
"""

from __future__ import annotations

import random
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from .core import Cell, Dml, FaceKind, GridMap, RobotSpec, chebyshev
from .extension import extend_targets
from .scenario import Scenario, dump_scenario, parse_scenario
from .tree import NoValidDivision, tree_generation

__all__ = ["MapSpec", "MAP_SPECS", "generate", "bundled", "bundled_names", "shape_cells"]


@dataclass(frozen=True)
class MapSpec:
    name: str
    shape: tuple[str, ...]  # rows top to bottom, '#' marks a target
    n_robots: int
    dock_total: int
    seed: int
    margin: int = 4


MAP_SPECS = (
    MapSpec("map1", ("###", "###"), 6, 12, 11),
    MapSpec("map2", (".##.", ".##.", "####", "####"), 15, 27, 12),
    MapSpec("map3", ("##....", "##....", "##....", "######", "######"), 18, 42, 13),
    MapSpec("map4", ("#######",) * 4, 28, 78, 14),
)


def shape_cells(rows) -> list[Cell]:
    h = len(rows)
    return sorted(Cell(x, h - 1 - y) for y, row in enumerate(rows) for x, ch in enumerate(row) if ch == "#")


def _grid_edges(cells) -> list[tuple[Cell, int]]:
    cs = set(cells)
    return [(c, d) for c in sorted(cs) for d in (0, 1) if c.neighbor(d) in cs]


def _spanning_edges(cells, rng: random.Random, extra: int):
    edges = _grid_edges(cells)
    rng.shuffle(edges)
    parent = {c: c for c in cells}

    def find(c):
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    chosen, rest = [], []
    for c, d in edges:
        a, b = find(c), find(c.neighbor(d))
        if a != b:
            parent[a] = b
            chosen.append((c, d))
        else:
            rest.append((c, d))
    if extra > len(rest):
        raise ValueError("dock total exceeds what the shape can hold")
    return chosen + rest[:extra]


def _faces_for(cells, edges, regime: str, rng: random.Random) -> dict[Cell, list[FaceKind]]:
    world = {c: [FaceKind.NONE] * 4 for c in cells}
    for c, d in edges:
        n = c.neighbor(d)
        if regime == "genderless":
            a = b = FaceKind.GENDERLESS
        else:
            a, b = (FaceKind.MALE, FaceKind.FEMALE) if rng.random() < 0.5 else (FaceKind.FEMALE, FaceKind.MALE)
        world[c][d] = a
        world[n][(d + 2) % 4] = b
    return world


def _border_starts(grid_map: GridMap, n: int, rng: random.Random) -> list[Cell]:
    w, h = grid_map.width, grid_map.height
    ring = [Cell(x, 0) for x in range(w)] + [Cell(w - 1, y) for y in range(1, h)]
    ring += [Cell(x, h - 1) for x in range(w - 2, -1, -1)] + [Cell(0, y) for y in range(h - 2, 0, -1)]
    for spacing in (3, 2):
        for _ in range(200):
            picks: list[Cell] = []
            for c in rng.sample(ring, len(ring)):
                if all(chebyshev(c, p) >= spacing for p in picks):
                    picks.append(c)
                    if len(picks) == n:
                        return picks
    raise ValueError(f"cannot place {n} robots on the border of a {w}x{h} map")


def _extent(cells, adjacency, interval: int) -> tuple[int, int, int, int]:
    tree = tree_generation(cells, adjacency)
    pos = extend_targets(tree, interval=interval).final.values()
    xs, ys = [p.x for p in pos], [p.y for p in pos]
    return min(xs), min(ys), max(xs), max(ys)


def generate(spec: MapSpec, regime: str, interval: int = 1, check_seeds: int = 30) -> Scenario:
    """Build one bundled scenario; deterministic in ``spec.seed``.

    The margin around the structure grows until the extended landmarks of
    the first ``check_seeds`` planning runs stay on the map.
    """
    margin = spec.margin
    while True:
        sc = _generate(spec, regime, interval, margin)
        if not any(_overflows(sc.with_seed(seed)) for seed in range(check_seeds)):
            return sc
        margin += 1


def _overflows(sc: Scenario) -> bool:
    from .pipeline import StageError, plan

    try:
        plan(sc)
    except StageError as e:
        return e.stage == "extension"
    return False


def _generate(spec: MapSpec, regime: str, interval: int, margin: int) -> Scenario:
    if regime not in ("genderless", "gendered"):
        raise ValueError("regime must be genderless or gendered")
    rng = random.Random(spec.seed)
    base = shape_cells(spec.shape)
    m = len(base)
    idle = spec.n_robots - m
    for _ in range(1000):
        n_edges = min((spec.dock_total - idle) // 2, len(_grid_edges(base)))
        edges = _spanning_edges(base, rng, n_edges - (m - 1))
        adj = {c: set() for c in base}
        for c, d in edges:
            adj[c].add(c.neighbor(d))
            adj[c.neighbor(d)].add(c)
        try:
            lo_x, lo_y, hi_x, hi_y = _extent(base, adj, interval)
            fx0, fy0, fx1, fy1 = _extent(base, {c: {c.neighbor(d) for d in range(4)} & set(base) for c in base}, interval)
        except NoValidDivision:
            continue
        break
    else:
        raise RuntimeError("no decomposable edge set found")
    lo_x, lo_y = min(lo_x, fx0), min(lo_y, fy0)
    hi_x, hi_y = max(hi_x, fx1), max(hi_y, fy1)
    shift = Cell(margin - lo_x, margin - lo_y)
    grid_map = GridMap(hi_x - lo_x + 1 + 2 * margin, hi_y - lo_y + 1 + 2 * margin)
    targets = [c + shift for c in base]

    # gendered sides are drawn from their own stream so both variants share everything else
    face_rng = random.Random(spec.seed * 7919 + 1)
    world = _faces_for(base, edges, "genderless", face_rng)
    if regime == "gendered":
        world = _faces_for(base, edges, "gendered", face_rng)
    dmls: list[Dml] = []
    for c in base:
        q = rng.randrange(4)
        dmls.append(Dml(tuple(world[c][(i + q) % 4] for i in range(4))))
    spare = spec.dock_total - 2 * len(edges)
    for k in range(idle):
        docks = spare // idle + (1 if k < spare % idle else 0)
        faces = [FaceKind.NONE] * 4
        for i in rng.sample(range(4), docks):
            if regime == "genderless":
                faces[i] = FaceKind.GENDERLESS
            else:
                faces[i] = FaceKind.MALE if face_rng.random() < 0.5 else FaceKind.FEMALE
        dmls.append(Dml(tuple(faces)))
    order = list(range(spec.n_robots))
    rng.shuffle(order)
    starts = _border_starts(grid_map, spec.n_robots, rng)
    robots = [
        RobotSpec(id=k, start=starts[k], start_orientation=rng.randrange(4), dml=dmls[order[k]])
        for k in range(spec.n_robots)
    ]
    sc = Scenario(
        grid_map=grid_map,
        robots=robots,
        targets=targets,
        regime=regime,
        name=f"{spec.name}-{regime}",
        interval=interval,
    )
    sc.validate()
    return sc


def _data_dir():
    return resources.files("usv_assembly") / "data"


def bundled_names() -> list[str]:
    return sorted(p.name[: -len(".scn")] for p in _data_dir().iterdir() if p.name.endswith(".scn"))


def bundled(name: str) -> Scenario:
    """Load a bundled scenario such as ``"map1-genderless"`` or ``"demo-pair"``."""
    path = _data_dir() / f"{name}.scn"
    if not path.is_file():
        raise KeyError(f"unknown bundled scenario {name!r}; available: {', '.join(bundled_names())}")
    return parse_scenario(path.read_text(encoding="utf-8"), source=f"{name}.scn")


DEMO_PAIR = """\
usv-assembly-scenario 1
# two robots with one genderless dock each, docking into a 1x2 bar
name demo-pair
map 6 6
regime genderless
seed 0
robot 0 0 0 1 GNNN
robot 1 5 5 3 NGNN
target 2 2
target 3 2
"""


def main(argv: Optional[list[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    out = Path(argv[0]) if argv else Path(__file__).parent / "data"
    out.mkdir(parents=True, exist_ok=True)
    (out / "demo-pair.scn").write_text(DEMO_PAIR)
    for spec in MAP_SPECS:
        for regime in ("genderless", "gendered"):
            sc = generate(spec, regime)
            (out / f"{sc.name}.scn").write_text(dump_scenario(sc))
            print(f"{sc.name}: {sc.grid_map.width}x{sc.grid_map.height}, M={sc.n_targets}, N={sc.n_robots}, docks={sc.dock_total}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
