"""Stage IV: synchronous grid simulation of gathering, merging and docking.

Each step runs in two phases.  Every group first proposes one move from
its plan.  Proposals are then committed in priority order, and a commit
is accepted only if the group stays on the map, overlaps nobody and stays
at Chebyshev distance >= 2 from every group other than its authorized
docking partner.  A rejected group follows one of two collision rules.
If the block is one-way, the blocked group replans around the groups it
perceives.  If the two groups block each other, the lower-priority one
replans and the higher-priority one waits a few steps.

The run has three phases:

* one rotation step;
* a gathering phase that puts every robot on its fully extended landmark,
  released in layers from the innermost landmarks outwards so no interior
  landmark gets sealed off by its neighbours;
* one merging phase per tree depth, deepest first, in which the moving
  child of each split node is authorized and docks with its partner.
"""

from __future__ import annotations

import heapq
import json
import random
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .core import (
    Cell,
    Dml,
    GridMap,
    Placement,
    RobotSpec,
    chebyshev,
    connectivity_count,
    dock_compatible,
    world_face,
)
from .extension import LandmarkSchedule
from .tree import AssemblyNode, AssemblyTree

__all__ = [
    "NavParams",
    "Group",
    "SimStep",
    "SimLog",
    "World",
    "NoPath",
    "IncompatibleInterface",
    "plan_path",
    "arrival_layers",
    "step",
    "resolve_conflict",
    "try_dock",
    "navigate",
]

LOG_FORMAT = "usv-assembly-simlog"
LOG_VERSION = 1
TOP_PRIORITY = 1_000_000


class NoPath(Exception):
    pass


class IncompatibleInterface(Exception):
    pass


@dataclass(frozen=True)
class NavParams:
    perception_radius: int = 3
    wait_steps: int = 3
    max_replans: int = 20  # per group and phase
    liveness_factor: int = 10
    transit_limit: int = 0  # robots travelling at once while gathering; 0 = whole layer

    def __post_init__(self):
        if (
            self.perception_radius < 1
            or self.wait_steps < 0
            or self.max_replans < 0
            or self.liveness_factor < 1
            or self.transit_limit < 0
        ):
            raise ValueError("invalid navigation parameters")


@dataclass
class Group:
    """A rigid set of docked robots; ``ref`` is the cell of the lowest robot id."""

    id: int  # tree node id
    members: tuple[int, ...]
    offsets: tuple[tuple[int, int], ...]  # per member, relative to ref
    ref: Cell
    priority: int
    partner: Optional[int] = None
    goal: Optional[Cell] = None  # target ref position
    path: list[Cell] = field(default_factory=list)
    wait_counter: int = 0
    replans: int = 0
    authorized: bool = False
    released: bool = True
    hold: int = 0  # steps to stay put once a side-step detour is done

    def cells_at(self, ref) -> list[Cell]:
        return [Cell(ref[0] + dx, ref[1] + dy) for dx, dy in self.offsets]

    @property
    def cells(self) -> list[Cell]:
        return self.cells_at(self.ref)

    @property
    def footprint(self) -> tuple[tuple[int, int], ...]:
        return self.offsets

    def placement_of(self) -> dict[int, Cell]:
        return dict(zip(self.members, self.cells))

    @property
    def arrived(self) -> bool:
        return self.goal is not None and self.ref == self.goal


@dataclass
class SimStep:
    index: int
    robots: list[tuple[int, int, int, int, int]]  # (robot id, x, y, orientation, group id)
    events: list[dict]

    def to_json(self) -> str:
        return json.dumps(
            {"step": self.index, "robots": [list(r) for r in self.robots], "events": self.events},
            separators=(",", ":"),
        )


@dataclass
class SimLog:
    steps: list[SimStep]
    outcome: str  # "Success" | "Fail"
    total_steps: int
    final_placements: dict[int, Cell]
    final_connectivity: int
    diagnostic: Optional[dict] = None
    timings: dict = field(default_factory=dict)  # wall-clock, never serialized into the step log
    max_steps: int = 0
    map_size: Optional[tuple[int, int]] = None
    faces: dict[int, str] = field(default_factory=dict)  # robot id -> face code, for rendering

    @property
    def success(self) -> bool:
        return self.outcome == "Success"

    def robot_moves(self) -> int:
        """Total single-cell robot displacements over the run."""
        n = 0
        for s in self.steps:
            for e in s.events:
                if e["type"] == "Move":
                    n += e["size"]
        return n

    def to_jsonl(self) -> str:
        head: dict = {"format": LOG_FORMAT, "version": LOG_VERSION}
        if self.map_size is not None:
            head["map"] = list(self.map_size)
        if self.faces:
            head["faces"] = {str(r): code for r, code in sorted(self.faces.items())}
        lines = [json.dumps(head, separators=(",", ":"))]
        lines.extend(s.to_json() for s in self.steps)
        lines.append(
            json.dumps(
                {
                    "outcome": self.outcome,
                    "total_steps": self.total_steps,
                    "final_connectivity": self.final_connectivity,
                    "final": [[r, c.x, c.y] for r, c in sorted(self.final_placements.items())],
                    "diagnostic": self.diagnostic,
                },
                separators=(",", ":"),
            )
        )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "SimLog":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or rows[0].get("format") != LOG_FORMAT:
            raise ValueError("not a simulation log")
        if rows[0].get("version") != LOG_VERSION:
            raise ValueError(f"unsupported log version {rows[0].get('version')}")
        tail = rows[-1]
        steps = [SimStep(r["step"], [tuple(x) for x in r["robots"]], r["events"]) for r in rows[1:-1]]
        return cls(
            steps=steps,
            outcome=tail["outcome"],
            total_steps=tail["total_steps"],
            final_placements={r: Cell(x, y) for r, x, y in tail["final"]},
            final_connectivity=tail["final_connectivity"],
            diagnostic=tail["diagnostic"],
            map_size=tuple(rows[0]["map"]) if "map" in rows[0] else None,
            faces={int(r): code for r, code in rows[0].get("faces", {}).items()},
        )


def plan_path(
    grid_map: GridMap,
    footprint: Sequence[tuple[int, int]],
    start: Cell,
    goal: Cell,
    known_blockers: Iterable[Cell] = (),
    direction_order: Sequence[int] = (0, 1, 2, 3),
) -> list[Cell]:
    """Shortest 4-connected translation path of a rigid footprint (A*, Manhattan heuristic).

    ``start`` and ``goal`` are positions of the footprint's reference; the
    returned list excludes ``start`` and ends at ``goal``.
    """
    start, goal = Cell(*start), Cell(*goal)
    blocked = {Cell(*c) for c in known_blockers}

    def free(ref) -> bool:
        for dx, dy in footprint:
            c = (ref[0] + dx, ref[1] + dy)
            if not grid_map.contains(c) or c in blocked:
                return False
        return True

    if not free(goal):
        raise NoPath(f"goal {tuple(goal)} is blocked")
    if start == goal:
        return []

    def h(c):
        return abs(c[0] - goal[0]) + abs(c[1] - goal[1])

    counter = 0
    frontier = [(h(start), 0, counter, start)]
    came: dict[Cell, Cell] = {}
    g_best = {start: 0}
    while frontier:
        _, g, _, cur = heapq.heappop(frontier)
        if cur == goal:
            path = [cur]
            while path[-1] in came:
                path.append(came[path[-1]])
            path.pop()
            return path[::-1]
        if g > g_best.get(cur, g):
            continue
        for d in direction_order:
            nxt = cur.neighbor(d)
            ng = g + 1
            if ng >= g_best.get(nxt, 1 << 30) or not free(nxt):
                continue
            g_best[nxt] = ng
            came[nxt] = cur
            counter += 1
            heapq.heappush(frontier, (ng + h(nxt), ng, counter, nxt))
    raise NoPath(f"no path from {tuple(start)} to {tuple(goal)}")


def _inflate(cells: Iterable[Cell]) -> set[Cell]:
    out = set()
    for c in cells:
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                out.add(Cell(c[0] + dx, c[1] + dy))
    return out


def arrival_layers(landmarks: Mapping[int, Cell], grid_map: GridMap) -> list[list[int]]:
    """Order robots into arrival layers, innermost first.

    A landmark is in the outermost layer if it can be reached from the map
    border with every other landmark occupied, while keeping one empty cell
    between robots.  Removing that layer and repeating gives the next.
    """
    remaining = dict(landmarks)
    peeled: list[list[int]] = []
    border = [
        Cell(x, y)
        for x in range(grid_map.width)
        for y in range(grid_map.height)
        if x in (0, grid_map.width - 1) or y in (0, grid_map.height - 1)
    ]
    while remaining:
        reach = _reachable_from_border(remaining, grid_map, border)
        layer = sorted(r for r, c in remaining.items() if c in reach[r])
        if not layer:
            layer = sorted(remaining)
        peeled.append(layer)
        for r in layer:
            del remaining[r]
    return peeled[::-1]


def _reachable_from_border(present: Mapping[int, Cell], grid_map: GridMap, border) -> dict[int, set]:
    out = {}
    for r, target in present.items():
        blocked = _inflate(c for k, c in present.items() if k != r)
        seen = {c for c in border if c not in blocked}
        queue = deque(seen)
        while queue and target not in seen:
            c = queue.popleft()
            for d in range(4):
                n = c.neighbor(d)
                if n not in seen and grid_map.contains(n) and n not in blocked:
                    seen.add(n)
                    queue.append(n)
        out[r] = seen
    return out


@dataclass
class World:
    grid_map: GridMap
    tree: AssemblyTree
    schedule: LandmarkSchedule
    groups: dict[int, Group]
    orientation: dict[int, int]
    dmls: dict[int, Dml]
    target_of: dict[int, Cell]  # robot -> original target cell
    params: NavParams
    rng: random.Random
    step_index: int = 0
    phase: str = "rotate"
    depth: int = -1
    layers: list[list[int]] = field(default_factory=list)
    layer_index: int = 0
    failed: Optional[dict] = None
    directions: dict[int, tuple[int, ...]] = field(default_factory=dict)

    def snapshot(self) -> list[tuple[int, int, int, int, int]]:
        rows = []
        for g in self.groups.values():
            for r, c in g.placement_of().items():
                rows.append((r, c.x, c.y, self.orientation[r], g.id))
        return sorted(rows)

    def others(self, gid: int):
        return (g for k, g in self.groups.items() if k != gid)


def _exempt(a: Group, b: Group) -> bool:
    return (a.authorized and a.partner == b.id) or (b.authorized and b.partner == a.id)


def _violations(world: World, g: Group, cells: Sequence[Cell], positions: Mapping[int, list[Cell]]) -> list[int]:
    """Groups that ``g`` would overlap or crowd if it occupied ``cells``."""
    hit = []
    own = set(cells)
    for k, other_cells in positions.items():
        if k == g.id:
            continue
        other = world.groups[k]
        if _exempt(g, other):
            if own.intersection(other_cells):
                hit.append(k)
            continue
        if any(chebyshev(a, b) < 2 for a in cells for b in other_cells):
            hit.append(k)
    return hit


def _perceived_obstacles(world: World, g: Group) -> set[Cell]:
    radius = world.params.perception_radius
    mine = g.cells
    obstacles: set[Cell] = set()
    for other in world.others(g.id):
        oc = other.cells
        if not any(chebyshev(a, b) <= radius + 1 for a in mine for b in oc):
            continue
        obstacles |= set(oc) if _exempt(g, other) else _inflate(oc)
    return obstacles


def _replan(
    world: World,
    g: Group,
    events: list[dict],
    reason: str,
    yield_to: Optional[Group] = None,
    side_step: bool = True,
) -> None:
    """Plan around perceived groups, keeping clear of ``yield_to``'s next cells when given.

    If that leaves no route, a yielding group steps aside (``side_step``) or
    the plan falls back to avoiding footprints only.
    """
    g.replans += 1
    events.append({"type": "Replan", "group": g.id, "reason": reason})
    obstacles = _perceived_obstacles(world, g)
    avoid: set[Cell] = set()
    if yield_to is not None:
        ahead = [yield_to.cells_at(p) for p in yield_to.path[: 2 * world.params.perception_radius]]
        avoid = _inflate(c for cells in ahead for c in cells)
    plan = lambda blocked: plan_path(world.grid_map, g.offsets, g.ref, g.goal, blocked, world.directions[g.id])  # noqa: E731
    try:
        g.path = plan(obstacles | avoid)
    except NoPath:
        detour = _side_step(world, g, obstacles, avoid) if avoid and side_step else None
        if detour:
            g.path = detour
            g.hold = world.params.wait_steps + len(detour)
            events.append({"type": "Yield", "group": g.id, "to": yield_to.id})
        else:
            try:
                if not avoid:
                    raise NoPath("no route around footprints")
                g.path = plan(obstacles)
            except NoPath:
                if not (_request_yield(world, g, events) or _request_yield(world, g, events, any_priority=True)):
                    # stay put for a step, then retry optimistically
                    g.wait_counter = max(g.wait_counter, 1)
                    g.path = plan(())
    if g.replans > world.params.max_replans:
        world.failed = {
            "reason": "replan limit",
            "phase": world.phase,
            "depth": world.depth,
            "group": g.id,
            "replans": g.replans,
        }


def _movable(g: Group) -> bool:
    return g.released and not g.arrived and g.goal is not None


def _request_yield(world: World, g: Group, events: list[dict], any_priority: bool = False) -> bool:
    """Ask the lowest-priority movable neighbour whose absence opens a route to step aside.

    Only lower-priority neighbours are asked unless ``any_priority`` is set,
    which is the last resort for a group wedged in with no move of its own.
    """
    radius = world.params.perception_radius
    mine = g.cells
    near = [
        o
        for o in world.others(g.id)
        if any(chebyshev(a, b) <= radius + 1 for a in mine for b in o.cells)
    ]
    for o in sorted(near, key=lambda o: (o.priority, -o.id)):
        if not _movable(o) or (not any_priority and (o.priority, -o.id) >= (g.priority, -g.id)):
            continue
        rest = set()
        for k in near:
            if k is not o:
                rest |= set(k.cells) if _exempt(g, k) else _inflate(k.cells)
        try:
            route = plan_path(world.grid_map, g.offsets, g.ref, g.goal, rest, world.directions[g.id])
        except NoPath:
            continue
        avoid = _inflate(c for p in route[: 2 * radius] for c in g.cells_at(p)) | _inflate(mine)
        detour = _side_step(world, o, _perceived_obstacles(world, o), avoid)
        if not detour:
            continue
        o.path, o.wait_counter = detour, 0
        o.hold = world.params.wait_steps + len(detour)
        g.path = route
        events.append({"type": "Yield", "group": o.id, "to": g.id})
        return True
    return False


def _side_step(world: World, g: Group, obstacles: set[Cell], avoid: set[Cell]) -> Optional[list[Cell]]:
    """Shortest path to the nearest position clear of ``avoid`` (breadth-first over free positions)."""

    def free(ref) -> bool:
        return all(world.grid_map.contains(c) and c not in obstacles for c in g.cells_at(ref))

    came = {g.ref: None}
    queue = deque([g.ref])
    while queue:
        cur = queue.popleft()
        if cur != g.ref and not avoid.intersection(g.cells_at(cur)):
            path = [cur]
            while came[path[-1]] != g.ref:
                path.append(came[path[-1]])
            return path[::-1]
        for d in world.directions[g.id]:
            nxt = cur.neighbor(d)
            if nxt not in came and free(nxt):
                came[nxt] = cur
                queue.append(nxt)
    return None


def _outranks(a: Group, b: Group) -> bool:
    return (a.priority, -a.id) > (b.priority, -b.id)


def resolve_conflict(gi: Group, gj: Group, world: World, mutual: bool, events: list[dict]) -> None:
    """Apply the collision rules to a group ``gi`` whose move was rejected because of ``gj``."""
    if not mutual:
        # the blocked group also keeps clear of the blocker's next cells, so two groups
        # passing each other do not dodge to the same side in lockstep
        ahead = gj if gj.path else None
        _replan(world, gi, events, f"blocked by {gj.id}", yield_to=ahead, side_step=False)
        return
    hi, lo = (gi, gj) if _outranks(gi, gj) else (gj, gi)
    hi.wait_counter = world.params.wait_steps
    events.append({"type": "Wait", "group": hi.id, "steps": world.params.wait_steps})
    _replan(world, lo, events, f"mutual block with {hi.id}", yield_to=hi)


def _siblings(tree: AssemblyTree, a: int, b: int) -> Optional[AssemblyNode]:
    na, nb = tree.node(a), tree.node(b)
    if na.parent is not None and na.parent is nb.parent:
        return na.parent
    return None


def try_dock(gi: Group, gj: Group, world: World) -> Group:
    """Merge two adjacent sibling groups into their parent node's group."""
    parent = _siblings(world.tree, gi.id, gj.id)
    if parent is None:
        raise ValueError(f"groups {gi.id} and {gj.id} are not siblings")
    pi, pj = gi.placement_of(), gj.placement_of()
    cell_robot = {c: r for r, c in {**pi, **pj}.items()}
    latched = False
    adjacent = False
    for r, c in pi.items():
        for d in range(4):
            other = cell_robot.get(c.neighbor(d))
            if other is None or other not in pj:
                continue
            adjacent = True
            a = world_face(world.dmls[r], world.orientation[r], d)
            b = world_face(world.dmls[other], world.orientation[other], (d + 2) % 4)
            if dock_compatible(a, b):
                latched = True
    if not adjacent:
        raise ValueError(f"groups {gi.id} and {gj.id} are not in contact")
    if not latched:
        raise IncompatibleInterface(f"no latching face pair between groups {gi.id} and {gj.id}")
    placement = {**pi, **pj}
    members = tuple(sorted(placement))
    ref = placement[members[0]]
    offsets = tuple((placement[r].x - ref.x, placement[r].y - ref.y) for r in members)
    return Group(id=parent.id, members=members, offsets=offsets, ref=ref, priority=-parent.id, goal=ref)


def _group_for(node_id: int, positions: Mapping[int, Cell], members: Sequence[int], priority: int) -> Group:
    members = tuple(sorted(members))
    ref = positions[members[0]]
    offsets = tuple((positions[r].x - ref.x, positions[r].y - ref.y) for r in members)
    return Group(id=node_id, members=members, offsets=offsets, ref=ref, priority=priority)


def step(world: World) -> list[dict]:
    """Advance the world by one synchronous step; returns the step's events."""
    events: list[dict] = []
    movers = []
    for g in world.groups.values():
        if not g.released or g.arrived or g.goal is None:
            continue
        if g.wait_counter > 0:
            g.wait_counter -= 1
            events.append({"type": "Wait", "group": g.id})
            continue
        if not g.path:
            if g.hold:
                g.wait_counter, g.hold = g.hold - 1, 0
                events.append({"type": "Wait", "group": g.id})
                continue
            g.path = plan_path(world.grid_map, g.offsets, g.ref, g.goal, (), world.directions[g.id])
        movers.append(g)

    proposals = {g.id: g.path[0] for g in movers}
    current = {k: g.cells for k, g in world.groups.items()}
    proposed_cells = {k: world.groups[k].cells_at(p) for k, p in proposals.items()}
    # blocks[i]: groups whose current footprint the next move of i runs into; waiting groups
    # count with the move they are holding back, so two groups taking turns waiting still
    # register as a mutual block
    intents = {
        g.id: g.cells_at(g.path[0])
        for g in world.groups.values()
        if g.released and not g.arrived and g.path and g.id not in proposals
    }
    intents.update(proposed_cells)
    blocks = {k: set(_violations(world, world.groups[k], cells, current)) for k, cells in intents.items()}

    order = sorted(movers, key=lambda g: (-g.priority, g.id))
    committed = dict(current)
    cancelled: set[int] = set()
    for g in order:
        if g.id in cancelled or world.failed:
            continue
        if not g.path or g.path[0] != proposals[g.id] or g.wait_counter > 0:
            # asked to yield earlier in this commit pass; the new plan starts next step
            continue
        cells = proposed_cells[g.id]
        hit = _violations(world, g, cells, committed)
        if not hit:
            dx, dy = proposals[g.id][0] - g.ref[0], proposals[g.id][1] - g.ref[1]
            g.ref = proposals[g.id]
            g.path.pop(0)
            committed[g.id] = cells
            events.append({"type": "Move", "group": g.id, "dx": dx, "dy": dy, "size": len(g.members)})
            continue
        blocker = world.groups[min(hit)]
        mutual = blocker.id in blocks and g.id in blocks[blocker.id]
        resolve_conflict(g, blocker, world, mutual, events)
        if mutual:
            cancelled.add(blocker.id)
    return events


def _start_merge_depth(world: World, depth: int, events: list[dict]) -> None:
    world.phase, world.depth = "merge", depth
    for node in world.tree.levels[depth]:
        if node.is_leaf:
            continue
        shift = world.schedule.shifts[node.id]
        mover = world.groups[shift.moving_child]
        partner = world.groups[shift.unmoving_child]
        target = world.schedule.levels[depth]
        expected = {r: world.schedule.levels[depth + 1][world.target_of[r]] for r in partner.members}
        if partner.placement_of() != expected:
            raise RuntimeError(f"partner {partner.id} is off its landmark")
        mover.goal = target[world.target_of[mover.members[0]]]
        mover.partner = partner.id
        mover.authorized = True
        mover.priority = TOP_PRIORITY
        mover.path = []
        mover.replans = 0
        events.append({"type": "DockAuthorized", "group": mover.id, "partner": partner.id})


def _dock_arrivals(world: World, events: list[dict]) -> None:
    for g in sorted(world.groups.values(), key=lambda g: g.id):
        if g.id not in world.groups or not (g.authorized and g.arrived):
            continue
        partner = world.groups[g.partner]
        merged = try_dock(g, partner, world)
        del world.groups[g.id], world.groups[partner.id]
        world.groups[merged.id] = merged
        world.directions.setdefault(merged.id, (0, 1, 2, 3))
        events.append({"type": "Dock", "groups": sorted([g.id, partner.id]), "into": merged.id})


def _release(world: World, layer: Sequence[int], events: list[dict]) -> None:
    """Release the layer's groups in priority order, at most ``transit_limit`` on the move."""
    limit = world.params.transit_limit or len(layer)
    moving = sum(1 for gid in layer if world.groups[gid].released and not world.groups[gid].arrived)
    for gid in layer:
        if moving >= limit:
            break
        g = world.groups[gid]
        if not g.released:
            g.released = True
            moving += 1
            events.append({"type": "Release", "group": gid})


def _advance_phase(world: World, events: list[dict]) -> bool:
    """Move to the next release layer or merge depth; returns False when finished."""
    if world.phase == "gather":
        layers = world.layers
        if world.layer_index < len(layers) and all(world.groups[g].arrived for g in layers[world.layer_index]):
            world.layer_index += 1
        if world.layer_index < len(layers):
            _release(world, layers[world.layer_index], events)
            return True
        if world.tree.height == 0:
            return False
        _start_merge_depth(world, world.tree.height - 1, events)
        return True
    if any(g.authorized for g in world.groups.values()):
        return True
    if world.depth == 0:
        return False
    _start_merge_depth(world, world.depth - 1, events)
    return True


def navigate(
    tree: AssemblyTree,
    grid_map: GridMap,
    schedule: LandmarkSchedule,
    robots: Sequence[RobotSpec],
    placements: Sequence[Placement],
    rng: Optional[random.Random] = None,
    params: NavParams = NavParams(),
) -> SimLog:
    """Simulate Stage IV for the dispatched robots; idle robots are left out."""
    t0 = time.perf_counter()
    rng = rng or random.Random(0)
    by_id = {r.id: r for r in robots}
    target_of = {p.robot_id: p.cell for p in placements}
    cell_robot = {p.cell: p.robot_id for p in placements}
    orientation = {p.robot_id: by_id[p.robot_id].start_orientation for p in placements}
    dmls = {r: by_id[r].dml for r in target_of}

    groups: dict[int, Group] = {}
    directions: dict[int, tuple[int, ...]] = {}
    landmarks: dict[int, Cell] = {}
    for leaf in tree.leaves():
        (cell,) = leaf.cells
        rid = cell_robot[cell]
        g = Group(id=leaf.id, members=(rid,), offsets=((0, 0),), ref=by_id[rid].start, priority=-leaf.id)
        g.goal = schedule.final[cell]
        g.released = False
        groups[leaf.id] = g
        landmarks[leaf.id] = g.goal
        dirs = [0, 1, 2, 3]
        rng.shuffle(dirs)
        directions[leaf.id] = tuple(dirs)
    for node in tree.nodes():
        directions.setdefault(node.id, (0, 1, 2, 3))

    world = World(
        grid_map=grid_map,
        tree=tree,
        schedule=schedule,
        groups=groups,
        orientation=orientation,
        dmls=dmls,
        target_of=target_of,
        params=params,
        rng=rng,
        directions=directions,
    )
    limit = params.liveness_factor * (grid_map.width + grid_map.height) * max(1, tree.height)
    steps: list[SimStep] = []

    for p in placements:
        if not grid_map.contains(by_id[p.robot_id].start):
            raise ValueError(f"robot {p.robot_id} starts outside the map")
    # phase 0: everybody turns to the dispatched orientation
    events = []
    for p in sorted(placements, key=lambda p: p.robot_id):
        if orientation[p.robot_id] != p.orientation:
            events.append({"type": "Rotate", "robot": p.robot_id, "from": orientation[p.robot_id], "to": p.orientation})
        orientation[p.robot_id] = p.orientation
    world.layers = arrival_layers(landmarks, grid_map)
    world.phase = "gather"
    world.layers = [sorted(layer, key=lambda gid: (-groups[gid].priority, gid)) for layer in world.layers]
    _release(world, world.layers[0], events)
    steps.append(SimStep(0, world.snapshot(), events))
    t_rotate = time.perf_counter()

    running = True
    timings = {"rotate": t_rotate - t0}
    phase_start = t_rotate
    while running:
        events = []
        running = _advance_phase(world, events)
        if not running:
            if events:
                world.step_index += 1
                steps.append(SimStep(world.step_index, world.snapshot(), events))
            break
        if world.step_index + 1 >= limit:
            world.failed = {"reason": "step limit", "phase": world.phase, "depth": world.depth, "limit": limit}
        else:
            events.extend(step(world))
            _dock_arrivals(world, events)
        world.step_index += 1
        if world.failed:
            events.append({"type": "Fail", **world.failed})
            steps.append(SimStep(world.step_index, world.snapshot(), events))
            break
        steps.append(SimStep(world.step_index, world.snapshot(), events))
    timings["navigate"] = time.perf_counter() - phase_start

    final = {r: c for g in world.groups.values() for r, c in g.placement_of().items()}
    final_placements = [Placement(r, final[r], orientation[r]) for r in sorted(final)]
    conn = connectivity_count(final_placements, dmls, len(final_placements))
    ok = world.failed is None and final == target_of and conn == 1
    if world.failed is None and not ok:
        world.failed = {"reason": "final structure differs from targets", "connectivity": conn}
    return SimLog(
        steps=steps,
        outcome="Success" if ok else "Fail",
        total_steps=len(steps),
        final_placements=final,
        final_connectivity=conn,
        diagnostic=world.failed,
        timings=timings,
        max_steps=limit,
        map_size=(grid_map.width, grid_map.height),
        faces={r: d.code for r, d in sorted(dmls.items())},
    )
