"""Top-down expansion of the target structure along the assembly tree.

At every internal node the child that does not contain the node's
extension centre is pushed away from the centre along the split axis by
``L_e = I_e * (W_e + 1) - 1`` cells, where ``W_e`` is the node's current
extent (max - min coordinate) along that axis.  The positions reached after
each tree depth are kept as landmarks; Stage IV traces them in reverse.

With ``clearance`` on (the default) the push is lengthened cell by cell
when it would leave the moving child within one cell of a target that is
not part of it.  Siblings are always clear of each other after a split,
but deeper splits can drive the far side of one subtree towards a cousin;
without the extra push such landmarks could not all be held at once under
the navigation separation rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from .core import Cell, GridMap
from .tree import AssemblyNode, AssemblyTree

__all__ = [
    "MapOverflow",
    "NodeShift",
    "LandmarkSchedule",
    "extension_distance",
    "shift_group",
    "initial_center",
    "extend_targets",
    "replay_reverse",
]


class MapOverflow(Exception):
    """An extended landmark fell outside the map."""


def extension_distance(interval: int, width: int) -> int:
    if interval < 1 or width < 1:
        raise ValueError(f"interval and width must be >= 1, got {interval}, {width}")
    return interval * (width + 1) - 1


def _sign(v: int) -> int:
    return (v > 0) - (v < 0)


def shift_group(coords, center, distance: int, axis: str, grid_map: Optional[GridMap] = None) -> list[Cell]:
    """Push each cell away from ``center`` along ``axis`` by ``distance``.

    A cell level with the centre on that axis does not move.
    """
    if axis not in ("x", "y"):
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    k = 0 if axis == "x" else 1
    out = []
    for c in coords:
        c = Cell(*c)
        step = _sign(c[k] - center[k]) * distance
        moved = Cell(c.x + step, c.y) if k == 0 else Cell(c.x, c.y + step)
        if grid_map is not None and not grid_map.contains(moved):
            raise MapOverflow(f"cell {tuple(c)} shifted to {tuple(moved)} leaves the {grid_map.width}x{grid_map.height} map")
        out.append(moved)
    return out


@dataclass(frozen=True)
class NodeShift:
    node_id: int
    axis: str
    center: Cell  # original target cell used as centre
    moving_child: int
    unmoving_child: int
    width: int  # W_e
    distance: int  # L_e
    sign: int  # direction of the moving child's shift

    @property
    def vector(self) -> tuple[int, int]:
        d = self.sign * self.distance
        return (d, 0) if self.axis == "x" else (0, d)


@dataclass
class LandmarkSchedule:
    """Target positions per tree depth.

    ``levels[d][target]`` is where original target cell ``target`` sits once
    every node shallower than ``d`` has been split; ``levels[0]`` is the
    identity and ``levels[-1]`` is the fully extended configuration.
    """

    levels: list[dict[Cell, Cell]]
    shifts: dict[int, NodeShift]
    interval: int
    ops: int = 0
    clearance: bool = True

    @property
    def final(self) -> dict[Cell, Cell]:
        return self.levels[-1]

    def to_dict(self) -> dict:
        keys = sorted(self.levels[0])
        return {
            "interval": self.interval,
            "clearance": self.clearance,
            "targets": [list(k) for k in keys],
            "levels": [[list(level[k]) for k in keys] for level in self.levels],
            "shifts": [
                {
                    "node": s.node_id,
                    "axis": s.axis,
                    "center": list(s.center),
                    "moving": s.moving_child,
                    "unmoving": s.unmoving_child,
                    "width": s.width,
                    "distance": s.distance,
                    "sign": s.sign,
                }
                for s in sorted(self.shifts.values(), key=lambda s: s.node_id)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LandmarkSchedule":
        keys = [Cell(*k) for k in data["targets"]]
        levels = [{k: Cell(*v) for k, v in zip(keys, level)} for level in data["levels"]]
        shifts = {
            s["node"]: NodeShift(
                node_id=s["node"],
                axis=s["axis"],
                center=Cell(*s["center"]),
                moving_child=s["moving"],
                unmoving_child=s["unmoving"],
                width=s["width"],
                distance=s["distance"],
                sign=s["sign"],
            )
            for s in data["shifts"]
        }
        return cls(levels=levels, shifts=shifts, interval=data["interval"], clearance=data.get("clearance", True))


def _closest(cells, point) -> Cell:
    return min(cells, key=lambda c: ((c[0] - point[0]) ** 2 + (c[1] - point[1]) ** 2, c))


def initial_center(cells) -> Cell:
    """Target cell nearest the structure centroid (lowest cell on ties)."""
    cells = list(cells)
    cx = sum(c[0] for c in cells) / len(cells)
    cy = sum(c[1] for c in cells) / len(cells)
    return min(cells, key=lambda c: ((c[0] - cx) ** 2 + (c[1] - cy) ** 2, c))


def extend_targets(
    tree: AssemblyTree,
    center: Optional[Cell] = None,
    interval: int = 1,
    grid_map: Optional[GridMap] = None,
    clearance: bool = True,
) -> LandmarkSchedule:
    root = tree.root
    center = Cell(*center) if center is not None else initial_center(root.cells)
    if center not in root.cells:
        raise ValueError(f"extension centre {tuple(center)} is not a target cell")
    pos: dict[Cell, Cell] = {c: c for c in root.cells}
    centers: dict[int, Cell] = {root.id: center}
    levels = [dict(pos)]
    shifts: dict[int, NodeShift] = {}
    ops = 0
    for level in tree.levels:
        split_any = False
        for node in level:
            if node.is_leaf:
                continue
            split_any = True
            ops += len(node.cells)
            shifts[node.id] = _split(node, centers, pos, interval, grid_map, clearance)
        if split_any:
            levels.append(dict(pos))
    return LandmarkSchedule(levels=levels, shifts=shifts, interval=interval, ops=ops, clearance=clearance)


def _crowded(cells, others: set) -> bool:
    return any((c.x + dx, c.y + dy) in others for c in cells for dx in (-1, 0, 1) for dy in (-1, 0, 1))


def _split(
    node: AssemblyNode, centers: dict[int, Cell], pos: dict[Cell, Cell], interval: int, grid_map, clearance: bool
) -> NodeShift:
    c = centers[node.id]
    k = 0 if node.axis == "x" else 1
    if c in node.low.cells:
        unmoving, moving = node.low, node.high
    else:
        unmoving, moving = node.high, node.low
    axis_coords = [pos[t][k] for t in node.cells]
    width = max(axis_coords) - min(axis_coords)
    distance = extension_distance(interval, width)
    c_now = pos[c]
    members = sorted(moving.cells)
    old = [pos[t] for t in members]
    if clearance:
        moving_set = set(members)
        others = {tuple(p) for t, p in pos.items() if t not in moving_set}
        while _crowded(shift_group(old, c_now, distance, node.axis), others):
            distance += 1
    new = shift_group(old, c_now, distance, node.axis, grid_map)
    sign = _sign(pos[members[0]][k] - c_now[k])
    for t, p in zip(members, new):
        pos[t] = p
    # the moving child's centre is its member nearest the old centre, judged before the move
    centers[moving.id] = _closest(moving.cells, c)
    centers[unmoving.id] = c
    return NodeShift(
        node_id=node.id,
        axis=node.axis,
        center=c,
        moving_child=moving.id,
        unmoving_child=unmoving.id,
        width=width,
        distance=distance,
        sign=sign,
    )


def replay_reverse(schedule: LandmarkSchedule, tree: AssemblyTree) -> dict[Cell, Cell]:
    """Undo the shifts bottom-up starting from the fully extended positions."""
    pos = dict(schedule.final)
    for level in reversed(tree.levels):
        for node in level:
            s = schedule.shifts.get(node.id)
            if s is None:
                continue
            dx, dy = s.vector
            for t in tree.node(s.moving_child).cells:
                pos[t] = Cell(pos[t].x - dx, pos[t].y - dy)
    return pos


def sibling_gap(schedule: LandmarkSchedule, tree: AssemblyTree, node_id: int, level: Optional[int] = None) -> int:
    """Empty cells between a node's two children along its split axis."""
    node = tree.node(node_id)
    k = 0 if node.axis == "x" else 1
    positions = schedule.levels[-1 if level is None else level]
    low = [positions[t][k] for t in node.low.cells]
    high = [positions[t][k] for t in node.high.cells]
    if min(high) > max(low):
        return min(high) - max(low) - 1
    if min(low) > max(high):
        return min(low) - max(high) - 1
    return -1
