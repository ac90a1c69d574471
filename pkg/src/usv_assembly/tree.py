"""Binary (dis)assembly tree built by straight-line cuts of a docked structure.

Every node of the tree holds a set of target cells that is connected in the
docking graph; its two children are the parts on either side of one
horizontal or vertical grid line.  Among the cuts that keep both sides
connected, the one maximizing ``|G1| * |G2|`` is taken.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .core import Cell, Dml, Placement, docking_adjacency, is_connected

__all__ = [
    "Division",
    "AssemblyNode",
    "AssemblyTree",
    "NoValidDivision",
    "all_divisions",
    "best_division",
    "tree_generation",
    "tree_from_placements",
]


class NoValidDivision(Exception):
    """Every straight-line cut of a group disconnects one of its sides."""

    def __init__(self, cells):
        self.cells = frozenset(cells)
        super().__init__(f"no line cut keeps both sides connected for group of {len(self.cells)} cells")


@dataclass(frozen=True)
class Division:
    low: frozenset  # cells with coordinate < line
    high: frozenset  # cells with coordinate >= line
    axis: str  # "x": vertical line, separation along x
    line: int

    @property
    def factor(self) -> int:
        return len(self.low) * len(self.high)


@dataclass
class AssemblyNode:
    cells: frozenset
    axis: Optional[str] = None  # None for leaves
    line: Optional[int] = None
    low: Optional["AssemblyNode"] = None
    high: Optional["AssemblyNode"] = None
    id: int = -1
    depth: int = 0
    parent: Optional["AssemblyNode"] = field(default=None, repr=False, compare=False)

    @property
    def is_leaf(self) -> bool:
        return self.low is None

    @property
    def children(self) -> tuple["AssemblyNode", ...]:
        return () if self.low is None else (self.low, self.high)

    def sibling(self) -> Optional["AssemblyNode"]:
        if self.parent is None:
            return None
        return self.parent.high if self.parent.low is self else self.parent.low

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "depth": self.depth,
            "cells": [list(c) for c in sorted(self.cells)],
        }
        if not self.is_leaf:
            out["axis"] = self.axis
            out["line"] = self.line
            out["low"] = self.low.to_dict()
            out["high"] = self.high.to_dict()
        return out


@dataclass
class AssemblyTree:
    root: AssemblyNode
    levels: list[list[AssemblyNode]]
    ops: int = 0  # cell visits spent on cut evaluation

    @property
    def height(self) -> int:
        return len(self.levels) - 1

    def nodes(self) -> list[AssemblyNode]:
        return [n for level in self.levels for n in level]

    def leaves(self) -> list[AssemblyNode]:
        return [n for n in self.nodes() if n.is_leaf]

    def node(self, node_id: int) -> AssemblyNode:
        return self._by_id[node_id]

    def __post_init__(self):
        self._by_id = {n.id: n for n in self.nodes()}

    def to_dict(self) -> dict:
        return {"height": self.height, "root": self.root.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "AssemblyTree":
        def build(d, parent):
            node = AssemblyNode(
                cells=frozenset(Cell(*c) for c in d["cells"]),
                axis=d.get("axis"),
                line=d.get("line"),
                id=d["id"],
                depth=d["depth"],
                parent=parent,
            )
            if "low" in d:
                node.low = build(d["low"], node)
                node.high = build(d["high"], node)
            return node

        root = build(data["root"], None)
        return cls(root=root, levels=_levels(root))


def all_divisions(cells: Iterable[Cell]) -> list[Division]:
    """All partitions of ``cells`` by one vertical or horizontal grid line."""
    cells = frozenset(cells)
    out = []
    for axis, k in (("x", 0), ("y", 1)):
        coords = sorted({c[k] for c in cells})
        for line in range(coords[0] + 1, coords[-1] + 1):
            low = frozenset(c for c in cells if c[k] < line)
            if low and len(low) < len(cells):
                out.append(Division(low, cells - low, axis, line))
    return out


def best_division(divisions: Iterable[Division], adjacency: Mapping[Cell, set[Cell]]) -> Division:
    """Most balanced cut whose two sides are each docking-connected.

    Ties go to the x axis, then to the lower line coordinate.
    """
    divisions = list(divisions)
    best = None
    for d in sorted(divisions, key=lambda d: (d.axis != "x", d.line)):
        if best is not None and d.factor <= best.factor:
            continue
        if is_connected(d.low, adjacency) and is_connected(d.high, adjacency):
            best = d
    if best is None:
        cells = frozenset().union(*(d.low | d.high for d in divisions)) if divisions else frozenset()
        raise NoValidDivision(cells)
    return best


def _levels(root: AssemblyNode) -> list[list[AssemblyNode]]:
    levels: list[list[AssemblyNode]] = []
    frontier = [root]
    while frontier:
        levels.append(frontier)
        frontier = [c for n in frontier for c in n.children]
    return levels


def tree_generation(cells: Iterable[Cell], adjacency: Mapping[Cell, set[Cell]]) -> AssemblyTree:
    """Recursively split a connected structure down to single cells.

    Node ids follow breadth-first order (root is 0), so a lower id means a
    node closer to the root.
    """
    cells = frozenset(Cell(*c) for c in cells)
    if not cells:
        raise ValueError("empty structure")
    if not is_connected(cells, adjacency):
        raise NoValidDivision(cells)
    ops = 0
    root = AssemblyNode(cells)
    stack = [root]
    while stack:
        node = stack.pop()
        if len(node.cells) == 1:
            continue
        divisions = all_divisions(node.cells)
        ops += len(divisions) * len(node.cells)
        d = best_division(divisions, adjacency)
        node.axis, node.line = d.axis, d.line
        node.low = AssemblyNode(d.low, depth=node.depth + 1, parent=node)
        node.high = AssemblyNode(d.high, depth=node.depth + 1, parent=node)
        stack.extend((node.high, node.low))
    levels = _levels(root)
    next_id = 0
    for level in levels:
        for n in level:
            n.id = next_id
            next_id += 1
    return AssemblyTree(root=root, levels=levels, ops=ops)


def tree_from_placements(placements: Iterable[Placement], dmls: Mapping[int, Dml]) -> AssemblyTree:
    placements = list(placements)
    adjacency = docking_adjacency(placements, dmls)
    return tree_generation([p.cell for p in placements], adjacency)
