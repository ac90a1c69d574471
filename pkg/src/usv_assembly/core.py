"""Grid geometry, docking-mechanism layouts and docking-graph connectivity.

Conventions used throughout the package:

* world directions are indexed ``0: +x, 1: +y, 2: -x, 3: -y``;
* body sides are indexed ``0: fore, 1: left, 2: aft, 3: right``; at
  orientation 0 the fore side points to +x;
* an orientation is an integer number of counter-clockwise quarter turns
  in ``{0, 1, 2, 3}``; body side ``i`` then faces world direction
  ``(i + q) % 4``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, NamedTuple

__all__ = [
    "Cell",
    "FaceKind",
    "Dml",
    "RobotSpec",
    "GridMap",
    "Placement",
    "UnionFind",
    "DuplicateCellError",
    "DIRECTIONS",
    "dock_compatible",
    "check_orientation",
    "world_face",
    "world_faces",
    "docking_adjacency",
    "docking_edges",
    "connectivity_count",
    "chebyshev",
    "components",
    "is_connected",
]


class Cell(NamedTuple):
    """A grid cell; the cell side is one robot length."""

    x: int
    y: int

    def __add__(self, other):  # type: ignore[override]
        return Cell(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Cell(self.x - other[0], self.y - other[1])

    def neighbor(self, direction: int) -> "Cell":
        dx, dy = DIRECTIONS[direction]
        return Cell(self.x + dx, self.y + dy)


# world direction index -> unit step
DIRECTIONS: tuple[tuple[int, int], ...] = ((1, 0), (0, 1), (-1, 0), (0, -1))


class FaceKind(Enum):
    NONE = "N"
    GENDERLESS = "G"
    MALE = "M"
    FEMALE = "F"


def dock_compatible(a: FaceKind, b: FaceKind) -> bool:
    """Return True if two facing sides latch.

    Genderless mates only with genderless, male only with female. Mixed
    genderless/gendered contact does not dock.
    """
    if a is FaceKind.GENDERLESS:
        return b is FaceKind.GENDERLESS
    if a is FaceKind.MALE:
        return b is FaceKind.FEMALE
    if a is FaceKind.FEMALE:
        return b is FaceKind.MALE
    return False


@dataclass(frozen=True)
class Dml:
    """Docking-mechanism layout: one face kind per body side."""

    faces: tuple[FaceKind, FaceKind, FaceKind, FaceKind]

    def __post_init__(self):
        if len(self.faces) != 4 or not all(isinstance(f, FaceKind) for f in self.faces):
            raise ValueError(f"a DML needs exactly four FaceKind entries, got {self.faces!r}")

    @classmethod
    def parse(cls, text: str) -> "Dml":
        """Build from a four-letter code such as ``"GNGN"`` (fore, left, aft, right)."""
        text = text.strip().upper()
        if len(text) != 4:
            raise ValueError(f"DML code must have 4 letters, got {text!r}")
        return cls(tuple(FaceKind(ch) for ch in text))  # type: ignore[arg-type]

    @property
    def code(self) -> str:
        return "".join(f.value for f in self.faces)

    @property
    def n_docks(self) -> int:
        return sum(f is not FaceKind.NONE for f in self.faces)

    def is_dockable(self) -> bool:
        return self.n_docks > 0


def check_orientation(q: int) -> int:
    if not isinstance(q, int) or isinstance(q, bool) or not 0 <= q <= 3:
        raise ValueError(f"orientation must be an integer quarter-turn count in 0..3, got {q!r}")
    return q


def world_face(dml: Dml, orientation: int, direction: int) -> FaceKind:
    """Face kind presented toward world ``direction`` after rotating by ``orientation``."""
    return dml.faces[(direction - orientation) % 4]


def world_faces(dml: Dml, orientation: int) -> tuple[FaceKind, ...]:
    return tuple(dml.faces[(d - orientation) % 4] for d in range(4))


@dataclass(frozen=True)
class RobotSpec:
    id: int
    start: Cell
    start_orientation: int
    dml: Dml

    def __post_init__(self):
        object.__setattr__(self, "start", Cell(*self.start))
        check_orientation(self.start_orientation)


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"map must be at least 1x1, got {self.width}x{self.height}")

    def contains(self, cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height


@dataclass(frozen=True)
class Placement:
    robot_id: int
    cell: Cell
    orientation: int

    def __post_init__(self):
        object.__setattr__(self, "cell", Cell(*self.cell))
        check_orientation(self.orientation)


class DuplicateCellError(ValueError):
    pass


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.components = n

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.components -= 1
        return True


def _index_cells(placements: Iterable[Placement]) -> dict[Cell, Placement]:
    by_cell: dict[Cell, Placement] = {}
    for p in placements:
        if p.cell in by_cell:
            raise DuplicateCellError(f"two placements share cell {tuple(p.cell)}")
        by_cell[p.cell] = p
    return by_cell


def docking_edges(placements: Iterable[Placement], dmls: Mapping[int, Dml]) -> list[tuple[Cell, Cell]]:
    """Pairs of 4-adjacent placed cells whose facing sides latch.

    Each pair is reported once, as (cell, cell + x) or (cell, cell + y).
    """
    by_cell = _index_cells(placements)
    edges = []
    for cell, p in sorted(by_cell.items()):
        for direction in (0, 1):
            other = by_cell.get(cell.neighbor(direction))
            if other is None:
                continue
            a = world_face(dmls[p.robot_id], p.orientation, direction)
            b = world_face(dmls[other.robot_id], other.orientation, direction + 2)
            if dock_compatible(a, b):
                edges.append((cell, other.cell))
    return edges


def docking_adjacency(placements: Iterable[Placement], dmls: Mapping[int, Dml]) -> dict[Cell, set[Cell]]:
    placements = list(placements)
    adj: dict[Cell, set[Cell]] = {p.cell: set() for p in placements}
    for a, b in docking_edges(placements, dmls):
        adj[a].add(b)
        adj[b].add(a)
    return adj


def connectivity_count(placements: Iterable[Placement], dmls: Mapping[int, Dml], n_total_robots: int) -> int:
    """Connected components of the docking graph, idle robots counted as singletons."""
    placements = list(placements)
    if len(placements) > n_total_robots:
        raise ValueError("more placements than robots")
    index = {p.cell: i for i, p in enumerate(placements)}
    uf = UnionFind(len(placements))
    for a, b in docking_edges(placements, dmls):
        uf.union(index[a], index[b])
    return uf.components + (n_total_robots - len(placements))


def components(cells: Iterable[Cell], adjacency: Mapping[Cell, set[Cell]]) -> list[set[Cell]]:
    """Connected components of the sub-graph induced by ``cells``."""
    remaining = set(cells)
    out = []
    while remaining:
        seed = min(remaining)
        comp = {seed}
        queue = deque([seed])
        remaining.discard(seed)
        while queue:
            c = queue.popleft()
            for n in adjacency.get(c, ()):
                if n in remaining:
                    remaining.discard(n)
                    comp.add(n)
                    queue.append(n)
        out.append(comp)
    return out


def is_connected(cells, adjacency: Mapping[Cell, set[Cell]]) -> bool:
    cells = set(cells)
    if not cells:
        return False
    seed = next(iter(cells))
    seen = {seed}
    queue = deque([seed])
    while queue:
        c = queue.popleft()
        for n in adjacency.get(c, ()):
            if n in cells and n not in seen:
                seen.add(n)
                queue.append(n)
    return len(seen) == len(cells)


def chebyshev(a, b) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))
