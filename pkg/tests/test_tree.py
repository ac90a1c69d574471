import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_best_factor, connected, dock_graph, genderless_everywhere, random_polyomino
from usv_assembly.core import Cell, Dml, Placement, docking_adjacency
from usv_assembly.tree import (
    AssemblyTree,
    NoValidDivision,
    all_divisions,
    best_division,
    tree_from_placements,
    tree_generation,
)


def cells_of(pts):
    return [Cell(*p) for p in pts]


def full(pts):
    return {Cell(*c): {Cell(*n) for n in nb} for c, nb in genderless_everywhere(pts).items()}


ROW4 = cells_of((x, 0) for x in range(4))
BLOCK = cells_of([(0, 0), (1, 0), (0, 1), (1, 1)])


def test_all_divisions_counts():
    d = all_divisions(ROW4)
    assert len(d) == 3 and all(x.axis == "x" for x in d)
    d = all_divisions(BLOCK)
    assert sorted(x.axis for x in d) == ["x", "y"]
    assert len(all_divisions(cells_of((0, y) for y in range(7)))) == 6


def test_best_division_examples():
    row7 = cells_of((x, 0) for x in range(7))
    d = best_division(all_divisions(row7), full(row7))
    assert d.factor == 12
    assert sorted((len(d.low), len(d.high))) == [3, 4]
    d = best_division(all_divisions(BLOCK), full(BLOCK))
    assert d.factor == 4 and d.axis == "x" and d.line == 1
    tromino = cells_of([(0, 0), (1, 0), (1, 1)])
    d = best_division(all_divisions(tromino), full(tromino))
    assert d.factor == 2
    assert (d.axis, d.line) == ("x", 1)


def test_best_division_respects_docking_connectivity():
    # a 2x2 block whose left column is not docked: the vertical cut is invalid
    adj = full(BLOCK)
    adj[Cell(0, 0)].discard(Cell(0, 1))
    adj[Cell(0, 1)].discard(Cell(0, 0))
    d = best_division(all_divisions(BLOCK), adj)
    assert d.axis == "y"


def test_no_valid_division():
    t = cells_of([(0, 0), (1, 0), (2, 0), (1, 1)])
    with pytest.raises(NoValidDivision):
        tree_generation(t, {c: set() for c in t})
    with pytest.raises(NoValidDivision):
        best_division(all_divisions(ROW4), {c: set() for c in ROW4})
    # a T of docked robots can only be peeled one leaf at a time
    assert tree_generation(t, full(t)).height == 3


def test_tree_single_target():
    tree = tree_generation([Cell(3, 3)], {Cell(3, 3): set()})
    assert tree.height == 0
    assert tree.root.is_leaf and len(tree.leaves()) == 1


def test_tree_row_of_four():
    tree = tree_generation(ROW4, full(ROW4))
    assert tree.height == 2
    assert len(tree.root.low.cells) == len(tree.root.high.cells) == 2
    assert len(tree.leaves()) == 4
    assert [n.id for n in tree.nodes()] == list(range(7))


def test_tree_seven_robot_shape():
    # a plus sign with a tail: seven docked robots
    shape = cells_of([(1, 0), (0, 1), (1, 1), (2, 1), (1, 2), (1, 3), (2, 3)])
    codes = ["GGGG"] * 7
    placements = [Placement(i, c, 0) for i, c in enumerate(shape)]
    dmls = {i: Dml.parse(c) for i, c in enumerate(codes)}
    tree = tree_from_placements(placements, dmls)
    adj = docking_adjacency(placements, dmls)
    assert {l.cells for l in tree.leaves()} == {frozenset([c]) for c in shape}
    for node in tree.nodes():
        assert connected(node.cells, adj)
        if not node.is_leaf:
            assert node.low.cells | node.high.cells == node.cells
            assert not node.low.cells & node.high.cells


def test_tree_serialization_round_trip():
    tree = tree_generation(BLOCK, full(BLOCK))
    again = AssemblyTree.from_dict(tree.to_dict())
    assert again.to_dict() == tree.to_dict()
    assert again.height == tree.height
    leaf = again.leaves()[0]
    assert leaf.sibling() is not None and leaf.sibling().parent is leaf.parent


def _random_structure(rng, size):
    pts = random_polyomino(rng, size)
    # a third of the sides carry no dock, so many cuts are rejected
    placed = {p: ("".join(rng.choice("GGN") for _ in range(4)), rng.randrange(4)) for p in pts}
    return pts, placed


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_best_division_matches_brute_force(seed):
    rng = random.Random(seed)
    pts, placed = _random_structure(rng, rng.randint(2, 10))
    graph = dock_graph(placed)
    adj = {Cell(*c): {Cell(*n) for n in nb} for c, nb in graph.items()}
    expected = brute_best_factor(pts, graph)
    divs = all_divisions(cells_of(pts))
    if expected is None:
        with pytest.raises(NoValidDivision):
            best_division(divs, adj)
        return
    chosen = best_division(divs, adj)
    assert chosen.factor == expected
    for d in divs:
        if connected(d.low, graph) and connected(d.high, graph):
            assert d.factor <= chosen.factor


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_tree_invariants(seed):
    rng = random.Random(seed)
    pts = random_polyomino(rng, rng.randint(1, 30))
    cells = cells_of(pts)
    tree = tree_generation(cells, full(pts))
    m = len(cells)
    assert len(tree.leaves()) == m
    assert tree.height <= m - 1
    assert tree.height >= math.ceil(math.log2(m))
    assert all(len(n.cells) == 1 for n in tree.leaves())
    for node in tree.nodes():
        if not node.is_leaf:
            assert node.low.cells | node.high.cells == node.cells
    # operation counter stays within the cubic-log budget
    assert tree.ops <= max(1, m**3 * max(1.0, math.log2(m)))
