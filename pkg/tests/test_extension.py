import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import genderless_everywhere, random_polyomino
from usv_assembly.core import Cell, GridMap, chebyshev
from usv_assembly.extension import (
    LandmarkSchedule,
    MapOverflow,
    extend_targets,
    extension_distance,
    initial_center,
    replay_reverse,
    shift_group,
    sibling_gap,
)
from usv_assembly.tree import tree_generation


def tree_of(pts):
    adj = {Cell(*c): {Cell(*n) for n in nb} for c, nb in genderless_everywhere(pts).items()}
    return tree_generation([Cell(*p) for p in pts], adj)


def test_extension_distance():
    assert extension_distance(1, 1) == 1
    assert extension_distance(1, 2) == 2
    assert extension_distance(2, 3) == 7
    with pytest.raises(ValueError):
        extension_distance(0, 2)


def test_shift_group_examples():
    assert shift_group([(5, 0)], (3, 0), 2, "x") == [Cell(7, 0)]
    assert shift_group([(1, 0)], (3, 0), 2, "x") == [Cell(-1, 0)]
    assert shift_group([(3, 4)], (3, 0), 2, "x") == [Cell(3, 4)]
    assert shift_group([(3, 4)], (3, 0), 2, "y") == [Cell(3, 6)]
    with pytest.raises(MapOverflow):
        shift_group([(1, 0)], (3, 0), 2, "x", GridMap(10, 10))
    with pytest.raises(ValueError):
        shift_group([(1, 0)], (3, 0), 2, "z")


def test_single_target_schedule():
    s = extend_targets(tree_of([(2, 2)]))
    assert len(s.levels) == 1
    assert s.final == {Cell(2, 2): Cell(2, 2)}


def test_pair_extension():
    tree = tree_of([(0, 0), (1, 0)])
    s = extend_targets(tree, center=Cell(0, 0))
    assert s.final == {Cell(0, 0): Cell(0, 0), Cell(1, 0): Cell(2, 0)}
    assert s.shifts[0].distance == 1
    assert sibling_gap(s, tree, 0) == 1


def test_initial_center_and_validation():
    assert initial_center([Cell(0, 0), Cell(1, 0), Cell(2, 0)]) == Cell(1, 0)
    with pytest.raises(ValueError):
        extend_targets(tree_of([(0, 0), (1, 0)]), center=Cell(5, 5))


def test_overflow_reported():
    tree = tree_of([(x, 0) for x in range(4)])
    with pytest.raises(MapOverflow):
        extend_targets(tree, grid_map=GridMap(4, 1))


def test_schedule_round_trip_serialization():
    tree = tree_of(random_polyomino(random.Random(3), 7))
    s = extend_targets(tree)
    again = LandmarkSchedule.from_dict(s.to_dict())
    assert again.levels == s.levels
    assert again.to_dict() == s.to_dict()


def test_clearance_off_uses_plain_distance():
    tree = tree_of(random_polyomino(random.Random(8), 9))
    s = extend_targets(tree, clearance=False)
    for shift in s.shifts.values():
        assert shift.distance == extension_distance(1, shift.width)


def _check_schedule(pts, interval, clearance=True):
    tree = tree_of(pts)
    s = extend_targets(tree, interval=interval, clearance=clearance)
    targets = {Cell(*p) for p in pts}
    assert replay_reverse(s, tree) == {t: t for t in targets}
    for level in s.levels:
        assert len(set(level.values())) == len(level)
    for node_id in s.shifts:
        assert sibling_gap(s, tree, node_id) >= interval
    m = len(pts)
    assert s.ops <= max(0, m * (m - 1))
    return tree, s


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 12), st.integers(1, 3))
def test_extension_properties(seed, size, interval):
    _check_schedule(random_polyomino(random.Random(seed), size), interval)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 12))
def test_clearance_keeps_subtrees_apart(seed, size):
    tree, s = _check_schedule(random_polyomino(random.Random(seed), size), 1)
    # at every depth, cells of different nodes are at Chebyshev distance >= 2
    for depth, level in enumerate(tree.levels[1:], start=1):
        positions = s.levels[min(depth, len(s.levels) - 1)]
        owner = {positions[c]: n.id for n in level for c in n.cells}
        for a, ga in owner.items():
            for b, gb in owner.items():
                if ga != gb:
                    assert chebyshev(a, b) >= 2
