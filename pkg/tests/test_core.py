import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_connectivity
from usv_assembly.core import (
    Cell,
    Dml,
    DuplicateCellError,
    FaceKind,
    GridMap,
    Placement,
    RobotSpec,
    UnionFind,
    chebyshev,
    components,
    connectivity_count,
    dock_compatible,
    docking_adjacency,
    docking_edges,
    world_face,
    world_faces,
)

G, N, M, F = FaceKind.GENDERLESS, FaceKind.NONE, FaceKind.MALE, FaceKind.FEMALE
kinds = st.sampled_from(list(FaceKind))
codes = st.text(alphabet="NGMF", min_size=4, max_size=4)


def test_dock_compatible_table():
    assert dock_compatible(G, G)
    assert dock_compatible(M, F) and dock_compatible(F, M)
    assert not dock_compatible(M, M)
    assert not dock_compatible(F, F)
    assert not dock_compatible(N, G)
    assert not dock_compatible(G, M)
    assert not dock_compatible(N, N)


@given(kinds, kinds)
def test_dock_compatible_symmetric(a, b):
    assert dock_compatible(a, b) == dock_compatible(b, a)
    if N in (a, b):
        assert not dock_compatible(a, b)


def test_world_face_examples():
    dml = Dml((G, N, N, N))
    assert world_face(dml, 0, 0) is G
    assert world_face(dml, 2, 0) is N
    assert world_face(dml, 2, 2) is G
    # a quarter turn counter-clockwise sends fore to +y
    assert world_face(dml, 1, 1) is G


@given(codes, st.integers(0, 3), st.integers(0, 3))
def test_world_face_rotation_group(code, q, d):
    dml = Dml.parse(code)
    assert world_face(dml, q, d) == world_face(dml, (q + 4) % 4, d)
    assert world_face(dml, q, d) == world_face(dml, 0, (d - q) % 4)
    assert world_faces(dml, q)[d] == world_face(dml, q, d)


def test_dml_parse_and_counts():
    dml = Dml.parse("gnmf")
    assert dml.code == "GNMF"
    assert dml.n_docks == 3
    assert dml.is_dockable()
    assert not Dml.parse("NNNN").is_dockable()
    with pytest.raises(ValueError):
        Dml.parse("GGG")
    with pytest.raises(ValueError):
        Dml.parse("GGGX")


def test_value_types_validate():
    with pytest.raises(ValueError):
        GridMap(0, 3)
    with pytest.raises(ValueError):
        Placement(1, Cell(0, 0), 4)
    with pytest.raises(ValueError):
        RobotSpec(1, Cell(0, 0), -1, Dml.parse("GGGG"))
    assert GridMap(3, 2).contains((2, 1))
    assert not GridMap(3, 2).contains((3, 0))
    assert Cell(1, 2).neighbor(3) == Cell(1, 1)
    assert chebyshev((0, 0), (2, -1)) == 2


def _pair(q2):
    dmls = {1: Dml((G, N, N, N)), 2: Dml((G, N, N, N))}
    # robot 2 at +x of robot 1 must show its dock toward -x, i.e. be turned by 2
    return [Placement(1, Cell(0, 0), 0), Placement(2, Cell(1, 0), q2)], dmls


def test_connectivity_docked_pair():
    placements, dmls = _pair(2)
    assert connectivity_count(placements, dmls, 2) == 1
    assert len(docking_edges(placements, dmls)) == 1


def test_connectivity_dock_facing_away():
    placements, dmls = _pair(0)
    assert connectivity_count(placements, dmls, 2) == 2


def test_connectivity_counts_idle_robots():
    cells = [Cell(x, y) for x in range(4) for y in range(3)]
    placements = [Placement(i, c, 0) for i, c in enumerate(cells)]
    dmls = {i: Dml.parse("GGGG") for i in range(12)}
    assert connectivity_count(placements, dmls, 15) == 4


def test_connectivity_rejects_duplicate_cells():
    dmls = {1: Dml.parse("GGGG"), 2: Dml.parse("GGGG")}
    with pytest.raises(DuplicateCellError):
        connectivity_count([Placement(1, Cell(0, 0), 0), Placement(2, Cell(0, 0), 0)], dmls, 2)


def test_union_find():
    uf = UnionFind(4)
    assert uf.union(0, 1)
    assert not uf.union(1, 0)
    uf.union(2, 3)
    assert uf.find(0) == uf.find(1) != uf.find(2)


@st.composite
def structures(draw):
    n = draw(st.integers(1, 9))
    cells = draw(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=n, max_size=n, unique=True))
    placements = [Placement(i, Cell(*c), draw(st.integers(0, 3))) for i, c in enumerate(cells)]
    dmls = {i: Dml.parse(draw(codes)) for i in range(n)}
    idle = draw(st.integers(0, 3))
    return placements, dmls, n + idle


@settings(max_examples=150)
@given(structures())
def test_connectivity_matches_bfs_oracle(data):
    placements, dmls, total = data
    placed = {tuple(p.cell): (dmls[p.robot_id].code, p.orientation) for p in placements}
    count = connectivity_count(placements, dmls, total)
    assert count == brute_connectivity(placed, total)
    assert 1 <= count <= total


@settings(max_examples=100)
@given(structures(), st.integers(-5, 5), st.integers(-5, 5))
def test_connectivity_translation_invariant(data, dx, dy):
    placements, dmls, total = data
    moved = [Placement(p.robot_id, p.cell + (dx, dy), p.orientation) for p in placements]
    assert connectivity_count(moved, dmls, total) == connectivity_count(placements, dmls, total)


@settings(max_examples=100)
@given(structures())
def test_connectivity_rotation_invariant(data):
    placements, dmls, total = data
    # a quarter turn maps (x, y) to (-y, x); every robot turns with it
    turned = [Placement(p.robot_id, Cell(-p.cell.y, p.cell.x), (p.orientation + 1) % 4) for p in placements]
    assert connectivity_count(turned, dmls, total) == connectivity_count(placements, dmls, total)


def test_components_helper():
    placements, dmls = _pair(2)
    adj = docking_adjacency(placements, dmls)
    assert components([Cell(0, 0), Cell(1, 0)], adj) == [{Cell(0, 0), Cell(1, 0)}]
