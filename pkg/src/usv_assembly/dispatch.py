"""Stage I: robot selection, robot-target matching and orientations by tabu search.

The cost of a solution is the number of connected components of the
docking graph over all N robots, idle robots counted as singletons, so
the best attainable value is ``N - M + 1``.  Three neighbourhood moves are
searched every iteration: swapping the targets of two dispatched robots,
turning one dispatched robot by a quarter-turn multiple, and replacing a
dispatched robot by an idle one (entering with any of four orientations).
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .core import Cell, Dml, FaceKind, Placement, RobotSpec, dock_compatible, docking_edges, world_faces
from .tree import NoValidDivision, tree_from_placements

__all__ = [
    "Move",
    "Solution",
    "DispatchParams",
    "DispatchResult",
    "DispatchInfeasible",
    "c_min",
    "cost",
    "end_time",
    "neighbors",
    "dispatch",
    "tie_break",
    "path_length",
]

_FACE_CODES = {FaceKind.NONE: 0, FaceKind.GENDERLESS: 1, FaceKind.MALE: 2, FaceKind.FEMALE: 3}
_COMPAT = np.array([[dock_compatible(a, b) for b in _FACE_CODES] for a in _FACE_CODES], dtype=bool)


def c_min(n_robots: int, n_targets: int) -> int:
    if n_targets < 1:
        raise ValueError("at least one target is required")
    if n_robots < n_targets:
        raise ValueError(f"{n_robots} robots cannot fill {n_targets} targets")
    return n_robots - n_targets + 1


@dataclass(frozen=True)
class Solution:
    """``assignment[i] = (robot_id, orientation)`` for the i-th target."""

    assignment: tuple[tuple[int, int], ...]

    @property
    def dispatched(self) -> frozenset[int]:
        return frozenset(r for r, _ in self.assignment)

    def matching(self, targets: Sequence[Cell]) -> dict[int, Cell]:
        return {r: Cell(*targets[i]) for i, (r, _) in enumerate(self.assignment)}

    @property
    def orientations(self) -> dict[int, int]:
        return {r: q for r, q in self.assignment}

    def placements(self, targets: Sequence[Cell]) -> list[Placement]:
        return [Placement(r, Cell(*targets[i]), q) for i, (r, q) in enumerate(self.assignment)]

    def to_dict(self) -> list[list[int]]:
        return [list(a) for a in self.assignment]


@dataclass(frozen=True)
class Move:
    kind: str  # "swap" | "rotate" | "replace"
    robots: tuple[int, ...]  # sorted operand robot ids
    turn: int  # quarter turns for "rotate", entrant orientation for "replace", 0 for "swap"

    @property
    def fingerprint(self) -> tuple:
        return (self.kind, self.robots, self.turn)


@dataclass(frozen=True)
class DispatchParams:
    K: float = 3.0
    T0: float = 10.0
    T_max: int = 500
    tabu_tenure: int = 7
    rng_seed: int = 0
    # Search time is charged per neighbour evaluation so that runs are reproducible;
    # clock="wall" switches to perf_counter seconds.
    eval_seconds: float = 1e-4
    clock: str = "work"
    plateau: str = "links"  # how equal-cost neighbours are ranked: "links" or "random"
    restart_after: int = 50  # restart from a random solution after this many stale iterations (0: never)

    def __post_init__(self):
        if not self.K > 1:
            raise ValueError("K must exceed 1")
        if not self.T0 > 0:
            raise ValueError("T0 must be positive")
        if self.T_max < 1 or self.tabu_tenure < 1:
            raise ValueError("T_max and tabu_tenure must be >= 1")
        if self.clock not in ("work", "wall"):
            raise ValueError("clock must be 'work' or 'wall'")
        if self.restart_after < 0:
            raise ValueError("restart_after must be >= 0")
        if self.plateau not in ("links", "random"):
            raise ValueError("plateau must be 'links' or 'random'")


@dataclass
class DispatchResult:
    best: Solution
    best_cost: int
    c_min: int
    candidates: list[Solution]
    iterations: int
    iteration_times: list[float]
    discovery_gaps: list[float]
    cost_history: list[int] = field(default_factory=list)
    neighbors_evaluated: int = 0
    restarts: int = 0

    @property
    def feasible_solution_count(self) -> int:
        return len(self.candidates)

    @property
    def success(self) -> bool:
        return self.best_cost == self.c_min

    def to_dict(self) -> dict:
        return {
            "best": self.best.to_dict(),
            "best_cost": self.best_cost,
            "c_min": self.c_min,
            "feasible_solution_count": self.feasible_solution_count,
            "iterations": self.iterations,
            "neighbors_evaluated": self.neighbors_evaluated,
            "cost_history": self.cost_history,
        }


class DispatchInfeasible(Exception):
    """The search ended without any solution reaching the minimal cost."""

    def __init__(self, result: DispatchResult):
        self.result = result
        super().__init__(
            f"no connected arrangement found: best cost {result.best_cost} > C_min {result.c_min} "
            f"after {result.iterations} iterations"
        )


def end_time(past_times: Sequence[float], K: float, T0: float, i: int) -> float:
    """Upper bound on the time allowed for the i-th discovery (moving average, amplified by K)."""
    if i < 1:
        raise ValueError("i starts at 1")
    if len(past_times) != i - 1:
        raise ValueError(f"expected {i - 1} past times, got {len(past_times)}")
    return K * (sum(past_times) + T0) / i


class _Evaluator:
    """Batched connectivity cost over many assignments sharing one target set."""

    def __init__(self, robots: Sequence[RobotSpec], targets: Sequence[Cell]):
        self.robots = list(robots)
        self.index = {r.id: k for k, r in enumerate(self.robots)}
        self.targets = [Cell(*t) for t in targets]
        self.ids = np.array([r.id for r in self.robots], dtype=np.int64)
        self.n = len(self.robots)
        self.m = len(self.targets)
        # faces[k, q, d]: code of the face robot k shows toward world direction d at orientation q
        self.faces = np.array(
            [[[_FACE_CODES[f] for f in world_faces(r.dml, q)] for q in range(4)] for r in self.robots],
            dtype=np.int8,
        ).reshape(self.n, 4, 4)
        where = {c: i for i, c in enumerate(self.targets)}
        edges = []
        for i, c in enumerate(self.targets):
            for d in (0, 1):
                j = where.get(c.neighbor(d))
                if j is not None:
                    edges.append((i, j, d))
        self.edges = np.array(edges, dtype=np.int64).reshape(-1, 3)

    def costs(self, R: np.ndarray, Q: np.ndarray) -> np.ndarray:
        """R, Q: (B, M) robot indices and orientations; returns (B,) costs."""
        return self.costs_and_links(R, Q)[0]

    def costs_and_links(self, R: np.ndarray, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Costs plus the number of latched docking links of each assignment."""
        B, M = R.shape
        idle = self.n - M
        if len(self.edges) == 0:
            return np.full(B, M + idle, dtype=np.int64), np.zeros(B, dtype=np.int64)
        u, v, d = self.edges.T
        fu = self.faces[R[:, u], Q[:, u], d]
        fv = self.faces[R[:, v], Q[:, v], (d + 2) % 4]
        active = _COMPAT[fu, fv]
        rows, cols = np.nonzero(active)
        offs = rows * M
        graph = coo_matrix(
            (np.ones(len(rows), dtype=np.int8), (offs + u[cols], offs + v[cols])), shape=(B * M, B * M)
        )
        _, labels = connected_components(graph, directed=False)
        _, first = np.unique(labels, return_index=True)
        comps = np.bincount(first // M, minlength=B)
        return comps + idle, active.sum(axis=1)

    def arrays(self, sol: Solution) -> tuple[np.ndarray, np.ndarray]:
        R = np.array([self.index[r] for r, _ in sol.assignment], dtype=np.int64)
        Q = np.array([q for _, q in sol.assignment], dtype=np.int64)
        return R, Q

    def solution(self, R: np.ndarray, Q: np.ndarray) -> Solution:
        return Solution(tuple((self.robots[int(k)].id, int(q)) for k, q in zip(R, Q)))


def cost(solution: Solution, robots: Sequence[RobotSpec], targets: Sequence[Cell]) -> int:
    """Connectivity number of the structure the solution builds, over all robots."""
    from .core import connectivity_count

    dmls = {r.id: r.dml for r in robots}
    return connectivity_count(solution.placements(targets), dmls, len(robots))


_KINDS = ("swap", "rotate", "replace")


@dataclass
class _Neighborhood:
    """All neighbours of one solution as stacked arrays (one row per move)."""

    R: np.ndarray  # (B, M) robot indices
    Q: np.ndarray  # (B, M) orientations
    kind: np.ndarray  # index into _KINDS
    lo: np.ndarray  # smaller operand robot id
    hi: np.ndarray  # larger operand robot id, -1 for rotations
    turn: np.ndarray
    inv_turn: np.ndarray

    def __len__(self) -> int:
        return len(self.kind)

    def move(self, k: int) -> Move:
        ids = (int(self.lo[k]),) if self.hi[k] < 0 else (int(self.lo[k]), int(self.hi[k]))
        return Move(_KINDS[self.kind[k]], ids, int(self.turn[k]))

    def inverse(self, k: int) -> tuple:
        m = self.move(k)
        return (m.kind, m.robots, int(self.inv_turn[k]))

    def tabu_mask(self, tabu: Mapping[tuple, int]) -> np.ndarray:
        mask = np.zeros(len(self), dtype=bool)
        for kind, ids, turn in tabu:
            lo, hi = (ids[0], -1) if len(ids) == 1 else ids
            mask |= (self.kind == _KINDS.index(kind)) & (self.lo == lo) & (self.hi == hi) & (self.turn == turn)
        return mask


def _build_neighborhood(R: np.ndarray, Q: np.ndarray, idle: Sequence[int], ids: np.ndarray) -> _Neighborhood:
    M = len(R)
    Rs, Qs, kinds, los, his, turns, invs = [], [], [], [], [], [], []

    i, j = np.triu_indices(M, 1)
    if len(i):
        r = np.repeat(R[None, :], len(i), axis=0)
        q = np.repeat(Q[None, :], len(i), axis=0)
        rows = np.arange(len(i))
        r[rows, i], r[rows, j] = R[j], R[i]
        q[rows, i], q[rows, j] = Q[j], Q[i]
        a, b = ids[R[i]], ids[R[j]]
        Rs.append(r); Qs.append(q)
        kinds.append(np.zeros(len(i), dtype=np.int64))
        los.append(np.minimum(a, b)); his.append(np.maximum(a, b))
        turns.append(np.zeros(len(i), dtype=np.int64)); invs.append(np.zeros(len(i), dtype=np.int64))

    pos = np.repeat(np.arange(M), 3)
    turn = np.tile(np.array([1, 2, 3]), M)
    r = np.repeat(R[None, :], len(pos), axis=0)
    q = np.repeat(Q[None, :], len(pos), axis=0)
    rows = np.arange(len(pos))
    q[rows, pos] = (Q[pos] + turn) % 4
    Rs.append(r); Qs.append(q)
    kinds.append(np.ones(len(pos), dtype=np.int64))
    los.append(ids[R[pos]]); his.append(np.full(len(pos), -1, dtype=np.int64))
    turns.append(turn); invs.append((4 - turn) % 4)

    if len(idle):
        idle = np.asarray(idle, dtype=np.int64)
        pos = np.repeat(np.arange(M), len(idle) * 4)
        ent = np.tile(np.repeat(idle, 4), M)
        qe = np.tile(np.arange(4), M * len(idle))
        r = np.repeat(R[None, :], len(pos), axis=0)
        q = np.repeat(Q[None, :], len(pos), axis=0)
        rows = np.arange(len(pos))
        r[rows, pos] = ent
        q[rows, pos] = qe
        a, b = ids[R[pos]], ids[ent]
        Rs.append(r); Qs.append(q)
        kinds.append(np.full(len(pos), 2, dtype=np.int64))
        los.append(np.minimum(a, b)); his.append(np.maximum(a, b))
        turns.append(qe); invs.append(Q[pos])

    cat = np.concatenate
    return _Neighborhood(cat(Rs), cat(Qs), cat(kinds), cat(los), cat(his), cat(turns), cat(invs))


def _key(R: np.ndarray, Q: np.ndarray) -> bytes:
    return R.astype(np.int16).tobytes() + Q.astype(np.int8).tobytes()


def _evaluate_neighborhood(ev: _Evaluator, solution: Solution):
    R, Q = ev.arrays(solution)
    in_use = set(R.tolist())
    idle = [k for k in range(ev.n) if k not in in_use]
    nb = _build_neighborhood(R, Q, idle, ev.ids)
    costs, links = ev.costs_and_links(nb.R, nb.Q)
    return nb, costs, links


def neighbors(
    solution: Solution,
    tabu: Mapping[tuple, int],
    robots: Sequence[RobotSpec],
    targets: Sequence[Cell],
    seen: Optional[set] = None,
) -> list[tuple[Move, Solution]]:
    """Admissible neighbours as (move, solution) pairs.

    A move whose fingerprint is tabu is still admitted when it reaches the
    minimal cost with a solution not already in ``seen``.
    """
    ev = _Evaluator(robots, targets)
    nb, costs, _ = _evaluate_neighborhood(ev, solution)
    best = c_min(ev.n, ev.m)
    seen = seen if seen is not None else set()
    banned = nb.tabu_mask(tabu)
    out = []
    for k in range(len(nb)):
        sol = ev.solution(nb.R[k], nb.Q[k])
        if banned[k] and not (costs[k] == best and sol not in seen):
            continue
        out.append((nb.move(k), sol))
    return out


def _random_solution(ev: _Evaluator, rng: random.Random) -> Solution:
    chosen = rng.sample(range(ev.n), ev.m)
    return Solution(tuple((ev.robots[k].id, rng.randrange(4)) for k in chosen))


def path_length(solution: Solution, robots: Sequence[RobotSpec], targets: Sequence[Cell]) -> int:
    """Sum of Manhattan distances from each dispatched robot's start to its target."""
    starts = {r.id: r.start for r in robots}
    return sum(
        abs(starts[r].x - targets[i][0]) + abs(starts[r].y - targets[i][1]) for i, (r, _) in enumerate(solution.assignment)
    )


def _tree_height(solution: Solution, dmls: Mapping[int, Dml], targets: Sequence[Cell]) -> float:
    try:
        return tree_from_placements(solution.placements(targets), dmls).height
    except NoValidDivision:
        return float("inf")


def tie_break(candidates: Sequence[Solution], robots: Sequence[RobotSpec], targets: Sequence[Cell]) -> Solution:
    """Pick one candidate: shortest total path, then lowest tree, then most docking links.

    Candidates whose structure admits no valid assembly tree are skipped; the
    path criterion falls through to the next-shortest tier when every
    candidate of a tier is undecomposable.  Remaining ties keep discovery order.
    """
    if not candidates:
        raise ValueError("no candidates to choose from")
    dmls = {r.id: r.dml for r in robots}
    tiers: dict[int, list[Solution]] = {}
    for s in candidates:
        tiers.setdefault(path_length(s, robots, targets), []).append(s)
    for length in sorted(tiers):
        heights = [(_tree_height(s, dmls, targets), s) for s in tiers[length]]
        lowest = min(h for h, _ in heights)
        if lowest == float("inf"):
            continue
        tier = [s for h, s in heights if h == lowest]
        links = [len(docking_edges(s.placements(targets), dmls)) for s in tier]
        most = max(links)
        return next(s for s, k in zip(tier, links) if k == most)
    # nothing decomposes; fall back on path length alone so Stage II reports the failure
    return tiers[min(tiers)][0]


def dispatch(
    targets: Sequence[Cell],
    robots: Sequence[RobotSpec],
    params: DispatchParams = DispatchParams(),
    on_iteration: Optional[Callable[[int, Solution, int], None]] = None,
) -> DispatchResult:
    """Tabu search for a robot-target matching whose structure is one docked component.

    Stops once the time since the last new candidate exceeds the adaptive
    bound from :func:`end_time`, or after ``params.T_max`` iterations.
    Raises :class:`DispatchInfeasible` when no candidate reached ``C_min``.
    """
    targets = [Cell(*t) for t in targets]
    robots = list(robots)
    if len({r.id for r in robots}) != len(robots):
        raise ValueError("robot ids must be unique")
    if len(set(targets)) != len(targets):
        raise ValueError("targets must be distinct")
    best_possible = c_min(len(robots), len(targets))
    if len(targets) > 1 and not any(r.dml.is_dockable() for r in robots):
        raise ValueError("no robot carries a docking mechanism")
    rng = random.Random(params.rng_seed)
    ev = _Evaluator(robots, targets)

    current = _random_solution(ev, rng)
    R, Q = ev.arrays(current)
    current_cost = int(ev.costs(R[None, :], Q[None, :])[0])
    best, best_cost = current, current_cost
    candidates: list[Solution] = []
    seen: set[bytes] = set()
    tabu: dict[tuple, int] = {}
    gaps: list[float] = []
    iteration_times: list[float] = []
    history = [current_cost]
    evaluated = 0
    since_last = 0.0
    stale = 0
    restarts = 0

    if current_cost == best_possible:
        candidates.append(current)
        seen.add(_key(R, Q))
        gaps.append(0.0)

    iterations = 0
    while iterations < params.T_max:
        t_start = time.perf_counter()
        nb, costs, links = _evaluate_neighborhood(ev, current)
        evaluated += len(nb)
        if len(nb) == 0:
            break
        k = _search_best(nb, costs, links if params.plateau == "links" else None, nb.tabu_mask(tabu), seen, best_possible, rng)
        for fp in list(tabu):
            tabu[fp] -= 1
            if tabu[fp] <= 0:
                del tabu[fp]
        iterations += 1
        if k is not None:
            current, current_cost = ev.solution(nb.R[k], nb.Q[k]), int(costs[k])
            tabu[nb.move(k).fingerprint] = params.tabu_tenure
            tabu[nb.inverse(k)] = params.tabu_tenure
        dt = len(nb) * params.eval_seconds if params.clock == "work" else time.perf_counter() - t_start
        iteration_times.append(dt)
        since_last += dt
        history.append(current_cost)
        if on_iteration is not None:
            on_iteration(iterations, current, current_cost)
        stale += 1
        if current_cost < best_cost:
            best, best_cost = current, current_cost
            stale = 0
        if k is not None and current_cost == best_possible:
            key = _key(nb.R[k], nb.Q[k])
            if key not in seen:
                seen.add(key)
                candidates.append(current)
                gaps.append(since_last)
                since_last = 0.0
                stale = 0
                continue
        if params.restart_after and stale >= params.restart_after:
            current = _random_solution(ev, rng)
            R, Q = ev.arrays(current)
            current_cost = int(ev.costs(R[None, :], Q[None, :])[0])
            tabu.clear()
            stale = 0
            restarts += 1
        if since_last > end_time(gaps, params.K, params.T0, len(gaps) + 1):
            break

    result = DispatchResult(
        best=best,
        best_cost=best_cost,
        c_min=best_possible,
        candidates=candidates,
        iterations=iterations,
        iteration_times=iteration_times,
        discovery_gaps=gaps,
        cost_history=history,
        neighbors_evaluated=evaluated,
        restarts=restarts,
    )
    if not candidates:
        raise DispatchInfeasible(result)
    result.best = tie_break(candidates, robots, targets)
    result.best_cost = best_possible
    return result


def _search_best(nb: _Neighborhood, costs, links, banned, seen: set, best_possible: int, rng):
    """Row of the lowest-cost admissible neighbour, or None when all are tabu.

    At the optimal level, neighbours not yet seen are preferred.  Remaining
    ties go to the most latched links (when ``links`` is given) and then to
    the seeded generator.
    """
    at_best = costs == best_possible
    fresh = np.zeros(len(nb), dtype=bool)
    for k in np.flatnonzero(at_best):
        fresh[k] = _key(nb.R[k], nb.Q[k]) not in seen
    admissible = ~banned | (at_best & fresh)
    if not admissible.any():
        return None
    level = costs[admissible].min()
    pool = np.flatnonzero(admissible & (costs == level))
    if level == best_possible and fresh[pool].any():
        pool = pool[fresh[pool]]
    if links is not None:
        pool = pool[links[pool] == links[pool].max()]
    return int(pool[rng.randrange(len(pool))])
