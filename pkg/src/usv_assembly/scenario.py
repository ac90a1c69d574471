"""Line-oriented scenario files.

Example::

    usv-assembly-scenario 1
    # comments and blank lines are ignored
    name demo
    map 6 6
    regime genderless
    seed 0
    dispatch K=3 T0=10 T_max=500 tabu_tenure=7
    extension interval=1
    navigation perception_radius=3 wait_steps=3 max_replans=20 liveness_factor=10
    vessel m1=12 m2=12 m3=0.4 Xu=6 Yv=6 Nr=0.6 l=0.11 f_min=-5 f_max=5
    disturbance amplitude=1.5,1.5,0.05 frequency=1.2,0.9,1.1 phase=0,1,0
    robot 0 0 0 0 GNNN
    robot 1 5 5 0 GNNN
    target 2 2
    target 3 2

A ``robot`` line is ``id x y orientation faces`` with faces listed fore,
left, aft, right using N (none), G (genderless), M (male), F (female).
Only the header and ``map`` are mandatory; other settings fall back to
defaults. ``vessel`` and ``disturbance`` configure the tracking
simulation and are omitted from dumps unless set. Apart from ``robot``
and ``target``, each keyword may appear at most once.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .core import Cell, Dml, FaceKind, GridMap, RobotSpec
from .dispatch import DispatchParams
from .dynamics import Disturbance, VesselParams
from .navigation import NavParams

__all__ = [
    "Scenario",
    "ParseError",
    "ValidationError",
    "parse_scenario",
    "load_scenario",
    "dump_scenario",
    "REGIMES",
]

HEADER = "usv-assembly-scenario"
VERSION = 1
REGIMES = ("genderless", "gendered", "mixed")


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1, source: str = "<scenario>"):
        self.line, self.column, self.source = line, column, source
        super().__init__(f"{source}:{line}:{column}: {message}")


class ValidationError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, source: str = "<scenario>"):
        self.line, self.source = line, source
        where = f"{source}:{line}: " if line else f"{source}: "
        super().__init__(where + message)


@dataclass
class Scenario:
    grid_map: GridMap
    robots: list[RobotSpec]
    targets: list[Cell]
    regime: str = "mixed"
    name: str = "scenario"
    seed: int = 0
    dispatch: DispatchParams = field(default_factory=DispatchParams)
    interval: int = 1
    navigation: NavParams = field(default_factory=NavParams)
    vessel: Optional[VesselParams] = None
    disturbance: Optional[Disturbance] = None

    @property
    def n_robots(self) -> int:
        return len(self.robots)

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    @property
    def dock_total(self) -> int:
        return sum(r.dml.n_docks for r in self.robots)

    def with_seed(self, seed: int) -> "Scenario":
        return dataclasses.replace(self, seed=seed, dispatch=dataclasses.replace(self.dispatch, rng_seed=seed))

    def validate(self, lines: Optional[dict] = None, source: str = "<scenario>") -> None:
        lines = lines or {}
        ids = set()
        starts = {}
        for r in self.robots:
            if r.id in ids:
                raise ValidationError(f"duplicate robot id {r.id}", lines.get(("robot", r.id)), source)
            ids.add(r.id)
            if not self.grid_map.contains(r.start):
                raise ValidationError(f"robot {r.id} starts outside the map", lines.get(("robot", r.id)), source)
            if r.start in starts:
                raise ValidationError(
                    f"robots {starts[r.start]} and {r.id} share start cell {tuple(r.start)}",
                    lines.get(("robot", r.id)),
                    source,
                )
            starts[r.start] = r.id
            _check_regime(self.regime, r, lines.get(("robot", r.id)), source)
        if not self.targets:
            raise ValidationError("no targets", None, source)
        seen = set()
        for t in self.targets:
            if t in seen:
                raise ValidationError(f"duplicate target {tuple(t)}", lines.get(("target", t)), source)
            seen.add(t)
            if not self.grid_map.contains(t):
                raise ValidationError(f"target {tuple(t)} is outside the map", lines.get(("target", t)), source)
        if len(self.targets) > len(self.robots):
            raise ValidationError(
                f"{len(self.targets)} targets but only {len(self.robots)} robots (need M <= N)", None, source
            )
        if not _four_connected(self.targets):
            raise ValidationError("targets do not form a 4-connected shape", None, source)


def _check_regime(regime: str, robot: RobotSpec, line, source) -> None:
    kinds = set(robot.dml.faces) - {FaceKind.NONE}
    if regime == "genderless" and kinds - {FaceKind.GENDERLESS}:
        raise ValidationError(f"robot {robot.id} has gendered faces in a genderless scenario", line, source)
    if regime == "gendered" and FaceKind.GENDERLESS in kinds:
        raise ValidationError(f"robot {robot.id} has genderless faces in a gendered scenario", line, source)


def _four_connected(cells) -> bool:
    cells = set(cells)
    start = next(iter(cells))
    seen = {start}
    stack = [start]
    while stack:
        c = stack.pop()
        for d in range(4):
            n = c.neighbor(d)
            if n in cells and n not in seen:
                seen.add(n)
                stack.append(n)
    return len(seen) == len(cells)


def _int(tok: str, lineno: int, col: int, source: str, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"expected integer {what}, got {tok!r}", lineno, col, source) from None


def _keyvals(tokens, cols, lineno, source, allowed: dict) -> dict:
    out = {}
    for tok, col in zip(tokens, cols):
        if "=" not in tok:
            raise ParseError(f"expected key=value, got {tok!r}", lineno, col, source)
        key, val = tok.split("=", 1)
        if key not in allowed:
            raise ParseError(f"unknown key {key!r}; expected one of {sorted(allowed)}", lineno, col, source)
        try:
            out[key] = allowed[key](val)
        except ValueError:
            raise ParseError(f"bad value {val!r} for {key}", lineno, col + len(key) + 1, source) from None
    return out


def _split(line: str) -> tuple[list[str], list[int]]:
    tokens, cols = [], []
    i = 0
    while i < len(line):
        if line[i].isspace():
            i += 1
            continue
        j = i
        while j < len(line) and not line[j].isspace():
            j += 1
        tokens.append(line[i:j])
        cols.append(i + 1)
        i = j
    return tokens, cols


_DISPATCH_KEYS = {
    "K": float,
    "T0": float,
    "T_max": int,
    "tabu_tenure": int,
    "eval_seconds": float,
    "clock": str,
    "plateau": str,
    "restart_after": int,
}
_NAV_KEYS = {"perception_radius": int, "wait_steps": int, "max_replans": int, "liveness_factor": int, "transit_limit": int}
_VESSEL_KEYS = {f.name: float for f in dataclasses.fields(VesselParams)}


def _triple(text: str) -> tuple[float, float, float]:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise ValueError("need three comma-separated numbers")
    return tuple(parts)  # type: ignore[return-value]


_DISTURBANCE_KEYS = {"amplitude": _triple, "frequency": _triple, "phase": _triple}
_SINGLE = ("name", "map", "regime", "seed", "dispatch", "extension", "navigation", "vessel", "disturbance")


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    grid_map = None
    robots: list[RobotSpec] = []
    targets: list[Cell] = []
    fields: dict = {}
    where: dict = {}
    header_seen = False
    used: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        tokens, cols = _split(line)
        if not tokens:
            continue
        key, args, acols = tokens[0], tokens[1:], cols[1:]
        if not header_seen:
            if key != HEADER:
                raise ParseError(f"expected header '{HEADER} {VERSION}'", lineno, cols[0], source)
            if args != [str(VERSION)]:
                raise ParseError(f"unsupported version {' '.join(args)!r}", lineno, acols[0] if acols else cols[0], source)
            header_seen = True
            continue
        if key in _SINGLE:
            if key in used:
                raise ParseError(f"'{key}' already given on line {used[key]}", lineno, cols[0], source)
            used[key] = lineno
        if key == "name":
            if len(args) != 1:
                raise ParseError("name takes one word", lineno, cols[0], source)
            fields["name"] = args[0]
        elif key == "map":
            if len(args) != 2:
                raise ParseError("map takes width and height", lineno, cols[0], source)
            w = _int(args[0], lineno, acols[0], source, "width")
            h = _int(args[1], lineno, acols[1], source, "height")
            try:
                grid_map = GridMap(w, h)
            except ValueError as e:
                raise ValidationError(str(e), lineno, source) from None
        elif key == "regime":
            if len(args) != 1 or args[0] not in REGIMES:
                raise ParseError(f"regime must be one of {REGIMES}", lineno, acols[0] if acols else cols[0], source)
            fields["regime"] = args[0]
        elif key == "seed":
            if len(args) != 1:
                raise ParseError("seed takes one integer", lineno, cols[0], source)
            seed = _int(args[0], lineno, acols[0], source, "seed")
            if not 0 <= seed < 2**64:
                raise ParseError("seed must fit in an unsigned 64-bit integer", lineno, acols[0], source)
            fields["seed"] = seed
        elif key == "dispatch":
            fields["dispatch"] = (_keyvals(args, acols, lineno, source, _DISPATCH_KEYS), lineno)
        elif key == "extension":
            kv = _keyvals(args, acols, lineno, source, {"interval": int})
            fields["interval"] = (kv.get("interval", 1), lineno)
        elif key == "navigation":
            fields["navigation"] = (_keyvals(args, acols, lineno, source, _NAV_KEYS), lineno)
        elif key == "vessel":
            fields["vessel"] = (_keyvals(args, acols, lineno, source, _VESSEL_KEYS), lineno)
        elif key == "disturbance":
            fields["disturbance"] = (_keyvals(args, acols, lineno, source, _DISTURBANCE_KEYS), lineno)
        elif key == "robot":
            if len(args) != 5:
                raise ParseError("robot takes: id x y orientation faces", lineno, cols[0], source)
            rid = _int(args[0], lineno, acols[0], source, "robot id")
            x = _int(args[1], lineno, acols[1], source, "x")
            y = _int(args[2], lineno, acols[2], source, "y")
            q = _int(args[3], lineno, acols[3], source, "orientation")
            if not 0 <= q <= 3:
                raise ParseError("orientation must be 0..3", lineno, acols[3], source)
            try:
                dml = Dml.parse(args[4])
            except ValueError:
                raise ParseError(f"faces must be 4 letters from N, G, M, F, got {args[4]!r}", lineno, acols[4], source) from None
            robots.append(RobotSpec(rid, Cell(x, y), q, dml))
            where[("robot", rid)] = lineno  # a duplicate is reported where it repeats
        elif key == "target":
            if len(args) != 2:
                raise ParseError("target takes x y", lineno, cols[0], source)
            t = Cell(_int(args[0], lineno, acols[0], source, "x"), _int(args[1], lineno, acols[1], source, "y"))
            targets.append(t)
            where[("target", t)] = lineno
        else:
            raise ParseError(f"unknown keyword {key!r}", lineno, cols[0], source)
    if not header_seen:
        raise ParseError("empty scenario", 1, 1, source)
    if grid_map is None:
        raise ValidationError("missing 'map' line", None, source)

    seed = fields.get("seed", 0)
    dispatch_kv, dline = fields.get("dispatch", ({}, None))
    try:
        dispatch = DispatchParams(rng_seed=seed, **dispatch_kv)
    except ValueError as e:
        raise ValidationError(str(e), dline, source) from None
    nav_kv, nline = fields.get("navigation", ({}, None))
    try:
        nav = NavParams(**nav_kv)
    except ValueError as e:
        raise ValidationError(str(e), nline, source) from None
    vessel = disturbance = None
    if "vessel" in fields:
        kv, vline = fields["vessel"]
        try:
            vessel = VesselParams(**kv)
        except ValueError as e:
            raise ValidationError(str(e), vline, source) from None
    if "disturbance" in fields:
        disturbance = Disturbance(**fields["disturbance"][0])
    interval, iline = fields.get("interval", (1, None))
    if interval < 1:
        raise ValidationError("extension interval must be >= 1", iline, source)
    sc = Scenario(
        grid_map=grid_map,
        robots=robots,
        targets=targets,
        regime=fields.get("regime", "mixed"),
        name=fields.get("name", Path(source).stem if source != "<scenario>" else "scenario"),
        seed=seed,
        dispatch=dispatch,
        interval=interval,
        navigation=nav,
        vessel=vessel,
        disturbance=disturbance,
    )
    sc.validate(where, source)
    return sc


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), source=str(path))


def dump_scenario(sc: Scenario) -> str:
    d, n = sc.dispatch, sc.navigation
    lines = [
        f"{HEADER} {VERSION}",
        f"name {sc.name}",
        f"map {sc.grid_map.width} {sc.grid_map.height}",
        f"regime {sc.regime}",
        f"seed {sc.seed}",
        f"dispatch K={d.K!r} T0={d.T0!r} T_max={d.T_max} tabu_tenure={d.tabu_tenure}"
        f" eval_seconds={d.eval_seconds!r} clock={d.clock} plateau={d.plateau} restart_after={d.restart_after}",
        f"extension interval={sc.interval}",
        f"navigation perception_radius={n.perception_radius} wait_steps={n.wait_steps}"
        f" max_replans={n.max_replans} liveness_factor={n.liveness_factor} transit_limit={n.transit_limit}",
    ]
    if sc.vessel is not None:
        lines.append("vessel " + " ".join(f"{f.name}={getattr(sc.vessel, f.name)!r}" for f in dataclasses.fields(sc.vessel)))
    if sc.disturbance is not None:
        w = sc.disturbance
        lines.append(
            "disturbance "
            + " ".join(f"{k}={','.join(repr(v) for v in getattr(w, k))}" for k in ("amplitude", "frequency", "phase"))
        )
    lines += [f"robot {r.id} {r.start.x} {r.start.y} {r.start_orientation} {r.dml.code}" for r in sc.robots]
    lines += [f"target {t.x} {t.y}" for t in sc.targets]
    return "\n".join(lines) + "\n"
