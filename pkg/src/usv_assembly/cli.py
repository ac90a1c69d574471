"""Command-line entry point: ``usv-assembly <command> [options]``.

Exit status: 0 success, 2 infeasible dispatch, 3 planning or navigation
failure, 4 bad input.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Optional

from . import dynamics
from .mapgen import bundled, bundled_names
from .pipeline import PipelineResult, StageError, batch, plan, run_pipeline, write_outputs
from .render import STYLES, render_file
from .scenario import ParseError, Scenario, ValidationError, load_scenario

EXIT_OK, EXIT_INFEASIBLE, EXIT_FAIL, EXIT_INPUT = 0, 2, 3, 4


class InputError(Exception):
    pass


def _resolve_scenario(ref: Optional[str], seed: Optional[int]) -> Scenario:
    if ref is None:
        raise InputError("--scenario is required for this command")
    path = Path(ref)
    if path.is_file():
        sc = load_scenario(path)
    else:
        try:
            sc = bundled(ref)
        except KeyError:
            raise InputError(
                f"no scenario file {ref!r} and no bundled scenario of that name "
                f"(bundled: {', '.join(bundled_names())})"
            ) from None
    return sc.with_seed(seed) if seed is not None else sc


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _global_flags(p: argparse.ArgumentParser, default) -> None:
    p.add_argument("--scenario", default=default, help="scenario file or bundled name (e.g. map1-genderless)")
    p.add_argument("--seed", type=_u64, default=default, help="override the scenario seed")
    p.add_argument("--out", default=default, help="output directory (default: out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="usv-assembly", description="Self-assembly planning for modular surface robots.")
    _global_flags(parser, None)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, argparse.SUPPRESS)

    sub.add_parser("plan", parents=[common], help="dispatch, tree and extension only")
    sub.add_parser("run", parents=[common], help="full pipeline including navigation")
    p = sub.add_parser("batch", parents=[common], help="repeat the pipeline over consecutive seeds")
    p.add_argument("--runs", type=_positive, required=True)
    p.add_argument("--workers", type=_positive, default=None, help="parallel runs (default: $USV_ASSEMBLY_WORKERS or 1)")
    p = sub.add_parser("render", help="draw a step log or tracking series as SVG")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True, help="SVG file to write")
    p.add_argument("--style", choices=STYLES, default="color")
    p = sub.add_parser("track", parents=[common], help="trajectory tracking with the continuous vessel model")
    p.add_argument("--traj", choices=("circle", "eight"), required=True)
    p.add_argument("--controller", choices=("adrc", "pid"), required=True)
    p.add_argument("--duration", type=float, default=None, help="seconds (default: one lap plus the transient)")
    p.add_argument("--no-disturbance", action="store_true")
    p.add_argument("--pd-feedback", choices=("measured", "observer"), default="measured")
    return parser


def _out_dir(args) -> Path:
    return Path(args.out or "out")


def _print(obj) -> None:
    print(json.dumps(obj, indent=1))


def _stage_exit(e: StageError) -> int:
    print(f"error: {e}", file=sys.stderr)
    return EXIT_INFEASIBLE if e.infeasible else EXIT_FAIL


def cmd_plan(args) -> int:
    sc = _resolve_scenario(args.scenario, args.seed)
    try:
        result, tree, schedule = plan(sc)
    except StageError as e:
        return _stage_exit(e)
    res = PipelineResult(sc, result, tree, schedule, None)
    write_outputs(res, _out_dir(args))
    _print(res.summary())
    return EXIT_OK


def cmd_run(args) -> int:
    sc = _resolve_scenario(args.scenario, args.seed)
    try:
        res = run_pipeline(sc, out_dir=_out_dir(args))
    except StageError as e:
        return _stage_exit(e)
    _print(res.summary())
    return EXIT_OK if res.log.success else EXIT_FAIL


def cmd_batch(args) -> int:
    sc = _resolve_scenario(args.scenario, args.seed)
    report = batch(sc, args.runs, workers=args.workers)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"batch-{sc.name}.json").write_text(report.to_json())
    _print({"scenario": sc.name, "regime": sc.regime, **report.aggregates})
    return EXIT_OK


def cmd_render(args) -> int:
    try:
        text = Path(args.input).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read {args.input}: {e.strerror}") from None
    try:
        svg = render_file(text, args.style)
    except (ValueError, KeyError) as e:
        raise InputError(f"{args.input}: {e}") from None
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    return EXIT_OK


def cmd_track(args) -> int:
    config = dynamics.TrackConfig(duration=args.duration, pd_feedback=args.pd_feedback)
    if args.scenario is not None:
        sc = _resolve_scenario(args.scenario, None)
        if sc.vessel is not None:
            config = dataclasses.replace(config, vessel=sc.vessel)
        if sc.disturbance is not None:
            config = dataclasses.replace(config, disturbance=sc.disturbance)
    if args.no_disturbance:
        config = dataclasses.replace(config, disturbance=dynamics.Disturbance.none())
    result = dynamics.track(args.traj, args.controller, config)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"track-{args.traj}-{args.controller}"
    (out / f"{stem}.jsonl").write_text(result.to_jsonl())
    (out / f"{stem}-summary.json").write_text(json.dumps(result.summary(), indent=1) + "\n")
    _print(result.summary())
    return EXIT_OK


COMMANDS = {"plan": cmd_plan, "run": cmd_run, "batch": cmd_batch, "render": cmd_render, "track": cmd_track}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on usage errors, which would read as "infeasible"
        return EXIT_INPUT if e.code not in (0, None) else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (InputError, ParseError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
