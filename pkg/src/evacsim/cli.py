"""Command-line front end: ``evacsim {evaluate,worstcase,optimize}``."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from typing import Optional, Sequence

from .analysis import worst_case
from .geometry import GeometryError
from .optimizer import (
    Axis,
    Family,
    OptimizerError,
    ParamSpace,
    appendix_replay,
    grid_search,
    load_config,
    refine,
    resolve_threads,
    run_config,
)
from .protocols import FAMILIES, ProtocolError, build, custom_protocol
from .simulator import EvacuationError, evacuate
from .trajectory import TrajectoryError, parse_trajectories

# coarse default grids for `optimize` when no --grid is given
DEFAULT_GRIDS = {
    "detour1": {"z": (0.6, 0.8, 1e-3)},
    "detour2": {"b1": (0.60, 0.72, 0.01), "b2": (0.85, 0.95, 0.01)},
    "square-detour": {"p": (0.10, 0.20, 0.01), "q": (0.20, 0.80, 0.05)},
    "early": {"p1": (0.05, 0.95, 0.01)},
}


class UsageError(Exception):
    pass


def _number(text: str, what: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise UsageError(f"{what}: {text!r} is not a number") from None
    if not math.isfinite(val):
        raise UsageError(f"{what}: {text!r} is not finite")
    return val


def parse_params(items: Sequence[str]) -> dict:
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise UsageError(f"--param expects NAME=VALUE, got {item!r}")
        out[name.strip()] = _number(value.strip(), f"--param {name.strip()}")
    return out


def parse_grid(items: Sequence[str]) -> dict:
    out = {}
    for item in items or ():
        name, sep, rng = item.partition("=")
        parts = rng.split(":")
        if not sep or len(parts) != 3:
            raise UsageError(f"--grid expects NAME=LO:HI:STEP, got {item!r}")
        out[name.strip()] = tuple(_number(p, f"--grid {name.strip()}") for p in parts)
    return out


def _protocol(args):
    if args.trajectories:
        with open(args.trajectories) as fh:
            robots = parse_trajectories(fh.read())
        return custom_protocol(args.shape, list(robots.values()), args.policy)
    return build(args.protocol, args.shape, args.k, **parse_params(args.param))


def _emit(doc: dict, out: Optional[str]) -> None:
    text = json.dumps(doc, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# -- commands ----------------------------------------------------------------------


def cmd_evaluate(args) -> int:
    proto = _protocol(args)
    if (args.exit_arc is None) == (args.exit_at_vertex is None):
        raise UsageError("give exactly one of --exit-arc or --exit-at-vertex")
    if args.exit_at_vertex is not None:
        shape = proto.shape
        if args.exit_at_vertex not in shape.labels:
            raise UsageError(f"{shape.kind} vertices are {', '.join(shape.labels)}")
        s = shape.vertex_arc(args.exit_at_vertex)
    else:
        s = args.exit_arc
    _emit(evacuate(proto, s).to_dict(), args.out)
    return 0


def cmd_worstcase(args) -> int:
    proto = _protocol(args)
    if args.samples < 1 or args.refine_tol <= 0:
        raise UsageError("--samples must be positive and --refine-tol > 0")
    rep = worst_case(proto, args.samples, args.refine_tol)
    _emit(rep.to_dict(), args.out)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "evac_time"])
            for s, v in rep.curve:
                w.writerow([repr(float(s)), repr(float(v))])
    if args.svg or args.curve_svg:
        from . import plotting

        with plotting.style():
            if args.svg:
                plotting.save(plotting.protocol_figure(proto, rep.worst_exits, args.scale), args.svg)
            if args.curve_svg:
                fig = plotting.curve_figure(rep.curve, [b.s for b in rep.breakpoints_probed],
                                            rep.worst_time, rep.lower_bound)
                plotting.save(fig, args.curve_svg)
    return 0


def cmd_optimize(args) -> int:
    if args.appendix_a:
        res = appendix_replay()
        for line in res.lines():
            print(line)
        if args.out:
            _emit({"time": res.time, "p": res.p, "q": res.q, "cells": res.cells,
                   "skipped": res.skipped}, args.out)
        return 0
    if args.config:
        doc = load_config(args.config)
        if args.threads is not None:
            doc["threads"] = args.threads
        _emit(run_config(doc).to_dict(), args.out)
        return 0

    fam = Family.make(args.protocol, args.shape, args.k)
    grid = parse_grid(args.grid) or DEFAULT_GRIDS[args.protocol]
    space = ParamSpace(tuple(Axis(n, *g) for n, g in grid.items()), args.objective)
    res = grid_search(space, fam, args.samples, resolve_threads(args.threads))
    if not args.no_refine:
        ref = refine(fam, res.best_params, args.refine_tol, args.objective,
                     step=min(a.step for a in space.axes), samples_per_unit=args.samples)
        ref.evaluations += res.evaluations
        ref.skipped = res.skipped
        ref.trace = res.trace + ref.trace
        res = ref
    _emit(res.to_dict(), args.out)
    return 0


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--shape", choices=("triangle", "square"), default="triangle")
    common.add_argument("--k", type=int, default=2, help="number of robots")
    common.add_argument("--protocol", choices=FAMILIES, default="equal")
    common.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                        help="protocol parameter (repeatable)")
    common.add_argument("--samples", type=int, default=10000, help="samples per unit of perimeter")
    common.add_argument("--refine-tol", type=float, default=1e-7)
    common.add_argument("--out", metavar="PATH", help="write JSON here instead of stdout")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $EVACSIM_THREADS or 1)")
    common.add_argument("--trajectories", metavar="PATH",
                        help="custom schedules in the '<id>: (x,y)@t; ...' text format")
    common.add_argument("--policy", choices=("intercept", "rendezvous"), default="intercept",
                        help="evacuation policy for --trajectories")

    parser = argparse.ArgumentParser(prog="evacsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", parents=[common], help="evacuation for one exit")
    ev.add_argument("--exit-arc", type=float, help="exit position as arc length")
    ev.add_argument("--exit-at-vertex", metavar="LABEL", help="exit at a labelled vertex")
    ev.set_defaults(func=cmd_evaluate)

    wc = sub.add_parser("worstcase", parents=[common], help="worst case over all exits")
    wc.add_argument("--csv", metavar="PATH", help="write the sampled curve as s,evac_time")
    wc.add_argument("--svg", metavar="PATH", help="write the protocol figure")
    wc.add_argument("--curve-svg", metavar="PATH", help="write the evacuation-time curve")
    wc.add_argument("--scale", type=float, default=400.0, help="figure pixels per unit")
    wc.set_defaults(func=cmd_worstcase)

    op = sub.add_parser("optimize", parents=[common], help="grid search then refinement")
    op.add_argument("--grid", action="append", default=[], metavar="NAME=LO:HI:STEP")
    op.add_argument("--objective", choices=("WorstCaseSim", "CriticalFormulaMax"),
                    default="WorstCaseSim")
    op.add_argument("--no-refine", action="store_true")
    op.add_argument("--config", metavar="PATH", help="JSON run configuration")
    op.add_argument("--appendix-a", action="store_true",
                    help="replay the published square grid and print its three result lines")
    op.set_defaults(func=cmd_optimize, refine_tol=1e-6)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ProtocolError, OptimizerError, TrajectoryError, GeometryError) as exc:
        print(f"evacsim: error: {exc}", file=sys.stderr)
        return 2
    except EvacuationError as exc:
        print(f"evacsim: evacuation failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
