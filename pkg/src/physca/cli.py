"""Command-line entry points: simulate, synthesize, verify, render-plan, census."""
from __future__ import annotations

import argparse
import json
import sys
import time
from typing import List, Optional

from . import core_ca, logical_ca
from .circuit import NetlistError, builtin, parse_netlist
from .gadget_synth import (GadgetError, PlanFormatError, dump_plan, load_plan, synthesize,
                           verify_plan)
from .render import RenderSpec, marks_concrete, marks_logical, render, render_plan

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_PARSE = 2
EXIT_SYNTH = 3
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _emit(args, payload: dict, text: str) -> None:
    if args.format == "json":
        print(json.dumps(payload, sort_keys=True))
    else:
        print(text)


def _netlist(args, n: int):
    if args.circuit is not None:
        return parse_netlist(_read(args.circuit))
    return builtin(args.h, n)


def _range_of(support: List[int], steps: int, lo, hi):
    if lo is None:
        lo = (min(support) if support else 0) - 2 * steps
    if hi is None:
        hi = (max(support) if support else 0) + 2 * steps
    return lo, hi


# -- commands ------------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    text = _read(args.config)
    try:
        if args.mode == "logical":
            x0 = logical_ca.load(text)
        else:
            x0 = core_ca.parse(text)
    except ValueError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    lo, hi = _range_of(list(x0), args.steps, args.x_min, args.x_max)
    spec = RenderSpec(0, args.steps, lo, hi, args.mode, args.style, args.show_formulas,
                      not args.hide_meetings)
    marks = marks_logical(x0, spec) if args.mode == "logical" else marks_concrete(x0, spec)
    try:
        _write(args.output, render(marks, spec))
    except OSError as exc:
        print(f"write error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_synthesize(args) -> int:
    net = _netlist(args, args.n)
    start = time.perf_counter()
    try:
        plan = synthesize(args.n, net, scale=args.scale, max_attempts=args.max_attempts)
    except (GadgetError, ValueError) as exc:
        print(f"synthesis failure: {exc}", file=sys.stderr)
        return EXIT_SYNTH
    elapsed = time.perf_counter() - start
    if args.output:
        _write(args.output, dump_plan(plan))
    payload = {"n": plan.n, "t_final": plan.t_final, "particles": len(plan.added_particles),
               "C": len(net.gates), "stage_times": plan.stage_times, "seconds": round(elapsed, 3),
               "stages": [{"name": s.name, "added": s.added, "m1": s.m1, "m2": s.m2,
                           "m3": s.m3, "m4": s.m4} for s in plan.stages]}
    lines = [f"t_final {plan.t_final}", f"particles {len(plan.added_particles)}",
             f"C {len(net.gates)}"]
    lines += [f"{k} {v}" for k, v in plan.stage_times.items() if k != "t_final"]
    lines += [f"stage {s.name}: added {s.added} m1 {s.m1} m2 {s.m2} m3 {s.m3} m4 {s.m4}"
              for s in plan.stages]
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        plan = load_plan(_read(args.plan))
    except PlanFormatError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    net = _netlist(args, plan.n)
    sample = args.sample if args.mode == "sample" else None
    reports = verify_plan(plan, plan.n, net, mode=args.mode, sample=sample)
    ok = all(r.ok for r in reports)
    payload = {"ok": ok, "reports": [{"mode": r.mode, "ok": r.ok, "checked": r.checked,
                                      "failures": r.failures, "sampled": r.sampled,
                                      "lines": r.lines} for r in reports]}
    text = []
    for r in reports:
        text.extend(r.lines)
        text.append(r.summary())
    _emit(args, payload, "\n".join(text))
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_render_plan(args) -> int:
    try:
        plan = load_plan(_read(args.plan))
    except PlanFormatError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    t_max = plan.t_final if args.t_max is None else args.t_max
    support = [p for p, _ in plan.added_particles] + [0, plan.n - 1]
    lo = max(min(support), -2 * t_max) if args.x_min is None else args.x_min
    hi = min(max(support), plan.n - 1 + 2 * t_max) if args.x_max is None else args.x_max
    spec = RenderSpec(args.t_min, t_max, lo, hi, "logical", args.style, args.show_formulas,
                      not args.hide_meetings)
    _write(args.output, render_plan(plan, spec))
    return EXIT_OK


def cmd_census(args) -> int:
    if args.general is not None:
        x0 = logical_ca.fully_general(args.general)
    elif args.config is not None:
        text = _read(args.config)
        try:
            x0 = logical_ca.load(text) if args.logical else logical_ca.embed(core_ca.parse(text))
        except ValueError as exc:
            print(f"parse error: {exc}", file=sys.stderr)
            return EXIT_PARSE
    else:
        raise UsageError("census needs a configuration file or --general N")
    c = logical_ca.census(x0, args.t_min, args.t_max)
    per_time = {}
    for pos, _ in c.boolean_particles:
        per_time[pos.time] = per_time.get(pos.time, 0) + 1
    payload = {"particles": len(c.boolean_particles), "crossings": len(c.crossings),
               "collisions": len(c.collisions), "per_time": per_time,
               "collision_points": c.collisions}
    text = [f"particles {len(c.boolean_particles)}", f"crossings {len(c.crossings)}",
            f"collisions {len(c.collisions)}"]
    text += [f"t {t}: {k}" for t, k in sorted(per_time.items())]
    _emit(args, payload, "\n".join(text))
    return EXIT_OK


# -- parser --------------------------------------------------------------------------------

def _render_flags(p, default_style="ascii"):
    p.add_argument("--style", choices=("ascii", "svg"), default=default_style)
    p.add_argument("--x-min", type=int)
    p.add_argument("--x-max", type=int)
    p.add_argument("--show-formulas", action="store_true")
    p.add_argument("--hide-meetings", action="store_true")
    p.add_argument("-o", "--output")


def _circuit_flags(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--h", default="identity", help="builtin block function name")
    g.add_argument("--circuit", help="netlist file on 4n bits")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="physca")
    p.add_argument("--format", choices=("text", "json"), default="text")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run a configuration and draw its spacetime diagram")
    s.add_argument("config")
    s.add_argument("--steps", type=int, default=10)
    s.add_argument("--mode", choices=("concrete", "logical"), default="concrete")
    _render_flags(s)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("synthesize", help="compile a block function into a gadget plan")
    _circuit_flags(s)
    s.add_argument("--n", type=_positive, required=True)
    s.add_argument("--scale", type=_positive, default=1)
    s.add_argument("--max-attempts", type=_positive, default=6)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("verify", help="check a plan against its block function")
    s.add_argument("plan")
    _circuit_flags(s)
    s.add_argument("--mode", choices=("exhaustive", "sample", "symbolic"), default="exhaustive")
    s.add_argument("--sample", type=_positive, default=64)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("render-plan", help="draw a plan's gadget with the general input")
    s.add_argument("plan")
    s.add_argument("--t-min", type=int, default=0)
    s.add_argument("--t-max", type=int)
    _render_flags(s, "svg")
    s.set_defaults(func=cmd_render_plan)

    s = sub.add_parser("census", help="count Boolean particles, crossings and collisions")
    s.add_argument("config", nargs="?")
    s.add_argument("--general", type=_positive, help="use the fully general input of n cells")
    s.add_argument("--logical", action="store_true", help="config is a logical dump")
    s.add_argument("--t-min", type=int, default=0)
    s.add_argument("--t-max", type=int, default=10)
    s.set_defaults(func=cmd_census)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NetlistError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (OSError, ValueError) as exc:
        if isinstance(exc, OSError) and args.command != "simulate":
            print(f"input error: {exc}", file=sys.stderr)
            return EXIT_PARSE
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc, ValueError) else EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
