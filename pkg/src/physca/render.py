"""Spacetime diagrams as ASCII (time downward) or SVG (time upward, 8px cells)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Tuple

from . import formula as fm
from .core_ca import SPEEDS, Configuration, step
from .logical_ca import LogicalConfiguration, logical_step

PITCH = 8

ASCII_CONCRETE = {2: ">", 1: "\\", -1: "/", -2: "<"}
ASCII_SYMBOLIC = {2: "}", 1: "]", -1: "[", -2: "{"}
ASCII_CROSSING = "x"
ASCII_COLLISION = "#"
ASCII_EMPTY = "."


@dataclass(frozen=True)
class RenderSpec:
    t_min: int
    t_max: int
    x_min: int
    x_max: int
    mode: str = "concrete"
    style: str = "ascii"
    show_formulas: bool = False
    show_meetings: bool = True

    def __post_init__(self):
        if self.t_min > self.t_max or self.x_min > self.x_max:
            raise ValueError("render ranges must be nonempty")
        if self.t_min < 0:
            raise ValueError("diagrams start at time 0")
        if self.mode not in ("concrete", "logical"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.style not in ("ascii", "svg"):
            raise ValueError(f"unknown style {self.style!r}")


class Mark(NamedTuple):
    x: int
    t: int
    speed: int
    symbolic: bool
    label: str


class Marks(NamedTuple):
    particles: List[Mark]
    meetings: Dict[Tuple[int, int], str]   # (x, t) -> "crossing" | "collision"


def _meetings(particles: List[Mark]) -> Dict[Tuple[int, int], str]:
    count: Dict[Tuple[int, int], int] = {}
    for m in particles:
        count[(m.x, m.t)] = count.get((m.x, m.t), 0) + 1
    return {k: ("collision" if c >= 3 else "crossing") for k, c in count.items() if c >= 2}


def marks_concrete(x: Configuration, spec: RenderSpec) -> Marks:
    out = []
    for t in range(spec.t_max + 1):
        if t >= spec.t_min:
            for pos in x:
                if spec.x_min <= pos <= spec.x_max:
                    c = x[pos]
                    out.extend(Mark(pos, t, s, False, "1") for k, s in enumerate(SPEEDS) if c >> k & 1)
        if t < spec.t_max:
            x = step(x)
    out.sort()
    return Marks(out, _meetings(out))


def marks_logical(x: LogicalConfiguration, spec: RenderSpec) -> Marks:
    out = []
    for t in range(spec.t_max + 1):
        if t >= spec.t_min:
            for pos, s, f in x.particles():
                if spec.x_min <= pos <= spec.x_max:
                    out.append(Mark(pos, t, s, not fm.is_constant(f), fm.to_prefix(f)))
        if t < spec.t_max:
            x = logical_step(x)
    out.sort()
    return Marks(out, _meetings(out))


def marks_diagram(diagram, spec: RenderSpec) -> Marks:
    """Marks of an event-driven spacetime diagram (used for long runs such as plans)."""
    out = []
    for ray in diagram.rays:
        hi = spec.t_max if ray.end is None else min(spec.t_max, ray.end)
        symbolic = ray.tt != diagram.full
        label = fm.to_prefix(ray.label)
        for t in range(max(spec.t_min, ray.t0), hi + 1):
            pos = ray.at(t)
            if spec.x_min <= pos <= spec.x_max:
                out.append(Mark(pos, t, ray.speed, symbolic, label))
    out.sort()
    return Marks(out, _meetings(out))


def render_ascii(marks: Marks, spec: RenderSpec) -> str:
    width = spec.x_max - spec.x_min + 1
    grid = {t: [ASCII_EMPTY] * width for t in range(spec.t_min, spec.t_max + 1)}
    for m in marks.particles:
        table = ASCII_SYMBOLIC if m.symbolic else ASCII_CONCRETE
        grid[m.t][m.x - spec.x_min] = table[m.speed]
    if spec.show_meetings:
        for (x, t), kind in marks.meetings.items():
            grid[t][x - spec.x_min] = ASCII_COLLISION if kind == "collision" else ASCII_CROSSING
    lines = [f"# x {spec.x_min}..{spec.x_max}, t {spec.t_min}..{spec.t_max}"]
    lines += [f"{t:>6} {''.join(row)}" for t, row in sorted(grid.items())]
    lines.append("# time increases downward; concrete > \\ / < and symbolic } ] [ { for "
                 "speeds +2 +1 -1 -2; x crossing, # collision")
    if spec.show_formulas:
        for m in marks.particles:
            if m.symbolic:
                lines.append(f"# t={m.t} x={m.x} s={m.speed:+d} {m.label}")
    return "\n".join(lines) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def render_svg(marks: Marks, spec: RenderSpec) -> str:
    w = (spec.x_max - spec.x_min + 1) * PITCH
    h = (spec.t_max - spec.t_min + 1) * PITCH
    half = PITCH // 2
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h + 2 * PITCH}" '
           f'viewBox="0 0 {w} {h + 2 * PITCH}">',
           f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>']
    for m in marks.particles:
        cx = (m.x - spec.x_min) * PITCH + half
        cy = (spec.t_max - m.t) * PITCH + half
        dash = ' stroke-dasharray="2,1"' if m.symbolic else ""
        out.append(f'<line x1="{cx - m.speed * half}" y1="{cy + half}" x2="{cx + m.speed * half}" '
                   f'y2="{cy - half}" stroke="black"{dash} data-x="{m.x}" data-t="{m.t}" '
                   f'data-s="{m.speed}"/>')
        if spec.show_formulas and m.symbolic:
            out.append(f'<text x="{cx + 2}" y="{cy - 1}" font-size="3">{_escape(m.label)}</text>')
    if spec.show_meetings:
        for (x, t), kind in sorted(marks.meetings.items()):
            cx = (x - spec.x_min) * PITCH + half
            cy = (spec.t_max - t) * PITCH + half
            fill = "red" if kind == "collision" else "none"
            out.append(f'<circle cx="{cx}" cy="{cy}" r="2" fill="{fill}" stroke="red" '
                       f'data-kind="{kind}"/>')
    out.append(f'<text x="2" y="{h + PITCH + half}" font-size="6">time increases upward; '
               f'solid concrete, dashed symbolic</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render(marks: Marks, spec: RenderSpec) -> str:
    return render_svg(marks, spec) if spec.style == "svg" else render_ascii(marks, spec)


def svg_marks(svg: str) -> List[Tuple[int, int, int]]:
    """The ``(x, t, speed)`` triples drawn in an SVG produced by ``render_svg``."""
    import re
    pat = re.compile(r'data-x="(-?\d+)" data-t="(-?\d+)" data-s="(-?\d+)"')
    return sorted((int(a), int(b), int(c)) for a, b, c in pat.findall(svg))


def ascii_marks(text: str, spec: RenderSpec) -> List[Tuple[int, int, int]]:
    """The single-particle ``(x, t, speed)`` cells drawn in an ASCII diagram."""
    speed_of = {v: k for k, v in ASCII_CONCRETE.items()}
    speed_of.update({v: k for k, v in ASCII_SYMBOLIC.items()})
    out = []
    for line in text.splitlines():
        if line.startswith("#"):
            continue
        t, row = int(line[:6]), line[7:]
        for i, ch in enumerate(row):
            if ch in speed_of:
                out.append((spec.x_min + i, t, speed_of[ch]))
    return sorted(out)


def render_plan(plan, spec: RenderSpec) -> str:
    """Spacetime diagram of a plan's gadget together with the fully general input."""
    from .gadget_synth import plan_diagram
    return render(marks_diagram(plan_diagram(plan, spec.t_max), spec), spec)
