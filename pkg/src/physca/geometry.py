"""Lines, cones and the bookkeeping types shared by the gadget constructions."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import FrozenSet, Iterable, List, NamedTuple, Optional, Set, Tuple, Union

from .core_ca import SPEEDS
from .logical_ca import SpacetimePosition


class Line(NamedTuple):
    """Trajectory ``{(base + speed * t, t)}``; ``base`` is the coordinate at time 0."""
    base: int
    speed: int

    def at(self, t: int) -> int:
        return self.base + self.speed * t

    def position(self, t: int) -> SpacetimePosition:
        return SpacetimePosition(self.at(t), t, self.speed)

    def contains(self, x: int, t: int) -> bool:
        return self.base + self.speed * t == x


SAME_LINE = "same"


def line_through(position: SpacetimePosition) -> Line:
    x, t, s = position
    if s not in SPEEDS:
        raise ValueError(f"bad speed {s}")
    return Line(x - s * t, s)


def lines_through_point(x: int, t: int) -> Tuple[Line, ...]:
    return tuple(Line(x - s * t, s) for s in SPEEDS)


def intersect(l1: Line, l2: Line) -> Union[None, str, Tuple[Fraction, Fraction]]:
    """Exact intersection over the rationals.

    Returns ``None`` for distinct parallel lines, ``SAME_LINE`` for equal ones.
    """
    if l1.speed == l2.speed:
        return SAME_LINE if l1.base == l2.base else None
    t = Fraction(l2.base - l1.base, l1.speed - l2.speed)
    return l1.base + l1.speed * t, t


def integral_intersection(l1: Line, l2: Line) -> Optional[Tuple[int, int]]:
    p = intersect(l1, l2)
    if p is None or p == SAME_LINE:
        return None
    x, t = p
    if x.denominator != 1 or t.denominator != 1:
        return None
    return int(x), int(t)


@dataclass(frozen=True)
class Cone:
    """Points reachable from the apex at speed at most 1."""
    apex_coordinate: int
    apex_time: int

    def __contains__(self, point) -> bool:
        x, t = point[0], point[1]
        dt = t - self.apex_time
        return dt >= 0 and abs(x - self.apex_coordinate) <= dt


@dataclass(frozen=True)
class Interval:
    lo: int
    hi: int

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    def __iter__(self):
        return iter(range(self.lo, self.hi + 1))

    def __len__(self):
        return max(0, self.hi - self.lo + 1)


EMPTY_INTERVAL = Interval(0, -1)


def forbidden_positions(targets: Iterable[Line], t: int, interval: Interval) -> Set[SpacetimePosition]:
    """Positions at time ``t`` over ``interval`` that are not on a target line."""
    allowed = {line.position(t) for line in targets}
    return {SpacetimePosition(i, t, s) for i in interval for s in SPEEDS} - allowed


@dataclass
class ControlBudget:
    """Limits of a controlled modification.

    ``sources`` are the lines of the particles a modification deliberately
    collides with; they may receive new collisions but must keep their labels.
    """
    max_added_particles: int
    max_new_crossings: int
    protected_lines: FrozenSet[Line] = frozenset()
    target_lines: FrozenSet[Line] = frozenset()
    deadline: int = 0
    protected_interval: Interval = EMPTY_INTERVAL
    sources: FrozenSet[Line] = frozenset()

    def __post_init__(self):
        self.protected_lines = frozenset(self.protected_lines)
        self.target_lines = frozenset(self.target_lines)
        self.sources = frozenset(self.sources)


@dataclass
class Violation:
    condition: int
    message: str
    location: Optional[Tuple[int, int]] = None
    lines: Tuple[Line, ...] = ()

    def __str__(self):
        where = f" at (x={self.location[0]}, t={self.location[1]})" if self.location else ""
        ls = "".join(f" [line base={l.base} speed={l.speed}]" for l in self.lines)
        return f"condition {self.condition}: {self.message}{where}{ls}"


@dataclass
class ValidationReport:
    added_particles: int = 0
    new_occupied_lines: int = 0
    new_crossings: int = 0
    weak: bool = False
    violation: Optional[Violation] = None

    @property
    def ok(self) -> bool:
        return self.violation is None

    def __bool__(self):
        return self.ok

    def to_text(self) -> str:
        head = "VALID" if self.ok else "INVALID"
        mode = "weak" if self.weak else "strong"
        lines = [f"{head} ({mode})",
                 f"added_particles {self.added_particles}",
                 f"new_occupied_lines {self.new_occupied_lines}",
                 f"new_crossings {self.new_crossings}"]
        if self.violation is not None:
            lines.append(f"violation {self.violation}")
        return "\n".join(lines) + "\n"


@dataclass
class DiagramLedger:
    occupied_lines: Set[Line] = field(default_factory=set)
    crossings: Set[Tuple[int, int]] = field(default_factory=set)
    collisions: Set[Tuple[int, int]] = field(default_factory=set)
    added_particles: List[Tuple[int, int]] = field(default_factory=list)


def validate_controlled(before, after, budget: ControlBudget,
                        window: Optional[Tuple[int, int]] = None,
                        weak: bool = False) -> ValidationReport:
    """Check that ``after`` is a controlled modification of ``before``.

    ``after`` must equal ``before`` plus concrete particles on cells and
    tracks that are empty in ``before``. Both spacetime diagrams are built
    up to the end of ``window`` (unbounded when ``None``) and compared; in
    weak mode only times up to the deadline count.
    """
    from .formula import FALSE, TRUE
    from .spacetime import SpacetimeDiagram
    added = []
    for x in set(before) | set(after):
        old, new = before[x], after[x]
        for k, s in enumerate(SPEEDS):
            if old[k] is new[k]:
                continue
            if old[k] is FALSE and new[k] is TRUE:
                added.append((x, s))
            else:
                raise ValueError(f"cell {x} differs by more than added concrete particles")
    horizon = None if window is None else window[1]
    variables = sorted(before.variables() | after.variables())
    diagram = SpacetimeDiagram.from_configuration(before, variables, horizon)
    return diagram.try_add(sorted(added), budget, weak).report
