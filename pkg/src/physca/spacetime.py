"""Event-driven spacetime diagrams of the logical CA.

A Boolean particle travels in a straight line until a meeting of three or
more particles changes its label or kills it, so the whole diagram is a set
of rays. Only the integer points where two rays meet are events; everything
in between is implied. This keeps the cost proportional to the number of
meetings rather than to (time x width), which matters once gadgets spread
over thousands of cells.

``SpacetimeDiagram.try_add`` simulates the effect of new time-0 particles on
top of a frozen diagram and checks the controlled-modification conditions as
it goes, so a rejected candidate costs only the events it touched.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import formula as fm
from .core_ca import SPEEDS, TRACK_OF_SPEED
from .formula import FALSE, TRUE, Formula
from .geometry import ControlBudget, Line, ValidationReport, Violation, lines_through_point
from .logical_ca import Census, LogicalConfiguration, SpacetimePosition, cell_map

EVENT_CAP = 5_000_000
_NO_END = np.iinfo(np.int64).max // 4


class Ray:
    """A particle with a fixed label on one line, alive (after gamma) on ``[t0, end]``."""

    __slots__ = ("base", "speed", "t0", "end", "label", "tt")

    def __init__(self, base, speed, t0, label, tt, end=None):
        self.base = base
        self.speed = speed
        self.t0 = t0
        self.end = end
        self.label = label
        self.tt = tt

    @property
    def line(self) -> Line:
        return Line(self.base, self.speed)

    def at(self, t: int) -> int:
        return self.base + self.speed * t

    def alive(self, t: int) -> bool:
        return self.t0 <= t and (self.end is None or t <= self.end)

    def arrives(self, t: int) -> bool:
        return self.t0 < t and (self.end is None or t - 1 <= self.end)

    def __repr__(self):
        return (f"Ray(base={self.base}, speed={self.speed}, t0={self.t0}, "
                f"end={self.end}, label={fm.to_prefix(self.label)})")


class Meeting(NamedTuple):
    coordinate: int
    time: int
    incoming: Tuple[int, ...]
    outgoing: Tuple[int, ...]

    @property
    def is_crossing(self) -> bool:
        return len(self.outgoing) >= 2

    @property
    def is_collision(self) -> bool:
        return len(self.outgoing) >= 3 or len(self.incoming) >= 3


class _Rejected(Exception):
    def __init__(self, violation: Violation):
        super().__init__(str(violation))
        self.violation = violation


class _Checker:
    """Controlled-modification conditions, evaluated while new rays propagate."""

    def __init__(self, diagram: "SpacetimeDiagram", budget: ControlBudget, weak: bool):
        self.d = diagram
        self.budget = budget
        self.weak = weak
        self.new_lines = set()
        self.crossings = 0

    def seed(self, x: int, s: int):
        if x in self.d.reserved:
            raise _Rejected(Violation(1, "particle placed inside the reserved block", (x, 0)))
        if x in self.d._cells0 or self.d._cell0_has_ray(x):
            raise _Rejected(Violation(1, "particle placed on an occupied cell", (x, 0)))

    def ray(self, ray: Ray):
        line = ray.line
        if line in self.budget.protected_lines:
            raise _Rejected(Violation(4, "new Boolean particle on a protected line",
                                      (ray.at(ray.t0), ray.t0), (line,)))
        if line in self.d.lines:
            raise _Rejected(Violation(4, "new Boolean particle on an occupied line",
                                      (ray.at(ray.t0), ray.t0), (line,)))
        self.new_lines.add(line)

    def meeting(self, x: int, t: int):
        if (x, t) in self.d.meetings:
            raise _Rejected(Violation(3, "existing crossing receives another particle", (x, t)))

    def old_changed(self, ray: Ray, x: int, t: int):
        raise _Rejected(Violation(4, "label of an existing particle changed", (x, t), (ray.line,)))

    def point(self, x: int, t: int, pre: int, post: int):
        b = self.budget
        if post >= 2:
            self.crossings += 1
            for line in lines_through_point(x, t):
                if line in b.protected_lines:
                    raise _Rejected(Violation(4, "new crossing on a protected line", (x, t), (line,)))
        if max(pre, post) >= 3:
            for line in lines_through_point(x, t):
                if line in self.d.lines and line not in b.sources:
                    raise _Rejected(Violation(4, "new collision on an occupied line", (x, t), (line,)))
                if not self.weak and t > b.deadline and line in b.target_lines:
                    raise _Rejected(Violation(6, "collision on a target line after the deadline",
                                              (x, t), (line,)))

    def finish(self, seeds: int, rays: Sequence[Ray]) -> ValidationReport:
        b = self.budget
        report = ValidationReport(seeds, len(self.new_lines), self.crossings, self.weak)
        t = b.deadline
        for ray in rays:
            if ray.alive(t) and ray.at(t) in b.protected_interval and ray.line not in b.target_lines:
                report.violation = Violation(5, "new Boolean particle at a forbidden position",
                                             (ray.at(t), t), (ray.line,))
                return report
        if seeds > b.max_added_particles:
            report.violation = Violation(1, f"{seeds} particles added, budget {b.max_added_particles}")
        elif len(self.new_lines) > b.max_added_particles:
            report.violation = Violation(
                2, f"{len(self.new_lines)} new occupied lines, budget {b.max_added_particles}")
        elif self.crossings > b.max_new_crossings:
            report.violation = Violation(
                2, f"{self.crossings} new crossings, budget {b.max_new_crossings}")
        return report


@dataclass
class Trial:
    """Outcome of ``try_add``; ``commit`` applies it to the diagram it came from."""
    diagram: "SpacetimeDiagram"
    report: ValidationReport
    rays: List[Ray] = field(default_factory=list)
    meetings: Dict[Tuple[int, int], Meeting] = field(default_factory=dict)
    seeds: List[Tuple[int, int]] = field(default_factory=list)
    horizon: Optional[int] = None
    _generation: int = 0

    @property
    def ok(self) -> bool:
        return self.report.ok

    def commit(self) -> None:
        d = self.diagram
        if not self.ok:
            raise ValueError(f"cannot commit a rejected modification: {self.report.violation}")
        if self._generation != d._generation:
            raise ValueError("diagram changed since this trial was computed")
        d._absorb(self.rays, self.meetings, self.horizon)
        d.added.extend(self.seeds)


class SpacetimeDiagram:
    """Rays and meeting points of a logical configuration run forward from time 0."""

    def __init__(self, variables: Sequence[int], horizon: Optional[int] = None,
                 reserved: Iterable[int] = ()):
        self.variables = tuple(variables)
        self.full = (1 << (1 << len(self.variables))) - 1
        self.horizon = horizon
        self.reserved = frozenset(reserved)
        self.rays: List[Ray] = []
        self.meetings: Dict[Tuple[int, int], Meeting] = {}
        self.lines: Dict[Line, List[int]] = {}
        self.added: List[Tuple[int, int]] = []
        self._cells0: Dict[int, List[int]] = {}
        self._index = None
        self._generation = 0
        self._line_index: Dict[Line, list] = {}
        self._line_index_generation = -1

    # -- construction --------------------------------------------------------------

    @classmethod
    def from_configuration(cls, x: LogicalConfiguration, variables: Optional[Sequence[int]] = None,
                           horizon: Optional[int] = None, reserved: Iterable[int] = ()):
        if variables is None:
            variables = sorted(x.variables())
        d = cls(variables, horizon, reserved)
        seeds = [(pos, s, f) for pos, s, f in x.particles()]
        rays, meetings = d._propagate(seeds, horizon, None)
        d._absorb(rays, meetings, horizon)
        return d

    def _tt(self, f: Formula) -> int:
        return fm.truth_table(f, self.variables)

    def _absorb(self, rays, meetings, horizon):
        start = len(self.rays)
        self.rays.extend(rays)
        for i, ray in enumerate(rays, start):
            self.lines.setdefault(ray.line, []).append(i)
            if ray.t0 == 0:
                self._cells0.setdefault(ray.base, []).append(i)
        self.meetings.update(meetings)
        if horizon is not None and (self.horizon is None or horizon < self.horizon):
            self.horizon = horizon
        self._index = None
        self._generation += 1

    def _cell0_has_ray(self, x: int) -> bool:
        return x in self._cells0

    def _speed_index(self):
        if self._index is None:
            idx = {}
            for s in SPEEDS:
                ids = [i for i, r in enumerate(self.rays) if r.speed == s]
                idx[s] = (np.array(ids, dtype=np.int64),
                          np.array([self.rays[i].base for i in ids], dtype=np.int64),
                          np.array([self.rays[i].t0 for i in ids], dtype=np.int64),
                          np.array([_NO_END if self.rays[i].end is None else self.rays[i].end + 1
                                    for i in ids], dtype=np.int64))
            self._index = idx
        return self._index

    # -- the event loop ------------------------------------------------------------

    def _propagate(self, seeds, horizon, checker: Optional[_Checker]):
        n_old = len(self.rays)
        old = self.rays
        new: List[Ray] = []
        live: set = set()
        heap: list = []
        meetings: Dict[Tuple[int, int], Meeting] = {}
        index = self._speed_index() if n_old else None
        hz = _NO_END if horizon is None else horizon

        def get(i):
            return old[i] if i < n_old else new[i - n_old]

        def push_pair(rid, r, qid, q):
            if r.speed == q.speed:
                return
            num = q.base - r.base
            den = r.speed - q.speed
            if num % den:
                return
            tau = num // den
            if tau <= max(r.t0, q.t0) or tau > hz:
                return
            if q.end is not None and tau > q.end + 1:
                return
            heapq.heappush(heap, (tau, r.at(tau), rid, qid))

        def add_ray(ray):
            rid = n_old + len(new)
            if checker is not None:
                checker.ray(ray)
            new.append(ray)
            if index is not None:
                for s in SPEEDS:
                    if s == ray.speed:
                        continue
                    ids, bases, t0s, endp1 = index[s]
                    if not len(ids):
                        continue
                    den = ray.speed - s
                    num = bases - ray.base
                    ok = num % den == 0
                    tau = num // den
                    ok &= (tau > np.maximum(t0s, ray.t0)) & (tau <= endp1) & (tau <= hz)
                    for qid, t in zip(ids[ok].tolist(), tau[ok].tolist()):
                        heapq.heappush(heap, (t, ray.base + ray.speed * t, rid, qid))
            for qid in live:
                push_pair(rid, ray, qid, new[qid - n_old])
            live.add(rid)
            return rid

        cells0: Dict[int, List[int]] = {}
        for x, s, f in seeds:
            if checker is not None:
                checker.seed(x, s)
            tt = self._tt(f)
            if tt == 0:
                continue
            if tt == self.full:
                f = TRUE
            rid = add_ray(Ray(x - 0, s, 0, f, tt))
            cells0.setdefault(x, []).append(rid)
        for x, ids in cells0.items():
            if len(ids) >= 2:
                if checker is not None:
                    raise _Rejected(Violation(1, "two added particles share a cell", (x, 0)))
                meetings[(x, 0)] = Meeting(x, 0, (), tuple(sorted(ids)))

        processed = 0
        while heap:
            tau = heap[0][0]
            batch: Dict[int, set] = {}
            while heap and heap[0][0] == tau:
                _, x, a, b = heapq.heappop(heap)
                batch.setdefault(x, set()).update((a, b))
                processed += 1
            if processed > EVENT_CAP:
                raise RuntimeError("event cap exceeded; the diagram does not settle")
            for x in sorted(batch):
                ids = sorted(i for i in batch[x] if get(i).arrives(tau))
                if len(ids) < 2:
                    continue
                if checker is not None:
                    checker.meeting(x, tau)
                slots: List[Optional[int]] = [None] * 4
                for i in ids:
                    slots[TRACK_OF_SPEED[get(i).speed]] = i
                outgoing = []
                born = []
                if len(ids) >= 3:
                    cell = tuple(FALSE if i is None else get(i).label for i in slots)
                    out = cell_map(cell)
                    for k in range(4):
                        f = out[k]
                        inc = slots[k]
                        tt = 0 if f is FALSE else self._tt(f)
                        if inc is not None and tt == get(inc).tt:
                            outgoing.append(inc)
                            continue
                        if inc is not None:
                            if inc < n_old:
                                checker.old_changed(old[inc], x, tau)
                            new[inc - n_old].end = tau - 1
                            live.discard(inc)
                        if tt:
                            born.append(Ray(x - SPEEDS[k] * tau, SPEEDS[k], tau,
                                            TRUE if tt == self.full else f, tt))
                else:
                    outgoing = ids
                for ray in born:
                    outgoing.append(add_ray(ray))
                if checker is not None:
                    checker.point(x, tau, len(ids), len(outgoing))
                meetings[(x, tau)] = Meeting(x, tau, tuple(ids), tuple(sorted(outgoing)))
        return new, meetings

    # -- modifications ---------------------------------------------------------------

    def seeds_blocked(self, particles: Sequence[Tuple[int, int]]) -> bool:
        """Cheap pre-check: would any of these time-0 particles fail the seed rules?"""
        seen = set()
        for x, _ in particles:
            if x in seen or x in self.reserved or x in self._cells0 or self._cell0_has_ray(x):
                return True
            seen.add(x)
        return False

    def try_add(self, particles: Iterable[Tuple[int, int]], budget: ControlBudget,
                weak: bool = False) -> Trial:
        """Simulate adding concrete particles ``(coordinate, speed)`` at time 0."""
        particles = list(particles)
        horizon = self.horizon
        if weak and (horizon is None or budget.deadline < horizon):
            horizon = budget.deadline
        checker = _Checker(self, budget, weak)
        try:
            rays, meetings = self._propagate([(x, s, TRUE) for x, s in particles], horizon, checker)
        except _Rejected as exc:
            rep = ValidationReport(len(particles), len(checker.new_lines), checker.crossings, weak,
                                   exc.violation)
            return Trial(self, rep, _generation=self._generation)
        report = checker.finish(len(particles), rays)
        return Trial(self, report, rays, meetings, particles,
                     horizon if weak else None, self._generation)

    # -- queries ---------------------------------------------------------------------

    def rays_on(self, line: Line) -> List[Ray]:
        return [self.rays[i] for i in self.lines.get(line, ())]

    def ray_at(self, position: SpacetimePosition) -> Optional[Ray]:
        x, t, s = position
        for ray in self.rays_on(Line(x - s * t, s)):
            if ray.alive(t):
                return ray
        return None

    def label_at(self, position: SpacetimePosition) -> Formula:
        ray = self.ray_at(position)
        return FALSE if ray is None else ray.label

    def collision_free_after(self, ray: Ray, t: int) -> bool:
        """No collision on the ray's line at times ``> t``."""
        spans = [(r.t0, None if r.end is None else r.end + 1) for r in self.rays_on(ray.line)]
        for tau, key in self._line_meetings(ray.line):
            if tau > t and self.meetings[key].is_collision and any(
                    lo <= tau and (hi is None or tau <= hi) for lo, hi in spans):
                return False
        return True

    def meets_line_by(self, line: Line, t: int) -> bool:
        """Whether some meeting lies on ``line`` at a time in ``[0, t]``."""
        times = self._line_meetings(line)
        return bool(times) and times[0][0] <= t

    def _line_meetings(self, line: Line) -> List[Tuple[int, Tuple[int, int]]]:
        if self._line_index_generation != self._generation:
            index: Dict[Line, list] = {}
            for key in self.meetings:
                x, tau = key
                for ln in lines_through_point(x, tau):
                    index.setdefault(ln, []).append((tau, key))
            for v in index.values():
                v.sort()
            self._line_index = index
            self._line_index_generation = self._generation
        return self._line_index.get(line, [])

    def configuration_at(self, t: int) -> LogicalConfiguration:
        if self.horizon is not None and t > self.horizon:
            raise ValueError(f"time {t} is beyond the diagram horizon {self.horizon}")
        cells: Dict[int, list] = {}
        for ray in self.rays:
            if ray.alive(t):
                cells.setdefault(ray.at(t), [FALSE] * 4)[TRACK_OF_SPEED[ray.speed]] = ray.label
        return LogicalConfiguration._trusted({x: tuple(c) for x, c in cells.items()})

    def occupied_lines(self) -> set:
        return set(self.lines)

    def crossings(self) -> List[Tuple[int, int]]:
        return sorted(k for k, m in self.meetings.items() if m.is_crossing)

    def collisions(self) -> List[Tuple[int, int]]:
        return sorted(k for k, m in self.meetings.items() if len(m.outgoing) >= 3)

    def census(self, t_min: int, t_max: int) -> Census:
        if t_min > t_max:
            raise ValueError("t_min must not exceed t_max")
        if t_min < 0:
            raise ValueError("diagrams start at time 0")
        out = Census([], [], [])
        for ray in self.rays:
            hi = t_max if ray.end is None else min(t_max, ray.end)
            for t in range(max(t_min, ray.t0), hi + 1):
                out.boolean_particles.append((SpacetimePosition(ray.at(t), t, ray.speed), ray.label))
        out.boolean_particles.sort(key=lambda p: (p[0].time, p[0].coordinate, -p[0].speed))
        for (x, t), m in sorted(self.meetings.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            if t_min <= t <= t_max:
                if len(m.outgoing) >= 2:
                    out.crossings.append((x, t))
                if len(m.outgoing) >= 3:
                    out.collisions.append((x, t))
        return out
