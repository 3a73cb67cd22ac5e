"""Gadget construction: moving Boolean particles, NAND gadgets, and the compiler.

Every gadget is a set of concrete particles added at time 0 so that they
meet existing Boolean particles at chosen spacetime points. A meeting of a
particle with two concrete particles can copy its label onto another track
without disturbing it; chaining such meetings moves labels around and, with
one more meeting, combines two labels into their NAND.

Candidates are enumerated in a fixed order and the first one whose
simulated effect passes the controlled-modification checks wins.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

from . import formula as fm
from .core_ca import SPEEDS, TRACK_OF_SPEED
from .formula import FALSE, TRUE, Formula
from .geometry import EMPTY_INTERVAL, ControlBudget, DiagramLedger, Interval, Line, ValidationReport
from .logical_ca import SpacetimePosition, canonical_track, cell_map
from .spacetime import Ray, SpacetimeDiagram, Trial

MOVE_PARTICLES = 16
NAND_PARTICLES = 32
DEFAULT_MAX_TRIALS = 400
# candidates inspected (including cheap rejections) per simulated trial
SCAN_FACTOR = 50
# gap between parallel signal lines; leaves room for the gadgets' slope-1 helpers
LINE_PITCH = 4
# measured bound t_final <= POLY_C * (C_H + n)**3 + POLY_C0 over the test suite
POLY_C = 5000
POLY_C0 = 200000


class GadgetError(RuntimeError):
    pass


class PreconditionError(GadgetError, ValueError):
    pass


class NoFeasibleMoveError(GadgetError):
    def __init__(self, message: str, scanned: Tuple[int, int] = (0, 0), tried: int = 0,
                 last: Optional[ValidationReport] = None):
        super().__init__(message)
        self.scanned = scanned
        self.tried = tried
        self.last = last


@dataclass(frozen=True)
class Particle:
    """A Boolean particle on ``line`` that is free of collisions after ``release``."""
    line: Line
    label: Formula
    release: int


# -- redirection table -------------------------------------------------------------------

def _redirect_tables():
    beta = fm.var(0)
    preserve: Dict[Tuple[int, int], Tuple[int, int]] = {}
    clean: Dict[Tuple[int, int], Tuple[int, int]] = {}
    for s_in in SPEEDS:
        others = [s for s in SPEEDS if s != s_in]
        for aux in combinations(others, 2):
            cell = [FALSE] * 4
            cell[TRACK_OF_SPEED[s_in]] = beta
            for a in aux:
                cell[TRACK_OF_SPEED[a]] = TRUE
            out = [canonical_track(f) for f in cell_map(tuple(cell))]
            kept = fm.equivalent(out[TRACK_OF_SPEED[s_in]], beta)
            for s_out in others:
                if fm.equivalent(out[TRACK_OF_SPEED[s_out]], beta):
                    (preserve if kept else clean).setdefault((s_in, s_out), aux)
    return preserve, clean


# (incoming speed, copy speed) -> speeds of the two concrete partners
PRESERVING_REDIRECT, CLEAN_REDIRECT = _redirect_tables()


def redirect_partners(s_in: int, s_out: int, keep_source: bool = True) -> Optional[Tuple[int, int]]:
    if keep_source:
        return PRESERVING_REDIRECT.get((s_in, s_out))
    return PRESERVING_REDIRECT.get((s_in, s_out)) or CLEAN_REDIRECT.get((s_in, s_out))


def _partners_at(x: int, t: int, speeds: Sequence[int]) -> List[Tuple[int, int]]:
    """Time-0 positions of concrete particles that reach ``(x, t)``."""
    return [(x - s * t, s) for s in speeds]


# -- movement ---------------------------------------------------------------------------

def movement_parameters(j: int, t: int, j2: int, t2: int) -> List[Tuple[int, int]]:
    """All ``(k, k')`` for the fast-right to fast-left move through a slow-right stage."""
    out = []
    total = j2 - j + 2 * (t2 - t)
    lo = max(0, j2 - j - (t2 - t))
    for k in range(lo, -(-total // 4)):
        if 4 * k >= total:
            break
        if (total - 4 * k) % 3:
            continue
        k2 = (total - 4 * k) // 3
        if k2 > 0 and k + k2 <= t2 - t:
            out.append((k, k2))
    return out


def basic_move_particles(j: int, t: int, k: int, k2: int) -> List[Tuple[int, int]]:
    """The four partners for the fast-right to fast-left move with parameters ``k, k'``."""
    return [(j - 2 * t - k2, 2), (j + 3 * k + t, -1), (j + 4 * k + 2 * t, -2),
            (j + t + 3 * k + 2 * k2, -1)]


@dataclass
class MovementSolution:
    """One move. ``parts`` lists the elementary moves when it is a composition of two."""
    k: int
    k2: int
    mid_speed: int
    added: List[Tuple[int, int]]
    collisions: List[Tuple[int, int]]
    new_lines: List[Line] = field(default_factory=list)
    report: Optional[ValidationReport] = None
    parts: List["MovementSolution"] = field(default_factory=list)
    budget: Optional[ControlBudget] = None

    @property
    def elementary(self) -> List["MovementSolution"]:
        return self.parts or [self]


def _landing(um: int, sm: int, target: Line, after: int, t2: int) -> Optional[int]:
    """Time at which the line ``(um, sm)`` meets ``target`` inside ``(after, t2]``."""
    num = target.base - um
    den = sm - target.speed
    if den == 0 or num % den:
        return None
    tau = num // den
    return tau if after < tau <= t2 else None


def _elementary(source: Line, t: int, tau1: int, sm: int, target: Line,
                t2: int) -> Optional[MovementSolution]:
    """The two-meeting move that copies off ``source`` at ``tau1`` via speed ``sm``."""
    s = source.speed
    first = redirect_partners(s, sm, keep_source=True)
    if first is None or sm == target.speed:
        return None
    second = redirect_partners(sm, target.speed, keep_source=False)
    if second is None:
        return None
    x1 = source.at(tau1)
    um = x1 - sm * tau1
    tau2 = _landing(um, sm, target, tau1, t2)
    if tau2 is None:
        return None
    x2 = um + sm * tau2
    added = _partners_at(x1, tau1, first) + _partners_at(x2, tau2, second)
    lines = [source] + [Line(x, a) for x, a in added] + [Line(um, sm), target]
    return MovementSolution(tau1 - t, tau2 - tau1, sm, added, [(x1, tau1), (x2, tau2)], lines)


def move_candidates(source: Line, t: int, target: Line, t2: int,
                    detour: int = 6) -> Iterator[MovementSolution]:
    """Moves from ``source`` (after ``t``) onto ``target`` by time ``t2``.

    An elementary move has two meetings: the first copies the label onto a
    line of another speed and leaves the source intact, the second turns the
    copy onto the target. When no elementary move starts at a given time,
    two are chained through an intermediate line; the first leg lands within
    ``detour`` steps so the second leg has a fresh divisibility class.
    Ordered by the first meeting time.
    """
    for tau1 in range(t + 1, t2):
        direct = False
        for sm in SPEEDS:
            sol = _elementary(source, t, tau1, sm, target, t2)
            if sol is not None:
                direct = True
                yield sol
        if direct:
            continue
        x1 = source.at(tau1)
        for sm in SPEEDS:
            if redirect_partners(source.speed, sm, keep_source=True) is None:
                continue
            um = x1 - sm * tau1
            for tau_mid in range(tau1 + 1, min(tau1 + detour, t2) + 1):
                x_mid = um + sm * tau_mid
                for s_mid in SPEEDS:
                    if s_mid in (sm, source.speed, target.speed):
                        continue
                    via = Line(x_mid - s_mid * tau_mid, s_mid)
                    leg1 = _elementary(source, t, tau1, sm, via, tau_mid)
                    if leg1 is None:
                        continue
                    for tau3 in range(tau_mid + 1, min(tau_mid + detour, t2)):
                        for sm2 in SPEEDS:
                            leg2 = _elementary(via, tau_mid, tau3, sm2, target, t2)
                            if leg2 is None:
                                continue
                            yield MovementSolution(
                                leg1.k, leg2.collisions[-1][1] - tau1, sm,
                                leg1.added + leg2.added, leg1.collisions + leg2.collisions,
                                leg1.new_lines + leg2.new_lines[1:], parts=[leg1, leg2])


def _new_ray_on(trial: Trial, line: Line, t: int) -> Optional[Ray]:
    for ray in trial.rays:
        if ray.speed == line.speed and ray.base == line.base and ray.alive(t):
            return ray
    return None


def _source_ray(diagram: SpacetimeDiagram, p: Particle) -> Ray:
    ray = diagram.ray_at(p.line.position(p.release))
    if ray is None:
        raise PreconditionError(f"no particle on line {p.line} at time {p.release}")
    if ray.tt != diagram._tt(p.label):
        raise PreconditionError(f"particle on line {p.line} does not carry the given label")
    if not diagram.collision_free_after(ray, p.release):
        raise PreconditionError(f"line {p.line} has collisions after time {p.release}")
    return ray


def _check_target(diagram: SpacetimeDiagram, target: Line, t2: int, weak: bool):
    for ray in diagram.rays_on(target):
        if not weak or ray.t0 <= t2:
            raise PreconditionError(f"target line {target} is occupied")


def _seeds_clear(diagram: SpacetimeDiagram, added, collisions,
                 budget: ControlBudget) -> bool:
    """Cheap exact rejections, so that simulated trials go to plausible candidates.

    Seeds must sit on free cells, off protected and occupied lines, and
    must not pass through an existing meeting before their own.
    """
    if diagram.seeds_blocked(added):
        return False
    for x, sp in added:
        line = Line(x, sp)
        if line in budget.protected_lines or line in diagram.lines:
            return False
        tau = next((ct for cx, ct in collisions if x + sp * ct == cx), None)
        if tau is not None and diagram.meets_line_by(line, tau - 1):
            return False
    return True


def move_particle(diagram: SpacetimeDiagram, p: Particle, target: Line, t2: int,
                  budget: ControlBudget, weak: bool = False,
                  max_trials: int = DEFAULT_MAX_TRIALS) -> MovementSolution:
    """Copy the label of ``p`` onto ``target`` at time ``t2`` and commit the change."""
    if t2 <= p.release:
        raise PreconditionError("the target time must be after the release time")
    src = _source_ray(diagram, p)
    _check_target(diagram, target, t2, weak)
    if target in budget.protected_lines:
        raise PreconditionError("target line is protected")
    b = replace(budget, sources=budget.sources | {p.line},
                target_lines=budget.target_lines | {target}, deadline=t2)
    tried = scanned = 0
    last = None
    first_k = None
    k = None
    for sol in move_candidates(p.line, p.release, target, t2):
        if src.end is not None and src.end < sol.collisions[0][1]:
            break
        first_k = sol.k if first_k is None else first_k
        k = sol.k
        scanned += 1
        if scanned > SCAN_FACTOR * max_trials:
            break
        if not _seeds_clear(diagram, sol.added, sol.collisions, b):
            continue
        tried += 1
        trial = diagram.try_add(sol.added, b, weak)
        last = trial.report
        if trial.ok:
            ray = _new_ray_on(trial, target, t2)
            if ray is not None and ray.tt == src.tt:
                trial.commit()
                sol.report = trial.report
                sol.budget = b
                return sol
        if tried >= max_trials:
            break
    raise NoFeasibleMoveError(
        f"no feasible move from {p.line} to {target} by time {t2} ({tried} candidates)",
        (first_k or 0, k or 0), tried, last)


def move_many(diagram: SpacetimeDiagram, particles: Sequence[Particle], targets: Sequence[Line],
              t2: int, budget: ControlBudget, weak: bool = False,
              max_trials: int = DEFAULT_MAX_TRIALS) -> List[MovementSolution]:
    """Move each particle onto its target, keeping the remaining targets protected."""
    if len(particles) != len(targets):
        raise ValueError("one target per particle")
    if len(set(targets)) != len(targets):
        raise PreconditionError("targets must be distinct lines")
    all_targets = frozenset(targets)
    out = []
    for i, (p, target) in enumerate(zip(particles, targets)):
        rest = frozenset(targets[i + 1:])
        b = replace(budget, protected_lines=budget.protected_lines | rest,
                    target_lines=budget.target_lines | all_targets)
        try:
            out.append(move_particle(diagram, p, target, t2, b, weak, max_trials))
        except NoFeasibleMoveError as exc:
            exc.index = i
            raise
    return out


# -- NAND --------------------------------------------------------------------------------

@dataclass
class GadgetSolution:
    kind: str
    params: Tuple[int, ...]
    added: List[Tuple[int, int]]
    collisions: List[Tuple[int, int]]
    finish: int
    report: Optional[ValidationReport] = None
    budget: Optional[ControlBudget] = None


def _levels(count: int, start: int) -> Iterator[Tuple[int, ...]]:
    """Positive integer tuples of length ``count`` by increasing sum."""
    level = start
    while True:
        yield from _compositions(level, count)
        level += 1


def _compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def nand_candidates(b1: int, b2: int, bl: int, t: int, t2: int) -> Iterator[GadgetSolution]:
    """Five-meeting NAND layouts for slope-1 inputs ``b1 < b2`` and target ``bl < b1``.

    Meetings: copy each input onto a fast-left line; slow the first copy
    down; let the second copy catch it, which yields the AND on a fast-right
    line; that particle meets a concrete slow-right particle riding the
    target line, which becomes the NAND.

    With offsets ``a1, a2, a3`` (first copy, second copy, slow-down) the
    meeting times are linear in them, so for each level ``a1 + a2 + a3`` and
    each ``a1`` the admissible ``a3`` form an interval computed directly.
    """
    d, e = b2 - b1, b1 - bl
    span = t2 - t
    # tau5 - t = 3d - e + 9*a2 - 8*a1 + 4*a3; tau5 - tau4 = 2d - e + 6*(a2 - a1) + 3*a3
    start = max(3, (e - 2 * d + 15) // 6)
    for level in range(start, 3 * span + 1):
        for a1 in range(1, level - 1):
            rest = level - a1
            hi = rest - 1
            # tau5 > tau4
            hi = min(hi, _ceil_div(2 * d - e + 6 * (rest - a1), 3) - 1)
            # tau4 > tau3 and tau4 > tau2
            hi = min(hi, _ceil_div(d + 3 * (rest - a1), 3) - 1, d + 2 * (rest - a1) - 1)
            # tau5 <= t2
            lo = max(1, _ceil_div(3 * d - e + 9 * rest - 8 * a1 - span, 5))
            for a3 in range(lo, hi + 1):
                a2 = rest - a3
                sol = _nand_layout(b1, b2, bl, t, t2, a1, a2, a3)
                if sol is not None:
                    yield sol


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _nand_layout(b1, b2, bl, t, t2, a1, a2, a3) -> Optional[GadgetSolution]:
    tau1, tau2 = t + a1, t + a2
    tau3 = tau1 + a3
    x1 = b1 + tau1
    w1 = x1 + 2 * tau1
    x2 = b2 + tau2
    w2 = x2 + 2 * tau2
    x3 = w1 - 2 * tau3
    u3 = x3 + tau3
    tau4 = w2 - u3
    if tau4 <= max(tau3, tau2):
        return None
    x4 = u3 - tau4
    v = x4 - 2 * tau4
    tau5 = bl - v
    if tau5 <= tau4 or tau5 > t2:
        return None
    x5 = bl + tau5
    added = (_partners_at(x1, tau1, PRESERVING_REDIRECT[(1, -2)])
             + _partners_at(x2, tau2, PRESERVING_REDIRECT[(1, -2)])
             + _partners_at(x3, tau3, PRESERVING_REDIRECT[(-2, -1)])
             + _partners_at(x4, tau4, (1,))
             + _partners_at(x5, tau5, (1, -2)))
    return GadgetSolution("nand", (tau1, tau2, tau3, tau4, tau5), added,
                          [(x1, tau1), (x2, tau2), (x3, tau3), (x4, tau4), (x5, tau5)], tau5)


def not_candidates(b1: int, bl: int, t: int, t2: int) -> Iterator[GadgetSolution]:
    """Three-meeting negation: copy to fast-left, reflect to fast-right, meet the target."""
    max_level = 2 * (t2 - t)
    for a1, a3 in _levels(2, 2):
        if a1 + a3 > max_level:
            return
        tau1 = t + a1
        tau3 = tau1 + a3
        x1 = b1 + tau1
        w1 = x1 + 2 * tau1
        x3 = w1 - 2 * tau3
        v = x3 - 2 * tau3
        tau5 = bl - v
        if tau5 <= tau3 or tau5 > t2:
            continue
        x5 = bl + tau5
        added = (_partners_at(x1, tau1, PRESERVING_REDIRECT[(1, -2)])
                 + _partners_at(x3, tau3, CLEAN_REDIRECT[(-2, 2)])
                 + _partners_at(x5, tau5, (1, -2)))
        yield GadgetSolution("not", (tau1, tau3, tau5), added,
                             [(x1, tau1), (x3, tau3), (x5, tau5)], tau5)


def _run_gadget(diagram: SpacetimeDiagram, candidates, inputs: Sequence[Ray], target: Line,
                t2: int, want_tt: int, budget: ControlBudget, max_trials: int,
                what: str) -> GadgetSolution:
    tried = scanned = 0
    last = None
    for sol in candidates:
        scanned += 1
        if scanned > SCAN_FACTOR * max_trials:
            break
        if any(r.end is not None and r.end < sol.collisions[0][1] for r in inputs):
            continue
        if not _seeds_clear(diagram, sol.added, sol.collisions, budget):
            continue
        tried += 1
        trial = diagram.try_add(sol.added, budget)
        last = trial.report
        if trial.ok:
            ray = _new_ray_on(trial, target, t2)
            if ray is not None and ray.tt == want_tt:
                trial.commit()
                sol.report = trial.report
                sol.budget = budget
                return sol
        if tried >= max_trials:
            break
    raise NoFeasibleMoveError(f"no feasible {what} gadget onto {target} by time {t2} "
                              f"({tried} candidates)", (0, tried), tried, last)


def nand_gadget(diagram: SpacetimeDiagram, p1: Particle, p2: Particle, target: Line, t2: int,
                budget: ControlBudget, max_trials: int = DEFAULT_MAX_TRIALS) -> GadgetSolution:
    """Put NAND of two slope-1 particles onto the slope-1 ``target`` by ``t2``; inputs survive."""
    if p1.line.speed != 1 or p2.line.speed != 1 or target.speed != 1:
        raise PreconditionError("the NAND gadget works on slope-1 lines")
    if p1.line == p2.line:
        raise PreconditionError("inputs must be on distinct lines; use not_gadget")
    if p1.line.base > p2.line.base:
        p1, p2 = p2, p1
    if target.base >= p1.line.base:
        raise PreconditionError("target must lie left of both inputs")
    r1 = _source_ray(diagram, p1)
    r2 = _source_ray(diagram, p2)
    if r1.tt & r2.tt == diagram.full:
        raise PreconditionError("the conjunction of the inputs is constant 1")
    _check_target(diagram, target, t2, weak=False)
    t = max(p1.release, p2.release)
    b = replace(budget, max_added_particles=max(budget.max_added_particles, NAND_PARTICLES),
                sources=budget.sources | {p1.line, p2.line},
                target_lines=budget.target_lines | {p1.line, p2.line, target}, deadline=t2)
    want = diagram.full ^ (r1.tt & r2.tt)
    cands = nand_candidates(p1.line.base, p2.line.base, target.base, t, t2)
    return _run_gadget(diagram, cands, (r1, r2), target, t2, want, b, max_trials, "NAND")


def not_gadget(diagram: SpacetimeDiagram, p: Particle, target: Line, t2: int,
               budget: ControlBudget, max_trials: int = DEFAULT_MAX_TRIALS) -> GadgetSolution:
    """Negation, i.e. NAND of a particle with itself."""
    if p.line.speed != 1 or target.speed != 1:
        raise PreconditionError("the NOT gadget works on slope-1 lines")
    if target.base >= p.line.base:
        raise PreconditionError("target must lie left of the input")
    r = _source_ray(diagram, p)
    if r.tt == diagram.full:
        raise PreconditionError("the input is constant 1")
    _check_target(diagram, target, t2, weak=False)
    b = replace(budget, max_added_particles=max(budget.max_added_particles, NAND_PARTICLES),
                sources=budget.sources | {p.line},
                target_lines=budget.target_lines | {p.line, target}, deadline=t2)
    cands = not_candidates(p.line.base, target.base, p.release, t2)
    return _run_gadget(diagram, cands, (r,), target, t2, diagram.full ^ r.tt, b, max_trials, "NOT")


def _run_gates(diagram: SpacetimeDiagram, signals: List[Particle], gates, work_lines: Sequence[Line],
               release: int, window: int, protect, max_trials: int) -> List[Particle]:
    """Apply one gadget per gate; gate ``g`` writes ``work_lines[g]`` within ``window`` steps."""
    signals = list(signals)
    for g, (op, a, b) in enumerate(gates):
        deadline = release + window
        budget = ControlBudget(NAND_PARTICLES, 0, frozenset(protect) | frozenset(work_lines[g + 1:]),
                               frozenset(), deadline, EMPTY_INTERVAL)
        budget = _with_crossing_room(budget, diagram)
        pa = replace(signals[a], release=release)
        try:
            if op == "not" or a == b:
                not_gadget(diagram, pa, work_lines[g], deadline, budget, max_trials)
                label = fm.not_(pa.label)
            else:
                pb = replace(signals[b], release=release)
                nand_gadget(diagram, pa, pb, work_lines[g], deadline, budget, max_trials)
                label = fm.nand(pa.label, pb.label)
        except GadgetError as exc:
            raise GadgetError(f"gate {g}: {exc}") from None
        signals.append(Particle(work_lines[g], label, deadline))
        release = deadline
    return signals


def evaluate_circuit(diagram: SpacetimeDiagram, inputs: Sequence[Particle], netlist,
                     work_lines: Sequence[Line], window: int, budget: ControlBudget,
                     max_trials: int = DEFAULT_MAX_TRIALS) -> List[Particle]:
    """Compute a NAND netlist on slope-1 input particles, one gadget per gate.

    Gate ``g`` is written onto ``work_lines[g]`` within ``window`` steps of the
    previous gate. Returns the particles carrying the netlist outputs.
    """
    from .circuit import netlist_to_formulas
    if len(inputs) != netlist.input_count:
        raise PreconditionError("one input particle per netlist input")
    if len(work_lines) < len(netlist.gates):
        raise PreconditionError("one work line per gate")
    env = [p.label for p in inputs]
    for f in netlist_to_formulas(netlist, env):
        if diagram._tt(f) == 0:
            raise PreconditionError("a netlist output is identically 0")
    gates = []
    m = netlist.input_count

    def index(ref):
        kind, v = ref
        if kind == "in":
            return v
        if kind == "gate":
            return m + v
        raise PreconditionError("constant operands are not supported; simplify the netlist first")

    for _, r1, r2 in netlist.gates:
        a, b = index(r1), index(r2)
        gates.append(("not", a, a) if a == b else ("nand", a, b))
    release = max(p.release for p in inputs)
    signals = _run_gates(diagram, list(inputs), gates, work_lines, release, window,
                         budget.protected_lines, max_trials)
    return [signals[index(ref)] for ref in netlist.outputs]


# -- gate planning -------------------------------------------------------------------------

CONST_ONE = -1


@dataclass
class GatePlan:
    """The physical circuit: which inputs are collected, which gates are built.

    Signals are numbered: ``0 .. len(inputs)-1`` are collected inputs, then
    one per gate. Each gate is ``("nand", a, b)`` or ``("not", a, a)``.
    ``outputs`` pairs a dispersed-output index with a signal or ``CONST_ONE``.
    """
    inputs: List[int]
    gates: List[Tuple[str, int, int]]
    outputs: List[Tuple[int, int]]
    tables: List[int]

    @property
    def signal_count(self) -> int:
        return len(self.inputs) + len(self.gates)


def plan_gates(hprime, kept: Sequence[int], betas: Sequence[Formula],
               variables: Sequence[int]) -> GatePlan:
    """Fold constants and merge equal signals, judged on the actual input labels."""
    full = (1 << (1 << len(variables))) - 1
    beta_tt = [fm.truth_table(b, variables) for b in betas]
    # provisional signals: ("beta", i) or ("gate", op, sa, sb)
    defs: List[tuple] = []
    tts: List[int] = []
    by_tt: Dict[int, int] = {}

    def signal(tt, make):
        if tt in by_tt:
            return by_tt[tt]
        defs.append(make)
        tts.append(tt)
        by_tt[tt] = len(defs) - 1
        return by_tt[tt]

    value: Dict[Tuple[str, int], Tuple[int, Optional[int]]] = {}
    for i, tt in enumerate(beta_tt):
        value[("in", i)] = (tt, None if tt in (0, full) else signal(tt, ("beta", i)))

    def get(ref):
        kind, i = ref
        if kind == "const":
            return (full if i else 0), None
        return value[ref]

    for g, (_, a, b) in enumerate(hprime.gates):
        (ta, sa), (tb, sb) = get(a), get(b)
        out = full ^ (ta & tb)
        if out in (0, full):
            value[("gate", g)] = (out, None)
            continue
        if out in by_tt:
            value[("gate", g)] = (out, by_tt[out])
            continue
        if sa is None or sb is None or sa == sb:
            src = sb if sa is None else sa
            value[("gate", g)] = (out, signal(out, ("not", src, src)))
        else:
            value[("gate", g)] = (out, signal(out, ("nand", sa, sb)))
    outputs = []
    for j, ref in zip(kept, hprime.outputs):
        tt, s = get(ref)
        if tt == 0:
            raise GadgetError(f"output {j} is identically zero but was kept")
        outputs.append((j, CONST_ONE if tt == full else s))
    # keep only what the outputs need
    need = set()
    stack = [s for _, s in outputs if s != CONST_ONE]
    while stack:
        s = stack.pop()
        if s in need:
            continue
        need.add(s)
        if defs[s][0] != "beta":
            stack.extend(defs[s][1:])
    order = [s for s in range(len(defs)) if s in need and defs[s][0] == "beta"]
    order += [s for s in range(len(defs)) if s in need and defs[s][0] != "beta"]
    renum = {s: i for i, s in enumerate(order)}
    inputs = [defs[s][1] for s in order if defs[s][0] == "beta"]
    gates = [(defs[s][0], renum[defs[s][1]], renum[defs[s][2]])
             for s in order if defs[s][0] != "beta"]
    return GatePlan(inputs, gates, [(j, s if s == CONST_ONE else renum[s]) for j, s in outputs],
                    [tts[s] for s in order])


# -- plans ---------------------------------------------------------------------------------

STAGES = ("collection", "computation", "assembly")


@dataclass
class StageRecord:
    """Resource counts after a stage: crossings, occupied lines, protected lines, handled."""
    name: str
    added: int
    m1: int
    m2: int
    m3: int
    m4: int
    new_crossings: int
    new_lines: int

    @property
    def counts(self) -> "ResourceCounts":
        return ResourceCounts(self.m1, self.m2, self.m3, self.m4)


class ResourceCounts(NamedTuple):
    m1: int   # crossings
    m2: int   # occupied lines
    m3: int   # protected lines
    m4: int   # particles handled


@dataclass
class GadgetPlan:
    n: int
    added_particles: List[Tuple[int, int]]
    t_dis: int
    t_coll: int
    t_comp: int
    t_ass: int
    t_final: int
    meta: Dict[str, int] = field(default_factory=dict)
    stages: List[StageRecord] = field(default_factory=list)

    @property
    def stage_times(self) -> Dict[str, int]:
        return {"t_dis": self.t_dis, "t_coll": self.t_coll, "t_comp": self.t_comp,
                "t_ass": self.t_ass, "t_final": self.t_final}

    def gadget(self):
        from .core_ca import from_particles
        return from_particles(self.added_particles)


def diagram_ledger(diagram: SpacetimeDiagram, t_max: int) -> DiagramLedger:
    """Occupied lines, crossings and collisions of ``diagram`` on ``[0, t_max]``."""
    led = DiagramLedger()
    for ray in diagram.rays:
        if ray.t0 <= t_max:
            led.occupied_lines.add(ray.line)
    for (x, t), m in diagram.meetings.items():
        if t <= t_max:
            if m.is_crossing:
                led.crossings.add((x, t))
            if m.is_collision:
                led.collisions.add((x, t))
    led.added_particles = sorted(diagram.added)
    return led


def plan_diagram(plan: GadgetPlan, horizon: Optional[int] = None) -> SpacetimeDiagram:
    """Spacetime diagram of the fully general input together with the plan's gadget."""
    from .logical_ca import LogicalConfiguration, fully_general
    cells = dict(fully_general(plan.n).items())
    for pos, c in plan.gadget().items():
        cells[pos] = tuple(fm.TRUE if c >> k & 1 else fm.FALSE for k in range(4))
    return SpacetimeDiagram.from_configuration(LogicalConfiguration(cells),
                                               list(range(4 * plan.n)), horizon)


def replay_ledger(plan: GadgetPlan) -> DiagramLedger:
    """Rebuild the ledger of a plan from the fully general input and its particles."""
    led = diagram_ledger(plan_diagram(plan, plan.t_ass), plan.t_ass)
    led.added_particles = sorted(plan.added_particles)
    return led


class PlanFormatError(ValueError):
    pass


PLAN_HEADER = "physca-gadget-plan 1"


def dump_plan(plan: GadgetPlan) -> str:
    from .core_ca import serialize
    out = [PLAN_HEADER, f"n {plan.n}"]
    for name, value in plan.stage_times.items():
        out.append(f"{name} {value}")
    for key in sorted(plan.meta):
        out.append(f"meta {key} {plan.meta[key]}")
    for s in plan.stages:
        out.append(f"stage {s.name} added {s.added} m1 {s.m1} m2 {s.m2} m3 {s.m3} m4 {s.m4} "
                   f"new_crossings {s.new_crossings} new_lines {s.new_lines}")
    cells = serialize(plan.gadget())
    out.append(f"particles {len(plan.added_particles)}")
    return "\n".join(out) + "\n" + cells + "end\n"


def load_plan(text: str) -> GadgetPlan:
    from .core_ca import parse
    lines = text.splitlines()
    if not lines or lines[0].strip() != PLAN_HEADER:
        raise PlanFormatError(f"expected header {PLAN_HEADER!r}")
    fields: Dict[str, int] = {}
    meta: Dict[str, int] = {}
    stages: List[StageRecord] = []
    i = 1
    try:
        while i < len(lines) and not lines[i].startswith("particles"):
            parts = lines[i].split()
            i += 1
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "meta":
                meta[parts[1]] = int(parts[2])
            elif parts[0] == "stage":
                kv = dict(zip(parts[2::2], parts[3::2]))
                stages.append(StageRecord(parts[1], *(int(kv[k]) for k in
                              ("added", "m1", "m2", "m3", "m4", "new_crossings", "new_lines"))))
            else:
                fields[parts[0]] = int(parts[1])
        if i >= len(lines):
            raise PlanFormatError("missing particles section")
        count = int(lines[i].split()[1])
        body = []
        i += 1
        while i < len(lines) and lines[i].strip() != "end":
            body.append(lines[i])
            i += 1
        if i >= len(lines):
            raise PlanFormatError("missing end marker")
        gadget = parse("\n".join(body))
        particles = list(gadget.particles())
        if len(particles) != count:
            raise PlanFormatError(f"particle count {len(particles)} does not match header {count}")
        return GadgetPlan(fields["n"], particles, fields["t_dis"], fields["t_coll"],
                          fields["t_comp"], fields["t_ass"], fields["t_final"], meta, stages)
    except (KeyError, IndexError, ValueError) as exc:
        if isinstance(exc, PlanFormatError):
            raise
        raise PlanFormatError(f"malformed plan: {exc}") from None


# -- synthesis -----------------------------------------------------------------------------

class SynthesisError(GadgetError):
    def __init__(self, stage: str, attempts: int, cause: Exception):
        last = getattr(cause, "last", None)
        detail = f"; last check: {last.violation}" if last is not None and last.violation else ""
        super().__init__(f"synthesis failed in the {stage} stage after {attempts} attempt(s): "
                         f"{cause}{detail}")
        self.stage = stage
        self.attempts = attempts
        self.cause = cause
        self.last_report = last


class _StageFailure(Exception):
    def __init__(self, stage, cause):
        super().__init__(str(cause))
        self.stage = stage
        self.cause = cause


@dataclass
class _Setup:
    n: int
    variables: List[int]
    dispersal_in: object
    dispersal_out: object
    hprime: object
    kept: List[int]
    plan: GatePlan
    c_h: int


def prepare(n: int, h) -> _Setup:
    from .circuit import block_inputs, build_effective_circuit
    from .logical_ca import diffuse, reverse_diffuse
    din = diffuse(n)
    dout = reverse_diffuse(n, block_inputs(n))
    hprime, kept = build_effective_circuit(n, h, din, dout)
    variables = list(range(4 * n))
    plan = plan_gates(hprime, kept, [f for _, f in din.particles], variables)
    return _Setup(n, variables, din, dout, hprime, kept, plan, h.gate_count)


def schedule(setup: _Setup, sigma: int) -> Dict[str, int]:
    """Stage times for scale ``sigma``; every window grows linearly with it."""
    n = setup.n
    mu = len(setup.plan.inputs)
    g = len(setup.plan.gates)
    k = len(setup.plan.outputs)
    t_dis = setup.dispersal_in.time
    t_back = setup.dispersal_out.time
    spread = LINE_PITCH * (g + mu + 1)
    t_coll = t_dis + sigma * (4 * (LINE_PITCH * mu + n) + 24)
    window = sigma * (2 * spread + 24)
    t_comp = t_coll + g * window
    # slope -1 debris of the last gate crosses the output window near 2*t_comp - t_coll
    t_ass = (2 * t_comp - t_coll + spread + n + 2 * t_back
             + sigma * (4 * (k + spread) + 32))
    return {"t_dis": t_dis, "t_coll": t_coll, "window": window, "t_comp": t_comp,
            "t_ass": t_ass, "t_final": t_ass + t_back}


def _stage_record(name, diagram, before_added, before_lines, before_crossings, m3, m4):
    crossings = sum(1 for m in diagram.meetings.values() if m.is_crossing)
    return StageRecord(name, len(diagram.added) - before_added, crossings, len(diagram.lines),
                       m3, m4, crossings - before_crossings, len(diagram.lines) - before_lines)


def _crossing_count(diagram):
    return sum(1 for m in diagram.meetings.values() if m.is_crossing)


def build_plan(setup: _Setup, sigma: int, max_trials: int = DEFAULT_MAX_TRIALS) -> GadgetPlan:
    """One synthesis attempt at a fixed scale; raises ``_StageFailure``."""
    from .logical_ca import fully_general
    n = setup.n
    plan = setup.plan
    times = schedule(setup, sigma)
    t_coll, t_comp, t_ass = times["t_coll"], times["t_comp"], times["t_ass"]
    t_back = setup.dispersal_out.time
    window = times["window"]
    diagram = SpacetimeDiagram.from_configuration(fully_general(n), setup.variables,
                                                  reserved=range(n))
    interval = Interval(-2 * t_back, n - 1 + 2 * t_back)
    protect_ass = frozenset(Line(x - s * t_ass, s) for x in interval for s in SPEEDS)
    coll_lines = [Line(LINE_PITCH * c - t_coll, 1) for c in range(len(plan.inputs))]
    work_lines = [Line(-LINE_PITCH * (g + 1) - t_coll, 1) for g in range(len(plan.gates))]
    records: List[StageRecord] = []

    def snapshot():
        return len(diagram.added), len(diagram.lines), _crossing_count(diagram)

    # collection
    before = snapshot()
    sources = []
    for i in plan.inputs:
        pos, label = setup.dispersal_in.particles[i]
        sources.append(Particle(Line(pos.coordinate - pos.speed * pos.time, pos.speed),
                                label, setup.dispersal_in.time))
    protect = protect_ass | frozenset(work_lines)
    budget = ControlBudget(MOVE_PARTICLES, 0, protect, frozenset(), t_coll, EMPTY_INTERVAL)
    try:
        _move_all(diagram, sources, coll_lines, t_coll, budget, False, max_trials)
    except GadgetError as exc:
        raise _StageFailure("collection", exc) from None
    records.append(_stage_record("collection", diagram, *before, len(protect), len(sources)))

    # computation
    before = snapshot()
    signal_lines = coll_lines + work_lines
    inputs = [Particle(coll_lines[c], setup.dispersal_in.particles[i][1], t_coll)
              for c, i in enumerate(plan.inputs)]
    try:
        signals = _run_gates(diagram, inputs, plan.gates, work_lines, t_coll, window,
                             protect_ass, max_trials)
    except GadgetError as exc:
        raise _StageFailure("computation", exc) from None
    labels = {i: p.label for i, p in enumerate(signals)}
    records.append(_stage_record("computation", diagram, *before, len(protect_ass),
                                 len(plan.gates)))

    # assembly
    before = snapshot()
    dout = setup.dispersal_out.particles
    targets = []
    movers = []
    constants = []
    for j, s in plan.outputs:
        pos, _ = dout[j]
        line = Line(pos.coordinate - pos.speed * t_ass, pos.speed)
        if s == CONST_ONE:
            constants.append((line.base, line.speed))
        else:
            movers.append(Particle(signal_lines[s], labels[s], t_comp))
            targets.append(line)
    all_targets = frozenset(Line(p.coordinate - p.speed * t_ass, p.speed)
                            for p, _ in (dout[j] for j, _ in plan.outputs))
    budget = ControlBudget(MOVE_PARTICLES, 0, frozenset(), all_targets, t_ass, interval)
    try:
        if constants:
            b = replace(_with_crossing_room(budget, diagram),
                        max_added_particles=max(MOVE_PARTICLES, len(constants)))
            trial = diagram.try_add(constants, b, weak=True)
            if not trial.ok:
                raise GadgetError(f"constant output particles rejected: {trial.report.violation}")
            trial.commit()
        _move_all(diagram, movers, targets, t_ass, budget, True, max_trials)
    except GadgetError as exc:
        raise _StageFailure("assembly", exc) from None
    records.append(_stage_record("assembly", diagram, *before, 0, len(plan.outputs)))
    _check_assembled(diagram, setup, interval, t_ass)
    led = diagram_ledger(diagram, t_ass)
    meta = {"ledger_lines": len(led.occupied_lines), "ledger_crossings": len(led.crossings),
            "ledger_collisions": len(led.collisions), "C": setup.hprime.gate_count, "C_H": setup.c_h, "m": len(setup.dispersal_in.particles),
            "m_used": len(plan.inputs), "k": len(plan.outputs), "gates": len(plan.gates),
            "t_back": t_back, "sigma": sigma, "window": window}
    return GadgetPlan(n, sorted(diagram.added), times["t_dis"], t_coll, t_comp, t_ass,
                      times["t_final"], meta, records)


def _with_crossing_room(budget: ControlBudget, diagram: SpacetimeDiagram) -> ControlBudget:
    a = budget.max_added_particles
    return replace(budget, max_new_crossings=a * (len(diagram.lines) + a))


def _move_all(diagram, particles, targets, t2, budget, weak, max_trials):
    for i in range(len(particles)):
        rest = frozenset(targets[i + 1:])
        b = _with_crossing_room(replace(budget, protected_lines=budget.protected_lines | rest,
                                        target_lines=budget.target_lines | frozenset(targets)),
                                diagram)
        move_particle(diagram, particles[i], targets[i], t2, b, weak, max_trials)


def _check_assembled(diagram: SpacetimeDiagram, setup: _Setup, interval, t_ass: int):
    """At ``t_ass`` the light cone of the output block holds exactly the dispersed output."""
    from .circuit import block_formulas
    want: Dict[Tuple[int, int], int] = {}
    h_alpha = None
    for j, (pos, delta) in enumerate(setup.dispersal_out.particles):
        if j in setup.kept:
            if h_alpha is None:
                h_alpha = dict(enumerate(setup.h_alpha))
            f = fm.substitute([delta], h_alpha)[0]
            want[(pos.coordinate, pos.speed)] = diagram._tt(f)
    got = {}
    for ray in diagram.rays:
        if ray.alive(t_ass) and ray.at(t_ass) in interval:
            got[(ray.at(t_ass), ray.speed)] = ray.tt
    if got != want:
        raise _StageFailure("assembly", GadgetError(
            f"assembled pattern differs from the dispersed output at time {t_ass}"))


def synthesize(n: int, h, scale: int = 1, max_attempts: int = 6,
               max_trials: int = DEFAULT_MAX_TRIALS) -> GadgetPlan:
    """Compile the block function ``h`` (a netlist on ``4n`` bits) into a verified plan."""
    from .circuit import block_formulas
    if n < 1:
        raise ValueError("n must be positive")
    setup = prepare(n, h)
    setup.h_alpha = block_formulas(h, n)
    last = None
    for attempt in range(max_attempts):
        sigma = scale << attempt
        try:
            plan = build_plan(setup, sigma, max_trials)
        except _StageFailure as exc:
            last = exc
            continue
        plan.meta["attempts"] = attempt + 1
        report = verify_symbolic(plan, h)
        if not report.ok:
            raise SynthesisError("verification", attempt + 1, GadgetError(report.summary()))
        return plan
    raise SynthesisError(last.stage, max_attempts, last.cause)


# -- verification --------------------------------------------------------------------------

@dataclass
class VerificationReport:
    mode: str
    ok: bool
    t_final: int
    particles: int
    checked: int = 0
    failures: List[str] = field(default_factory=list)
    sampled: bool = False
    lines: List[str] = field(default_factory=list)

    def summary(self) -> str:
        head = "PASS" if self.ok else "FAIL"
        extra = " (sampled)" if self.sampled else ""
        text = (f"{head} {self.mode}{extra}: {self.checked - len(self.failures)}/{self.checked} "
                f"checks, t_final {self.t_final}, particles {self.particles}")
        if self.failures:
            text += "; first failure: " + self.failures[0]
        return text


def verify_symbolic(plan: GadgetPlan, h) -> VerificationReport:
    """Run the fully general input with the gadget and compare the block with ``h``."""
    from .circuit import block_formulas
    from .logical_ca import LogicalConfiguration, fully_general
    n = plan.n
    variables = list(range(4 * n))
    cells = dict(fully_general(n).items())
    for x, s in plan.added_particles:
        if 0 <= x < n:
            return VerificationReport("symbolic", False, plan.t_final, len(plan.added_particles),
                                      1, [f"gadget particle inside the block at {x}"])
        cell = list(cells.get(x, (FALSE,) * 4))
        cell[TRACK_OF_SPEED[s]] = TRUE
        cells[x] = tuple(cell)
    x0 = LogicalConfiguration(cells)
    diagram = SpacetimeDiagram.from_configuration(x0, variables, horizon=plan.t_final)
    final = diagram.configuration_at(plan.t_final)
    want = block_formulas(h, n)
    report = VerificationReport("symbolic", True, plan.t_final, len(plan.added_particles))
    for i in range(n):
        for k in range(4):
            report.checked += 1
            got = fm.truth_table(final[i][k], variables)
            exp = fm.truth_table(want[4 * i + k], variables)
            line = f"cell {i} track {SPEEDS[k]:+d}: {'ok' if got == exp else 'MISMATCH'}"
            report.lines.append(line)
            if got != exp:
                report.ok = False
                report.failures.append(line)
    return report


EXHAUSTIVE_CAP = 16


def verify_concrete(plan: GadgetPlan, h, patterns=None, sample: Optional[int] = None,
                    seed: int = 0) -> VerificationReport:
    """Simulate the concrete CA on block patterns and compare with ``h``."""
    import numpy as np
    from .circuit import apply_block
    from .core_ca import run_block_batch
    n = plan.n
    sampled = False
    if patterns is None:
        if 4 * n <= EXHAUSTIVE_CAP and sample is None:
            patterns = np.array(list(np.ndindex(*([16] * n))), dtype=np.int64).reshape(-1, n)
        else:
            rng = np.random.default_rng(seed)
            patterns = rng.integers(0, 16, size=(sample or 64, n))
            sampled = True
    patterns = np.asarray(patterns, dtype=np.int64).reshape(-1, n)
    gadget = plan.gadget()
    for x in range(n):
        if gadget[x]:
            return VerificationReport("concrete", False, plan.t_final, len(plan.added_particles),
                                      1, [f"gadget particle inside the block at {x}"])
    out = run_block_batch(gadget, patterns, plan.t_final, 0, n - 1)
    report = VerificationReport("concrete", True, plan.t_final, len(plan.added_particles),
                                sampled=sampled)
    from .core_ca import format_cell
    for p, got in zip(patterns.tolist(), out.tolist()):
        exp = apply_block(h, p)
        report.checked += 1
        status = "ok" if got == exp else "MISMATCH"
        line = (f"pattern {' '.join(format_cell(c) for c in p)} -> "
                f"{' '.join(format_cell(c) for c in got)} {status}")
        report.lines.append(line)
        if got != exp:
            report.ok = False
            if len(report.failures) < 16:
                bad = next(i for i in range(n) if got[i] != exp[i])
                report.failures.append(f"{line} (cell {bad} expected {format_cell(exp[bad])})")
    return report


def verify_plan(plan: GadgetPlan, n: int, h, mode: str = "both",
                sample: Optional[int] = None) -> List[VerificationReport]:
    if plan.n != n:
        raise ValueError(f"plan is for n={plan.n}, not {n}")
    out = []
    if mode in ("symbolic", "both"):
        out.append(verify_symbolic(plan, h))
    if mode in ("exhaustive", "sample", "concrete", "both"):
        out.append(verify_concrete(plan, h, sample=sample if mode != "sample" else (sample or 64)))
    if not out:
        raise ValueError(f"unknown verification mode {mode!r}")
    return out
