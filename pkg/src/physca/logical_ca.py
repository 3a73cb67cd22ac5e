"""The logical extension of the CA: cells hold four Boolean formulas.

One run of the logical CA stands for every concrete run obtained by
substituting bits for the variables. A track holds a *Boolean particle* when
its formula is not semantically the constant 0; canonical configurations
store semantically-zero tracks as the ``FALSE`` node and drop empty cells.
"""
from __future__ import annotations

from math import ceil
from typing import Dict, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple

from . import formula as fm
from .core_ca import SPEEDS, TRACK_OF_SPEED, Configuration
from .formula import FALSE, TRUE, Formula

LogicalCell = Tuple[Formula, Formula, Formula, Formula]
EMPTY_CELL: LogicalCell = (FALSE, FALSE, FALSE, FALSE)


class SpacetimePosition(NamedTuple):
    coordinate: int
    time: int
    speed: int


class Census(NamedTuple):
    boolean_particles: List[Tuple[SpacetimePosition, Formula]]
    crossings: List[Tuple[int, int]]
    collisions: List[Tuple[int, int]]


class Dispersal(NamedTuple):
    time: int
    particles: List[Tuple[SpacetimePosition, Formula]]


def canonical_track(phi: Formula) -> Formula:
    if phi.op == "const":
        return phi
    value = fm.is_constant(phi)
    if value is None:
        return phi
    return TRUE if value else FALSE


def cell_map(cell: LogicalCell) -> LogicalCell:
    """The logical collision map; an involution, identity on cells with < 3 particles."""
    a, b, c, d = cell
    fast = fm.and_(a, d)
    slow = fm.and_(b, c)
    return (fm.conditional(slow, d, a), fm.conditional(fast, c, b),
            fm.conditional(fast, b, c), fm.conditional(slow, a, d))


def _occupancy(cell: LogicalCell) -> int:
    return sum(1 for f in cell if f is not FALSE)


def _apply_map(cell: LogicalCell) -> LogicalCell:
    if _occupancy(cell) < 3:
        return cell
    return tuple(canonical_track(f) for f in cell_map(cell))


class LogicalConfiguration(Mapping[int, LogicalCell]):
    """Finite-support assignment of formula 4-tuples to coordinates."""

    __slots__ = ("_cells",)

    def __init__(self, cells: Mapping[int, Sequence[Formula]] | Iterable = ()):
        items = cells.items() if isinstance(cells, Mapping) else cells
        store: Dict[int, LogicalCell] = {}
        for x, cell in items:
            cell = tuple(canonical_track(f) for f in cell)
            if len(cell) != 4:
                raise ValueError("a logical cell has four tracks")
            if cell != EMPTY_CELL:
                store[int(x)] = cell
        self._cells = store

    @classmethod
    def _trusted(cls, store):
        obj = cls.__new__(cls)
        obj._cells = store
        return obj

    def __getitem__(self, x: int) -> LogicalCell:
        return self._cells.get(x, EMPTY_CELL)

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self._cells))

    def __len__(self) -> int:
        return len(self._cells)

    def __contains__(self, x) -> bool:
        return x in self._cells

    def __eq__(self, other):
        if isinstance(other, LogicalConfiguration):
            return self._cells == other._cells
        return NotImplemented

    __hash__ = None

    def __repr__(self):
        return f"LogicalConfiguration({len(self._cells)} cells)"

    def particles(self) -> Iterator[Tuple[int, int, Formula]]:
        """Yield ``(coordinate, speed, label)`` for every Boolean particle."""
        for x in self:
            for i, f in enumerate(self._cells[x]):
                if f is not FALSE:
                    yield x, SPEEDS[i], f

    def variables(self) -> frozenset:
        return fm.joint_support(f for cell in self._cells.values() for f in cell)

    def semantically_equal(self, other: "LogicalConfiguration") -> bool:
        keys = set(self._cells) | set(other._cells)
        return all(fm.equivalent(f, g) for x in keys
                   for f, g in zip(self[x], other[x]))


def embed(x: Configuration) -> LogicalConfiguration:
    return LogicalConfiguration._trusted({
        pos: tuple(TRUE if c >> i & 1 else FALSE for i in range(4))
        for pos, c in x.items()})


def from_particles(particles: Iterable[Tuple[int, int, Formula]]) -> LogicalConfiguration:
    store: Dict[int, list] = {}
    for x, s, f in particles:
        cell = store.setdefault(x, [FALSE] * 4)
        i = TRACK_OF_SPEED[s]
        if cell[i] is not FALSE:
            raise ValueError(f"two particles of speed {s} at {x}")
        cell[i] = f
    return LogicalConfiguration(store)


def fully_general(n: int, first_variable: int = 0) -> LogicalConfiguration:
    """Cells ``0..n-1`` hold four distinct variables each."""
    return LogicalConfiguration({
        i: tuple(fm.var(first_variable + 4 * i + k) for k in range(4))
        for i in range(n)})


def logical_step(x: LogicalConfiguration) -> LogicalConfiguration:
    moved: Dict[int, list] = {}
    for pos, cell in x._cells.items():
        for i, f in enumerate(cell):
            if f is not FALSE:
                moved.setdefault(pos + SPEEDS[i], [FALSE] * 4)[i] = f
    out = {}
    for pos, cell in moved.items():
        cell = _apply_map(tuple(cell))
        if cell != EMPTY_CELL:
            out[pos] = cell
    return LogicalConfiguration._trusted(out)


def logical_step_inverse(x: LogicalConfiguration) -> LogicalConfiguration:
    out: Dict[int, list] = {}
    for pos, cell in x._cells.items():
        for i, f in enumerate(_apply_map(cell)):
            if f is not FALSE:
                out.setdefault(pos - SPEEDS[i], [FALSE] * 4)[i] = f
    return LogicalConfiguration._trusted({p: tuple(c) for p, c in out.items()})


def logical_run(x: LogicalConfiguration, t: int) -> LogicalConfiguration:
    if t >= 0:
        for _ in range(t):
            x = logical_step(x)
    else:
        for _ in range(-t):
            x = logical_step_inverse(x)
    return x


def apply_valuation(x: LogicalConfiguration, valuation: Mapping[int, int]) -> Configuration:
    store = {}
    for pos, cell in x._cells.items():
        c = 0
        for i, f in enumerate(cell):
            if fm.evaluate(f, valuation):
                c |= 1 << i
        if c:
            store[pos] = c
    return Configuration._trusted(store)


def _record(x: LogicalConfiguration, t: int, census: Census) -> None:
    for pos in x:
        cell = x[pos]
        k = 0
        for i, f in enumerate(cell):
            if f is not FALSE:
                census.boolean_particles.append((SpacetimePosition(pos, t, SPEEDS[i]), f))
                k += 1
        if k >= 2:
            census.crossings.append((pos, t))
        if k >= 3:
            census.collisions.append((pos, t))


def census(x0: LogicalConfiguration, t_min: int, t_max: int) -> Census:
    """Every Boolean particle, crossing and collision at times ``t_min..t_max``."""
    if t_min > t_max:
        raise ValueError("t_min must not exceed t_max")
    out = Census([], [], [])
    frames = {}
    x = x0
    for t in range(0, t_max + 1):
        if t >= t_min:
            frames[t] = x
        x = logical_step(x)
    x = x0
    for t in range(-1, t_min - 1, -1):
        x = logical_step_inverse(x)
        if t <= t_max:
            frames[t] = x
    if t_min <= 0 <= t_max:
        frames[0] = x0
    for t in sorted(frames):
        _record(frames[t], t, out)
    return out


def is_separated(x: LogicalConfiguration, forward: bool = True) -> bool:
    """True if no two particles of ``x`` can ever share a cell again.

    Going forward that means fast-left < slow-left < slow-right < fast-right
    in space; backward the order is reversed.
    """
    order = (-2, -1, 1, 2) if forward else (2, 1, -1, -2)
    groups: Dict[int, List[int]] = {s: [] for s in order}
    for pos, s, _ in x.particles():
        groups[s].append(pos)
    running = None
    for s in order:
        g = groups[s]
        if not g:
            continue
        if running is not None and min(g) <= running:
            return False
        running = max(g)
    return True


def diffuse(n: int) -> Dispersal:
    """Scatter the fully general ``n``-cell input until no interaction remains."""
    if n < 1:
        raise ValueError("n must be positive")
    x = fully_general(n)
    t = 0
    floor = ceil(n / 2)
    while t < floor or not is_separated(x, forward=True):
        x = logical_step(x)
        t += 1
    return Dispersal(t, [(SpacetimePosition(pos, t, s), f) for pos, s, f in x.particles()])


def reverse_diffuse(n: int, output_labels: Sequence[Formula]) -> Dispersal:
    """Run the desired final block backward until it is scattered.

    Positions in the result carry times relative to the final time, so they
    are all ``-t_back``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if len(output_labels) != 4 * n:
        raise ValueError(f"expected {4 * n} output labels, got {len(output_labels)}")
    x = LogicalConfiguration({i: output_labels[4 * i:4 * i + 4] for i in range(n)})
    t = 0
    while not is_separated(x, forward=False):
        x = logical_step_inverse(x)
        t += 1
    return Dispersal(t, [(SpacetimePosition(pos, -t, s), f) for pos, s, f in x.particles()])


def dump(x: LogicalConfiguration) -> str:
    return "".join(f"{pos} {s} {fm.to_prefix(f)}\n" for pos, s, f in x.particles())


def load(text: str) -> LogicalConfiguration:
    items = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        pos, s, rest = line.split(None, 2)
        if int(s) not in TRACK_OF_SPEED:
            raise ValueError(f"line {lineno}: bad speed {s}")
        items.append((int(pos), int(s), fm.parse_prefix(rest)))
    return from_particles(items)
