"""NAND netlists: text format, evaluation, and the effective circuit H'.

Text format, one statement per line, ``#`` starts a comment::

    inputs 2
    gate g0 = nand in0 in1
    outputs g0 in1

References are ``in<i>``, a previously defined gate name, or the constants
``0`` and ``1``. ``not``, ``and``, ``or`` and ``xor`` are accepted as sugar
and expand to 1, 2, 3 and 4 NAND gates; the helper gates are named
``<name>.0``, ``<name>.1``, ... and the last one carries ``<name>`` itself.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple, Union

from . import formula as fm
from .core_ca import TRACK_OF_SPEED
from .formula import Formula
from .logical_ca import Dispersal, LogicalConfiguration, logical_run

Ref = Tuple[str, int]  # ("in", i) | ("gate", index) | ("const", bit)


class NetlistError(ValueError):
    pass


class NetlistSyntaxError(NetlistError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class InconsistencyError(RuntimeError):
    pass


@dataclass(frozen=True)
class Netlist:
    input_count: int
    gates: Tuple[Tuple[str, Ref, Ref], ...]
    outputs: Tuple[Ref, ...]

    def __post_init__(self):
        for g, (_, a, b) in enumerate(self.gates):
            for ref in (a, b):
                self._check(ref, g)
        for ref in self.outputs:
            self._check(ref, len(self.gates))

    def _check(self, ref: Ref, limit: int):
        kind, i = ref
        if kind == "in" and not 0 <= i < self.input_count:
            raise NetlistError(f"input reference in{i} out of range")
        if kind == "gate" and not 0 <= i < limit:
            raise NetlistError(f"gate reference {i} is not an earlier gate")
        if kind == "const" and i not in (0, 1):
            raise NetlistError(f"bad constant {i}")
        if kind not in ("in", "gate", "const"):
            raise NetlistError(f"bad reference kind {kind}")

    @property
    def gate_count(self) -> int:
        return len(self.gates)

    @property
    def output_count(self) -> int:
        return len(self.outputs)


_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")
_SUGAR_ARITY = {"nand": 2, "not": 1, "and": 2, "or": 2, "xor": 2}


def parse_netlist(text: str) -> Netlist:
    inputs = None
    gates: List[Tuple[str, Ref, Ref]] = []
    names: Dict[str, int] = {}
    outputs = None

    def ref(tok: str, lineno: int) -> Ref:
        if tok in ("0", "1"):
            return ("const", int(tok))
        if tok.startswith("in") and tok[2:].isdigit():
            i = int(tok[2:])
            if i >= inputs:
                raise NetlistSyntaxError(lineno, f"input {tok} out of range (inputs {inputs})")
            return ("in", i)
        if tok in names:
            return ("gate", names[tok])
        raise NetlistSyntaxError(lineno, f"reference to undefined name {tok!r}")

    def emit(name: str, a: Ref, b: Ref) -> Ref:
        gates.append((name, a, b))
        return ("gate", len(gates) - 1)

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        head = parts[0]
        if head == "inputs":
            if inputs is not None:
                raise NetlistSyntaxError(lineno, "duplicate inputs statement")
            if len(parts) != 2 or not parts[1].isdigit():
                raise NetlistSyntaxError(lineno, "expected 'inputs <count>'")
            inputs = int(parts[1])
        elif head == "gate":
            if inputs is None:
                raise NetlistSyntaxError(lineno, "gate before inputs statement")
            if outputs is not None:
                raise NetlistSyntaxError(lineno, "gate after outputs statement")
            if len(parts) < 4 or parts[2] != "=":
                raise NetlistSyntaxError(lineno, "expected 'gate <name> = <op> <ref>...'")
            name, op, args = parts[1], parts[3], parts[4:]
            if not _NAME.match(name) or re.match(r"^in\d+$", name):
                raise NetlistSyntaxError(lineno, f"bad gate name {name!r}")
            if name in names:
                raise NetlistSyntaxError(lineno, f"duplicate gate name {name!r}")
            if op not in _SUGAR_ARITY:
                raise NetlistSyntaxError(lineno, f"unknown operator {op!r}")
            if len(args) != _SUGAR_ARITY[op]:
                raise NetlistSyntaxError(lineno, f"{op} takes {_SUGAR_ARITY[op]} operands, got {len(args)}")
            rs = [ref(a, lineno) for a in args]
            if op == "nand":
                out = emit(name, rs[0], rs[1])
            elif op == "not":
                out = emit(name, rs[0], rs[0])
            elif op == "and":
                t = emit(f"{name}.0", rs[0], rs[1])
                out = emit(name, t, t)
            elif op == "or":
                na = emit(f"{name}.0", rs[0], rs[0])
                nb = emit(f"{name}.1", rs[1], rs[1])
                out = emit(name, na, nb)
            else:
                m = emit(f"{name}.0", rs[0], rs[1])
                u = emit(f"{name}.1", rs[0], m)
                v = emit(f"{name}.2", rs[1], m)
                out = emit(name, u, v)
            names[name] = out[1]
            for k in range(len(gates)):
                names.setdefault(gates[k][0], k)
        elif head == "outputs":
            if inputs is None:
                raise NetlistSyntaxError(lineno, "outputs before inputs statement")
            if outputs is not None:
                raise NetlistSyntaxError(lineno, "duplicate outputs statement")
            if len(parts) < 2:
                raise NetlistSyntaxError(lineno, "outputs list is empty")
            outputs = [ref(tok, lineno) for tok in parts[1:]]
        else:
            raise NetlistSyntaxError(lineno, f"unknown statement {head!r}")
    if inputs is None:
        raise NetlistSyntaxError(0, "missing inputs statement")
    if outputs is None:
        raise NetlistSyntaxError(0, "missing outputs statement")
    return Netlist(inputs, tuple(gates), tuple(outputs))


def _ref_text(net: Netlist, r: Ref) -> str:
    kind, i = r
    if kind == "in":
        return f"in{i}"
    if kind == "const":
        return str(i)
    return net.gates[i][0]


def serialize_netlist(net: Netlist) -> str:
    lines = [f"inputs {net.input_count}"]
    for name, a, b in net.gates:
        lines.append(f"gate {name} = nand {_ref_text(net, a)} {_ref_text(net, b)}")
    lines.append("outputs " + " ".join(_ref_text(net, r) for r in net.outputs))
    return "\n".join(lines) + "\n"


def evaluate_netlist(net: Netlist, bits: Sequence[int]) -> List[int]:
    if len(bits) != net.input_count:
        raise NetlistError(f"expected {net.input_count} input bits, got {len(bits)}")
    values: List[int] = []

    def get(r: Ref) -> int:
        kind, i = r
        if kind == "in":
            return 1 if bits[i] else 0
        if kind == "const":
            return i
        return values[i]

    for _, a, b in net.gates:
        values.append(1 - (get(a) & get(b)))
    return [get(r) for r in net.outputs]


def netlist_to_formulas(net: Netlist, variables: Sequence[Union[int, Formula]]) -> List[Formula]:
    """One formula per output; inputs are variables or arbitrary formulas."""
    if len(variables) != net.input_count:
        raise NetlistError(f"expected {net.input_count} inputs, got {len(variables)}")
    ins = [v if isinstance(v, Formula) else fm.var(v) for v in variables]
    values: List[Formula] = []

    def get(r: Ref) -> Formula:
        kind, i = r
        if kind == "in":
            return ins[i]
        if kind == "const":
            return fm.const(i)
        return values[i]

    for _, a, b in net.gates:
        values.append(fm.nand(get(a), get(b)))
    return [get(r) for r in net.outputs]


def formulas_to_netlist(formulas: Sequence[Formula], variables: Sequence[int]) -> Netlist:
    """Each distinct NAND node becomes one gate; ``variables[i]`` becomes ``in<i>``."""
    position = {v: i for i, v in enumerate(variables)}
    refs: Dict[int, Ref] = {}
    gates: List[Tuple[str, Ref, Ref]] = []
    for node in fm._postorder(formulas):
        if node.op == "const":
            refs[node.uid] = ("const", node.a)
        elif node.op == "var":
            if node.a not in position:
                raise NetlistError(f"variable v{node.a} is not an input")
            refs[node.uid] = ("in", position[node.a])
        else:
            gates.append((f"g{len(gates)}", refs[node.a.uid], refs[node.b.uid]))
            refs[node.uid] = ("gate", len(gates) - 1)
    return Netlist(len(variables), tuple(gates), tuple(refs[f.uid] for f in formulas))


# -- block functions ---------------------------------------------------------------------

def block_inputs(n: int) -> List[Formula]:
    """The fully general variables: cell ``i`` track ``k`` is ``v(4i+k)``."""
    return [fm.var(i) for i in range(4 * n)]


def block_formulas(net: Netlist, n: int) -> List[Formula]:
    if net.input_count != 4 * n or net.output_count != 4 * n:
        raise NetlistError(f"a block function on {n} cells needs {4 * n} inputs and outputs")
    return netlist_to_formulas(net, list(range(4 * n)))


def apply_block(net: Netlist, cells: Sequence[int]) -> List[int]:
    """Evaluate a block function on concrete cell values."""
    bits = [(c >> k) & 1 for c in cells for k in range(4)]
    out = evaluate_netlist(net, bits)
    return [sum(out[4 * i + k] << k for k in range(4)) for i in range(len(cells))]


def _permutation(n: int, perm: Sequence[int]) -> Netlist:
    return Netlist(4 * n, (), tuple(("in", p) for p in perm))


def builtin(name: str, n: int) -> Netlist:
    """Named test functions: identity, zero, reversal, nandmix (n=1), swap (n=2)."""
    if n < 1:
        raise NetlistError("n must be positive")
    if name == "identity":
        return _permutation(n, range(4 * n))
    if name == "zero":
        return Netlist(4 * n, (), tuple(("const", 0) for _ in range(4 * n)))
    if name == "reversal":
        return _permutation(n, [4 * i + 3 - k for i in range(n) for k in range(4)])
    if name == "swap":
        if n != 2:
            raise NetlistError("swap is defined for n = 2")
        return _permutation(2, [4, 5, 6, 7, 0, 1, 2, 3])
    if name == "nandmix":
        if n != 1:
            raise NetlistError("nandmix is defined for n = 1")
        return parse_netlist(NANDMIX_TEXT)
    raise NetlistError(f"unknown builtin {name!r}")


BUILTINS = ("identity", "zero", "reversal", "nandmix", "swap")

NANDMIX_TEXT = """\
inputs 4
gate a = nand in0 in1
gate b = nand in2 in3
gate c = nand a b
gate d = nand in0 in3
outputs c d in1 a
"""


# -- effective circuit ---------------------------------------------------------------------

def build_effective_circuit(n: int, h: Netlist, dispersed_in: Dispersal,
                            dispersed_out: Dispersal) -> Tuple[Netlist, List[int]]:
    """The circuit H' from the dispersed input labels to the nonzero dispersed output labels.

    The input labels are renamed to fresh variables and the dispersed
    configuration is run backward to time 0, which expresses every input
    variable as a circuit in the labels. That circuit feeds ``h``, whose
    outputs are substituted into the output labels. Returns the netlist and
    the indices of the output particles that are not identically zero.
    """
    betas = [f for _, f in dispersed_in.particles]
    m = len(betas)
    cells: Dict[int, list] = {}
    for i, (pos, _) in enumerate(dispersed_in.particles):
        cells.setdefault(pos.coordinate, [fm.FALSE] * 4)[TRACK_OF_SPEED[pos.speed]] = fm.var(i)
    fresh = LogicalConfiguration(cells)
    back = logical_run(fresh, -dispersed_in.time)
    alpha_of_y = [back[i][k] for i in range(n) for k in range(4)]
    # replay guard: substituting y := beta must give back the input variables
    beta_map = dict(enumerate(betas))
    check = fm.substitute(alpha_of_y, beta_map)
    for idx, f in enumerate(check):
        if not fm.equivalent(f, fm.var(idx)):
            raise InconsistencyError(f"replayed diffusion does not recover input variable {idx}")
    for x in back:
        if not 0 <= x < n:
            raise InconsistencyError(f"replayed diffusion leaves a particle at {x}")
    h_of_y = netlist_to_formulas(h, alpha_of_y)
    h_of_alpha = block_formulas(h, n)
    deltas = [f for _, f in dispersed_out.particles]
    omega = dict(enumerate(h_of_y))
    delta_y = fm.substitute(deltas, omega)
    delta_alpha = fm.substitute(deltas, dict(enumerate(h_of_alpha)))
    kept = [j for j, f in enumerate(delta_alpha) if fm.is_constant(f) != 0]
    net = formulas_to_netlist([delta_y[j] for j in kept], list(range(m)))
    return net, kept
