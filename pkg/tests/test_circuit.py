import itertools
import random

import pytest
from hypothesis import given, strategies as st

from physca import formula as fm
from physca.circuit import (Netlist, NetlistSyntaxError, apply_block, build_effective_circuit,
                            builtin, evaluate_netlist, netlist_to_formulas, parse_netlist,
                            serialize_netlist)
from physca.logical_ca import diffuse, reverse_diffuse


def test_parse_single_nand():
    net = parse_netlist("inputs 2\ngate g0 = nand in0 in1\noutputs g0\n")
    assert net.input_count == 2 and net.gate_count == 1
    assert [evaluate_netlist(net, b)[0] for b in itertools.product((0, 1), repeat=2)] == [1, 1, 1, 0]


@pytest.mark.parametrize("text", [
    "inputs 2\ngate g0 = nand in0 in1\noutputs\n",
    "inputs 2\ngate g0 = nand in0 in5\noutputs g0\n",
    "inputs 2\ngate g0 = nand in0 x\noutputs g0\n",
    "inputs 2\ngate g0 = nand in0\noutputs g0\n",
    "gate g0 = nand in0 in1\n",
    "inputs 2\nwire a\n",
    "inputs 1\ngate g = nand in0 in0\ngate g = nand in0 in0\noutputs g\n",
])
def test_parse_errors(text):
    with pytest.raises(NetlistSyntaxError):
        parse_netlist(text)


def test_serialize_canonical():
    text = "# two gates\ninputs 2\ngate a = nand in0 in1  # first\ngate b = not a\noutputs b in1 1\n"
    canon = serialize_netlist(parse_netlist(text))
    assert canon == "inputs 2\ngate a = nand in0 in1\ngate b = nand a a\noutputs b in1 1\n"
    assert serialize_netlist(parse_netlist(canon)) == canon


def test_formula_examples():
    net = parse_netlist("inputs 1\ngate g = nand in0 in0\noutputs g in0\n")
    f, g = netlist_to_formulas(net, [0])
    assert fm.equivalent(f, fm.not_(fm.var(0))) and g is fm.var(0)


def _random_netlist(rng, m, gates):
    lines = [f"inputs {m}"]
    names = [f"in{i}" for i in range(m)]
    for g in range(gates):
        a, b = rng.choice(names), rng.choice(names)
        lines.append(f"gate n{g} = nand {a} {b}")
        names.append(f"n{g}")
    lines.append("outputs " + " ".join(rng.sample(names, 3)))
    return parse_netlist("\n".join(lines))


@given(st.integers(0, 2 ** 32 - 1))
def test_netlist_and_formula_evaluation_agree(seed):
    rng = random.Random(seed)
    net = _random_netlist(rng, 4, 8)
    forms = netlist_to_formulas(net, range(4))
    for bits in itertools.product((0, 1), repeat=4):
        val = dict(enumerate(bits))
        assert evaluate_netlist(net, bits) == [fm.evaluate(f, val) for f in forms]


def test_builtins():
    assert apply_block(builtin("reversal", 1), [0b0011]) == [0b1100]
    assert apply_block(builtin("swap", 2), [3, 9]) == [9, 3]
    assert apply_block(builtin("zero", 1), [15]) == [0]
    assert builtin("nandmix", 1).gate_count == 4


@pytest.mark.parametrize("n, name", [(1, "identity"), (1, "reversal"), (1, "nandmix"),
                                     (2, "identity"), (2, "swap")])
def test_effective_circuit(n, name):
    h = builtin(name, n)
    din = diffuse(n)
    dout = reverse_diffuse(n, [fm.var(i) for i in range(4 * n)])
    net, kept = build_effective_circuit(n, h, din, dout)
    betas = [f for _, f in din.particles]
    deltas = [f for _, f in dout.particles]
    h_alpha = netlist_to_formulas(h, list(range(4 * n)))
    want = fm.substitute([deltas[j] for j in kept], dict(enumerate(h_alpha)))
    for r in range(1 << (4 * n)):
        v = {i: r >> i & 1 for i in range(4 * n)}
        got = evaluate_netlist(net, [fm.evaluate(b, v) for b in betas])
        assert got == [fm.evaluate(w, v) for w in want]


def test_effective_circuit_for_zero_block():
    n = 1
    din = diffuse(n)
    dout = reverse_diffuse(n, [fm.var(i) for i in range(4)])
    net, kept = build_effective_circuit(n, builtin("zero", 1), din, dout)
    assert kept == [] and net.output_count == 0
