import random

import pytest
from hypothesis import given, strategies as st

from physca import formula as fm
from conftest import formulas, random_formula

a, b, c = fm.var(0), fm.var(1), fm.var(2)


def test_constants_are_unique_nodes():
    assert fm.const(0) is fm.FALSE and fm.const(1) is fm.TRUE
    assert fm.nand(fm.TRUE, fm.TRUE) is fm.FALSE


def test_conditional_examples():
    assert fm.conditional(fm.TRUE, b, c) is b
    assert fm.conditional(fm.FALSE, b, c) is c
    assert fm.conditional(a, b, b) is b


def test_evaluate_examples():
    assert fm.evaluate(fm.nand(fm.TRUE, fm.TRUE), {}) == 0
    assert fm.evaluate(a, {0: 1}) == 1
    assert fm.evaluate(fm.conditional(a, b, c), {0: 0, 1: 1, 2: 0}) == 0
    with pytest.raises(fm.MissingVariableError):
        fm.evaluate(a, {})


def test_equivalent_examples():
    assert fm.equivalent(fm.nand(a, a), fm.not_(a))
    assert fm.equivalent(fm.conditional(a, b, c), fm.or_(fm.and_(a, b), fm.and_(fm.not_(a), c)))
    assert not fm.equivalent(a, b)


def test_is_constant_examples():
    assert fm.is_constant(fm.and_(a, fm.not_(a))) == 0
    assert fm.is_constant(fm.or_(a, fm.not_(a))) == 1
    assert fm.is_constant(a) is None


def test_hash_consing():
    assert fm.nand(a, b) is fm.nand(a, b)
    assert fm.xor(a, fm.var(1)) is fm.xor(a, b)


@given(formulas(3), formulas(3), formulas(3))
def test_conditional_semantics(x, y, z):
    f = fm.conditional(x, y, z)
    for v in range(8):
        val = {i: v >> i & 1 for i in range(3)}
        want = fm.evaluate(y, val) if fm.evaluate(x, val) else fm.evaluate(z, val)
        assert fm.evaluate(f, val) == want


@given(formulas(4), formulas(4), formulas(4))
def test_equivalence_relation(x, y, z):
    assert fm.equivalent(x, x)
    assert fm.equivalent(x, y) == fm.equivalent(y, x)
    if fm.equivalent(x, y) and fm.equivalent(y, z):
        assert fm.equivalent(x, z)


def _unsimplified_tt(phi, rng_vars, memo=None):
    """Truth table by direct recursion on a tree, independent of the library."""
    rows = 1 << len(rng_vars)
    return [fm.evaluate(phi, {v: r >> i & 1 for i, v in enumerate(rng_vars)}) for r in range(rows)]


@given(st.integers(0, 2 ** 32 - 1))
def test_local_simplification_preserves_truth_tables(seed):
    rng = random.Random(seed)
    nv = rng.randint(1, 10)

    def tree(d):
        if d == 0 or rng.random() < 0.2:
            return ("c", rng.randint(0, 1)) if rng.random() < 0.15 else ("v", rng.randrange(nv))
        return ("n", tree(d - 1), tree(d - 1))

    def build(t):
        return fm.const(t[1]) if t[0] == "c" else fm.var(t[1]) if t[0] == "v" else \
            fm.nand(build(t[1]), build(t[2]))

    def ev(t, val):
        if t[0] == "c":
            return t[1]
        if t[0] == "v":
            return val[t[1]]
        return 1 - (ev(t[1], val) & ev(t[2], val))

    t = tree(5)
    phi = build(t)
    for r in range(min(1 << nv, 256)):
        val = {i: (r * 2654435761 >> i) & 1 for i in range(nv)}
        assert fm.evaluate(phi, val) == ev(t, val)


def test_truth_table_and_support():
    f = fm.nand(a, c)
    assert fm.support(f) == frozenset({0, 2})
    assert fm.truth_table(f, [0, 2]) == 0b0111
    assert fm.truth_table(fm.TRUE, []) == 1


@given(formulas(5, 4))
def test_prefix_roundtrip(phi):
    assert fm.equivalent(fm.parse_prefix(fm.to_prefix(phi)), phi)


def test_prefix_format():
    assert fm.to_prefix(fm.nand(a, fm.nand(b, b))) == "(nand v0 (nand v1 v1))"


def test_structure_does_not_depend_on_construction_order():
    import subprocess
    import sys
    code = ("import physca.formula as fm; {pre}"
            "print(fm.to_prefix(fm.nand(fm.var(0), fm.nand(fm.var(5), fm.var(2)))))")
    outs = {subprocess.run([sys.executable, "-c", code.format(pre=pre)], capture_output=True,
                           text=True, check=True).stdout
            for pre in ("", "fm.var(5); fm.var(2); fm.nand(fm.var(2), fm.var(5)); ")}
    assert len(outs) == 1
