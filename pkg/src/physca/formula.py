"""Boolean formulas over numbered variables, stored as a hash-consed NAND DAG.

Every node is unique: building the same expression twice returns the same
object, so identity comparison is structural comparison. Semantic questions
(equivalence, constancy) are answered with exhaustive truth tables packed
into Python integers.
"""
from __future__ import annotations

from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

DEFAULT_CAP = 24


class FormulaError(Exception):
    pass


class MissingVariableError(FormulaError, KeyError):
    pass


class SupportTooLargeError(FormulaError):
    pass


class Formula:
    """A node of the shared DAG. Do not instantiate directly."""

    __slots__ = ("op", "a", "b", "uid", "skey", "_tt", "_support", "__weakref__")

    def __init__(self, op, a, b, uid):
        self.op = op
        self.a = a
        self.b = b
        self.uid = uid
        # structural key, independent of construction order (int tuple hashes are not salted)
        if op == "nand":
            self.skey = hash((2, a.skey, b.skey))
        else:
            self.skey = hash((0 if op == "const" else 1, a))
        self._tt = {}
        self._support = None

    def __repr__(self):
        return f"Formula({to_prefix(self)})"

    def __str__(self):
        return to_prefix(self)

    # nodes are interned, identity is equality
    def __eq__(self, other):
        return self is other

    def __hash__(self):
        return self.uid

    def __reduce__(self):
        return (_rebuild, (to_prefix(self),))

    @property
    def is_const(self) -> bool:
        return self.op == "const"

    @property
    def is_var(self) -> bool:
        return self.op == "var"

    def __invert__(self):
        return not_(self)

    def __and__(self, other):
        return and_(self, other)

    def __or__(self, other):
        return or_(self, other)

    def __xor__(self, other):
        return xor(self, other)


_store: Dict[tuple, Formula] = {}
_uids = iter(range(1 << 62))


def _intern(key, op, a, b) -> Formula:
    node = _store.get(key)
    if node is None:
        # setdefault keeps concurrent construction linearizable under the GIL
        node = _store.setdefault(key, Formula(op, a, b, next(_uids)))
    return node


FALSE = _intern(("c", 0), "const", 0, None)
TRUE = _intern(("c", 1), "const", 1, None)


def const(bit) -> Formula:
    return TRUE if bit else FALSE


def var(index: int) -> Formula:
    if index < 0:
        raise ValueError(f"variable index must be non-negative, got {index}")
    return _intern(("v", index), "var", int(index), None)


def is_negation(x: Formula) -> bool:
    return x.op == "nand" and x.a is x.b


def nand(x: Formula, y: Formula) -> Formula:
    """NAND with eager local simplification."""
    if x is FALSE or y is FALSE:
        return TRUE
    if x is TRUE:
        x = y
    elif y is TRUE:
        y = x
    if x is y:
        if x is TRUE:
            return FALSE
        if is_negation(x):
            return x.a
    elif (is_negation(y) and y.a is x) or (is_negation(x) and x.a is y):
        return TRUE
    if (x.skey, x.uid) > (y.skey, y.uid):
        x, y = y, x
    return _intern(("n", x.uid, y.uid), "nand", x, y)


def not_(x: Formula) -> Formula:
    return nand(x, x)


def and_(x: Formula, y: Formula) -> Formula:
    return not_(nand(x, y))


def or_(x: Formula, y: Formula) -> Formula:
    return nand(not_(x), not_(y))


def xor(x: Formula, y: Formula) -> Formula:
    m = nand(x, y)
    return nand(nand(x, m), nand(y, m))


def conditional(a: Formula, b: Formula, c: Formula) -> Formula:
    """``a ? b : c``, i.e. ``c xor (a and (c xor b))``."""
    if a is TRUE or b is c:
        return b
    if a is FALSE:
        return c
    if b is TRUE and c is FALSE:
        return a
    if b is FALSE and c is TRUE:
        return not_(a)
    return nand(nand(a, b), nand(not_(a), c))


# -- traversal -----------------------------------------------------------------

def _postorder(roots: Iterable[Formula]) -> List[Formula]:
    seen = set()
    order = []
    for root in roots:
        if root.uid in seen:
            continue
        stack = [(root, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if node.uid in seen:
                continue
            seen.add(node.uid)
            stack.append((node, True))
            if node.op == "nand":
                if node.b.uid not in seen:
                    stack.append((node.b, False))
                if node.a.uid not in seen:
                    stack.append((node.a, False))
    return order


def support(phi: Formula) -> frozenset:
    if phi._support is None:
        for node in _postorder([phi]):
            if node._support is not None:
                continue
            if node.op == "var":
                node._support = frozenset((node.a,))
            elif node.op == "const":
                node._support = frozenset()
            else:
                node._support = node.a._support | node.b._support
    return phi._support


def joint_support(formulas: Iterable[Formula]) -> frozenset:
    out = frozenset()
    for f in formulas:
        out = out | support(f)
    return out


def node_count(formulas: Iterable[Formula]) -> int:
    """Number of distinct NAND nodes reachable from ``formulas``."""
    return sum(1 for n in _postorder(formulas) if n.op == "nand")


def evaluate(phi: Formula, valuation: Mapping[int, int]) -> int:
    values: Dict[int, int] = {}
    for node in _postorder([phi]):
        if node.op == "const":
            values[node.uid] = node.a
        elif node.op == "var":
            try:
                values[node.uid] = 1 if valuation[node.a] else 0
            except KeyError:
                raise MissingVariableError(node.a) from None
        else:
            values[node.uid] = 1 - (values[node.a.uid] & values[node.b.uid])
    return values[phi.uid]


# -- truth tables ----------------------------------------------------------------

_var_masks: Dict[Tuple[int, int], int] = {}


def _var_mask(position: int, width: int) -> int:
    key = (position, width)
    mask = _var_masks.get(key)
    if mask is None:
        # bit k of the table is the value under assignment k; variable at
        # `position` is bit `position` of k
        block = (1 << (1 << position)) - 1
        period = 1 << (position + 1)
        mask = block << (1 << position)
        length = period
        while length < (1 << width):
            mask |= mask << length
            length <<= 1
        _var_masks[key] = mask
    return mask


def truth_table(phi: Formula, variables: Sequence[int]) -> int:
    """Truth table of ``phi`` over ``variables`` as a ``2**len(variables)``-bit int.

    Bit ``k`` holds the value under the assignment where variable
    ``variables[i]`` takes bit ``i`` of ``k``.
    """
    key = tuple(variables)
    cached = phi._tt.get(key)
    if cached is not None:
        return cached
    width = len(key)
    full = (1 << (1 << width)) - 1
    position = {v: i for i, v in enumerate(key)}
    for node in _postorder([phi]):
        if key in node._tt:
            continue
        if node.op == "const":
            t = full if node.a else 0
        elif node.op == "var":
            if node.a not in position:
                raise MissingVariableError(node.a)
            t = _var_mask(position[node.a], width)
        else:
            t = full ^ (node.a._tt[key] & node.b._tt[key])
        node._tt[key] = t
    return phi._tt[key]


def _checked_support(formulas, cap):
    sup = sorted(joint_support(formulas))
    if len(sup) > cap:
        raise SupportTooLargeError(
            f"joint support has {len(sup)} variables, cap is {cap}")
    return sup


def equivalent(phi: Formula, psi: Formula, cap: int = DEFAULT_CAP) -> bool:
    if phi is psi:
        return True
    sup = _checked_support((phi, psi), cap)
    return truth_table(phi, sup) == truth_table(psi, sup)


def is_constant(phi: Formula, cap: int = DEFAULT_CAP) -> Optional[int]:
    if phi.op == "const":
        return phi.a
    sup = _checked_support((phi,), cap)
    t = truth_table(phi, sup)
    if t == 0:
        return 0
    if t == (1 << (1 << len(sup))) - 1:
        return 1
    return None


def substitute(formulas: Sequence[Formula], mapping: Mapping[int, Formula]) -> List[Formula]:
    """Replace variables by formulas; unmapped variables stay as they are."""
    image: Dict[int, Formula] = {}
    for node in _postorder(formulas):
        if node.op == "const":
            image[node.uid] = node
        elif node.op == "var":
            image[node.uid] = mapping.get(node.a, node)
        else:
            image[node.uid] = nand(image[node.a.uid], image[node.b.uid])
    return [image[f.uid] for f in formulas]


# -- text form -----------------------------------------------------------------

def to_prefix(phi: Formula) -> str:
    text: Dict[int, str] = {}
    for node in _postorder([phi]):
        if node.op == "const":
            text[node.uid] = str(node.a)
        elif node.op == "var":
            text[node.uid] = f"v{node.a}"
        else:
            text[node.uid] = f"(nand {text[node.a.uid]} {text[node.b.uid]})"
    return text[phi.uid]


def parse_prefix(text: str) -> Formula:
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    if not tokens:
        raise FormulaError("empty formula")
    stack: List[list] = []
    result = None
    for tok in tokens:
        if result is not None:
            raise FormulaError(f"trailing input after formula: {text!r}")
        if tok == "(":
            stack.append([])
            continue
        if tok == ")":
            if not stack:
                raise FormulaError("unbalanced ')'")
            items = stack.pop()
            if len(items) != 3 or items[0] != "nand":
                raise FormulaError(f"expected (nand x y), got {items!r}")
            node = nand(items[1], items[2])
        elif tok in ("0", "1"):
            node = const(int(tok))
        elif tok == "nand":
            node = tok
        elif tok.startswith("v") and tok[1:].isdigit():
            node = var(int(tok[1:]))
        else:
            raise FormulaError(f"bad token {tok!r}")
        if stack:
            stack[-1].append(node)
        elif isinstance(node, Formula):
            result = node
        else:
            raise FormulaError(f"unexpected {tok!r}")
    if stack or result is None:
        raise FormulaError("unbalanced '('")
    return result


def _rebuild(text):
    return parse_prefix(text)
