from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from physca import formula as fm
from physca.core_ca import SPEEDS
from physca.geometry import (ControlBudget, Interval, Line, forbidden_positions, integral_intersection,
                             intersect, line_through, validate_controlled)
from physca.logical_ca import SpacetimePosition, from_particles

lines = st.builds(Line, st.integers(-30, 30), st.sampled_from(SPEEDS))


def test_line_through_examples():
    assert line_through(SpacetimePosition(5, 0, 2)) == Line(5, 2)
    assert line_through(SpacetimePosition(5, 1, 2)) == Line(3, 2)


@given(lines, st.integers(-50, 50))
def test_line_through_inverts_position(line, t):
    assert line_through(line.position(t)) == line


def test_intersect_examples():
    assert intersect(Line(0, 2), Line(4, -2)) == (2, 1)
    assert intersect(Line(0, 2), Line(1, 2)) is None
    j, t, k, k2 = 7, 3, 5, 6
    l1 = Line(j - 2 * t - k2, 2)
    l3 = Line(j + 2 * t + 4 * k, -2)
    assert intersect(l1, l3) == (j + 2 * k - Fraction(k2, 2), t + k + Fraction(k2, 4))


@given(lines, lines)
def test_intersect_agrees_with_brute_force(l1, l2):
    brute = [(l1.at(t), t) for t in range(-40, 41) if l1.at(t) == l2.at(t)]
    if l1 == l2:
        return
    got = integral_intersection(l1, l2)
    if got is not None and -40 <= got[1] <= 40:
        assert brute == [got]
    else:
        assert brute == []


def test_forbidden_set_without_targets():
    got = forbidden_positions([], 4, Interval(-1, 1))
    assert got == {SpacetimePosition(i, 4, s) for i in (-1, 0, 1) for s in SPEEDS}
    got = forbidden_positions([Line(0, 1)], 4, Interval(3, 5))
    assert SpacetimePosition(4, 4, 1) not in got and len(got) == 11


def _before():
    return from_particles([(0, 1, fm.var(0)), (20, -2, fm.var(1))])


def test_empty_modification_is_valid():
    x = _before()
    assert validate_controlled(x, x, ControlBudget(0, 0), (0, 30)).ok


def test_crossing_a_protected_line_is_reported():
    x = _before()
    y = from_particles(list(x.particles()) + [(-10, 2, fm.TRUE)])
    rep = validate_controlled(x, y, ControlBudget(1, 10, protected_lines={Line(0, 1)}), (0, 40))
    assert not rep.ok and rep.violation.condition == 4
    assert "condition 4" in rep.to_text()
    assert validate_controlled(x, y, ControlBudget(1, 10), (0, 40)).ok


def test_only_added_concrete_particles_are_accepted():
    x = _before()
    with pytest.raises(ValueError):
        validate_controlled(x, from_particles([(0, 1, fm.var(0))]), ControlBudget(4, 4))


@given(st.integers(-30, 30), st.sampled_from(SPEEDS), st.integers(0, 3), st.integers(0, 3))
def test_validation_is_monotone_in_budget(x0, s, da, db):
    before = _before()
    if (x0, s) in {(p, q) for p, q, _ in before.particles()}:
        return
    after = from_particles(list(before.particles()) + [(x0, s, fm.TRUE)])
    small = ControlBudget(1, 1, protected_lines={Line(0, 1)})
    large = ControlBudget(1 + da, 1 + db)
    if validate_controlled(before, after, small, (0, 40)).ok:
        assert validate_controlled(before, after, large, (0, 40)).ok
