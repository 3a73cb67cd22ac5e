import random

import pytest
from hypothesis import given, strategies as st

from physca import formula as fm
from physca.circuit import builtin, parse_netlist
from physca.core_ca import SPEEDS
from physca.gadget_synth import (GadgetPlan, NoFeasibleMoveError, Particle, PreconditionError,
                                 dump_plan, evaluate_circuit, load_plan, move_candidates,
                                 move_many, move_particle, movement_parameters, nand_gadget,
                                 not_gadget, basic_move_particles, replay_ledger, synthesize,
                                 verify_concrete, verify_plan, verify_symbolic)
from physca.geometry import ControlBudget, Line, validate_controlled
from physca.logical_ca import from_particles
from physca.spacetime import SpacetimeDiagram

a0, a1 = fm.var(0), fm.var(1)


def test_movement_parameters_example():
    assert (5, 20) in movement_parameters(0, 0, 0, 40)


@given(st.integers(-20, 20), st.integers(0, 10), st.integers(-30, 30), st.integers(12, 60))
def test_movement_parameter_invariants(j, t, dj, dt):
    j2, t2 = j + dj, t + dt
    if abs(dj) > dt:
        return
    total = j2 - j + 2 * (t2 - t)
    for k, k2 in movement_parameters(j, t, j2, t2):
        assert (k - total) % 3 == 0
        assert max(0, j2 - j - (t2 - t)) <= k and 4 * k < total
        assert 3 * k2 == total - 4 * k and k2 > 0 and k + k2 <= t2 - t


def test_scheduled_collisions_of_the_basic_move():
    j, t, k, k2 = 0, 0, 5, 20
    x = from_particles([(j, 2, a0)] + [(p, s, fm.TRUE) for p, s in basic_move_particles(j, t, k, k2)])
    d = SpacetimeDiagram.from_configuration(x, [0], horizon=60)
    assert sorted(d.collisions()) == [(j + 2 * k, t + k), (j + 2 * k + k2, t + k + k2)]
    assert d.label_at(Line(80, -2).position(40)) is a0
    elementary = [(s.k, s.k2) for s in move_candidates(Line(0, 2), 0, Line(80, -2), 40) if not s.parts]
    assert (5, 20) in elementary


def _random_move(seed):
    rng = random.Random(seed)
    s = rng.choice(SPEEDS)
    label = rng.choice([a0, fm.not_(a0), fm.TRUE])
    before = from_particles([(0, s, label)])
    while True:
        t2 = rng.randint(5, 40)
        x2 = rng.randint(-t2, t2)
        ts = rng.choice(SPEEDS)
        target = Line(x2 - ts * t2, ts)
        if target != Line(0, s):
            break
    for _ in range(8):
        d = SpacetimeDiagram.from_configuration(before, [0])
        try:
            sol = move_particle(d, Particle(Line(0, s), label, 0), target, t2, ControlBudget(16, 64))
            return before, d, sol, target, t2, label
        except NoFeasibleMoveError:
            t2 *= 2
    raise AssertionError("no move found")


@pytest.mark.parametrize("seed", range(6))
def test_moves_validate_and_preserve_labels(seed):
    before, d, sol, target, t2, label = _random_move(seed)
    assert fm.equivalent(d.label_at(target.position(t2)), label)
    after = from_particles(list(before.particles()) + [(x, s, fm.TRUE) for x, s in sol.added])
    assert validate_controlled(before, after, sol.budget).ok
    assert all(len(part.added) == 4 for part in sol.elementary)
    assert len(sol.added) == 4 * len(sol.elementary)


def test_move_many():
    x = from_particles([(0, 1, a0), (4, 1, a1)])
    d = SpacetimeDiagram.from_configuration(x, [0, 1])
    before = len(d.rays)
    assert move_many(d, [], [], 50, ControlBudget(16, 64)) == []
    assert len(d.rays) == before
    ps = [Particle(Line(0, 1), a0, 0), Particle(Line(4, 1), a1, 0)]
    targets = [Line(-40, 1), Line(-44, 1)]
    sols = move_many(d, ps, targets, 200, ControlBudget(16, 200))
    assert len(sols) == 2
    for p, tgt in zip(ps, targets):
        assert d.label_at(tgt.position(200)) is p.label
        assert d.label_at(p.line.position(200)) is p.label


def _nand_setup(b1, b2):
    x = from_particles([(0, 1, b1), (3, 1, b2)])
    d = SpacetimeDiagram.from_configuration(x, [0, 1])
    return d, Particle(Line(0, 1), b1, 0), Particle(Line(3, 1), b2, 0)


def test_nand_gadget_symbolic():
    d, p1, p2 = _nand_setup(a0, a1)
    nand_gadget(d, p1, p2, Line(-4, 1), 200, ControlBudget(32, 500))
    assert fm.equivalent(d.label_at(Line(-4, 1).position(200)), fm.nand(a0, a1))
    assert d.label_at(Line(0, 1).position(200)) is a0
    assert d.label_at(Line(3, 1).position(200)) is a1


def test_nand_of_contradictory_inputs_is_one():
    d, p1, p2 = _nand_setup(a0, fm.not_(a0))
    nand_gadget(d, p1, p2, Line(-4, 1), 200, ControlBudget(32, 500))
    assert d.label_at(Line(-4, 1).position(200)) is fm.TRUE


def test_nand_preconditions():
    d, p1, p2 = _nand_setup(a0, a1)
    with pytest.raises(PreconditionError):
        nand_gadget(d, p1, p2, Line(10, 1), 200, ControlBudget(32, 500))
    with pytest.raises(PreconditionError):
        nand_gadget(d, p1, p1, Line(-4, 1), 200, ControlBudget(32, 500))


def test_not_gadget():
    d, p1, _ = _nand_setup(a0, a1)
    not_gadget(d, p1, Line(-4, 1), 200, ControlBudget(32, 500))
    assert fm.equivalent(d.label_at(Line(-4, 1).position(200)), fm.not_(a0))


def _circuit_setup():
    d = SpacetimeDiagram.from_configuration(from_particles([(0, 1, a0), (4, 1, a1)]), [0, 1])
    return d, [Particle(Line(0, 1), a0, 0), Particle(Line(4, 1), a1, 0)]


def test_evaluate_circuit_xor():
    d, ins = _circuit_setup()
    net = parse_netlist("inputs 2\ngate x = xor in0 in1\noutputs x\n")
    assert net.gate_count == 4
    out = evaluate_circuit(d, ins, net, [Line(-4 * (g + 1), 1) for g in range(4)], 120,
                           ControlBudget(32, 0))
    got = d.label_at(out[0].line.position(out[0].release))
    assert fm.equivalent(got, fm.xor(a0, a1))


def test_evaluate_circuit_single_nand_and_rejections():
    d, ins = _circuit_setup()
    net = parse_netlist("inputs 2\ngate g = nand in0 in1\noutputs g\n")
    out = evaluate_circuit(d, ins, net, [Line(-4, 1)], 200, ControlBudget(32, 0))
    assert fm.equivalent(d.label_at(out[0].line.position(out[0].release)), fm.nand(a0, a1))
    d, ins = _circuit_setup()
    zero = parse_netlist("inputs 2\ngate g = nand in0 in0\ngate z = and g in0\noutputs z\n")
    with pytest.raises(PreconditionError):
        evaluate_circuit(d, ins, zero, [Line(-4 * (g + 1), 1) for g in range(3)], 200,
                         ControlBudget(32, 0))


@pytest.fixture(scope="module")
def identity_plan():
    return synthesize(1, builtin("identity", 1))


def test_identity_plan_verifies(identity_plan):
    h = builtin("identity", 1)
    reports = verify_plan(identity_plan, 1, h)
    assert all(r.ok for r in reports)
    assert reports[1].checked == 16


def test_symbolic_detects_wrong_function(identity_plan):
    assert not verify_symbolic(identity_plan, builtin("reversal", 1)).ok


def test_plan_roundtrip(identity_plan):
    text = dump_plan(identity_plan)
    again = load_plan(text)
    assert dump_plan(again) == text
    assert sorted(again.added_particles) == sorted(identity_plan.added_particles)
    assert again.stages == identity_plan.stages


def test_ledger_replay(identity_plan):
    led = replay_ledger(identity_plan)
    assert len(led.occupied_lines) == identity_plan.meta["ledger_lines"]
    assert len(led.crossings) == identity_plan.meta["ledger_crossings"]
    assert len(led.collisions) == identity_plan.meta["ledger_collisions"]


def test_deleting_a_particle_breaks_the_plan(identity_plan):
    rng = random.Random(3)
    h = builtin("identity", 1)
    for p in rng.sample(identity_plan.added_particles, 4):
        rest = [q for q in identity_plan.added_particles if q != p]
        mutated = GadgetPlan(1, rest, *list(identity_plan.stage_times.values()))
        assert not verify_concrete(mutated, h).ok


def test_zero_plan_has_no_assembly():
    plan = synthesize(1, builtin("zero", 1))
    assert plan.added_particles == [] or all(s.added == 0 for s in plan.stages
                                             if s.name == "assembly")
    assert verify_concrete(plan, builtin("zero", 1)).ok


def test_empty_plan_at_time_zero():
    plan = GadgetPlan(1, [], 0, 0, 0, 0, 0)
    assert all(r.ok for r in verify_plan(plan, 1, builtin("identity", 1)))
