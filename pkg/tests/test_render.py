from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from physca import formula as fm
from physca.core_ca import from_particles, parse
from physca.logical_ca import fully_general
from physca.render import (RenderSpec, ascii_marks, marks_concrete, marks_logical, render_ascii,
                           render_svg, svg_marks)
from conftest import configurations

GOLDEN = Path(__file__).parent / "golden"


def test_lone_fast_particle_draws_a_diagonal():
    spec = RenderSpec(0, 5, 0, 10)
    text = render_ascii(marks_concrete(from_particles([(0, 2)]), spec), spec)
    rows = [line[7:] for line in text.splitlines() if not line.startswith("#")]
    assert [row.index(">") for row in rows] == [0, 2, 4, 6, 8, 10]


def test_collision_example_has_one_marker():
    x = parse((GOLDEN / "collision.cfg").read_text())
    spec = RenderSpec(0, 4, -6, 12)
    marks = marks_concrete(x, spec)
    assert list(marks.meetings.values()).count("collision") == 1
    rows = [l[7:] for l in render_ascii(marks, spec).splitlines() if not l.startswith("#")]
    assert "".join(rows).count("#") == 1


def test_svg_golden():
    x = parse((GOLDEN / "collision.cfg").read_text())
    spec = RenderSpec(0, 4, -8, 12, style="svg")
    assert render_svg(marks_concrete(x, spec), spec) == (GOLDEN / "collision.svg").read_text()


@given(configurations(span=10, max_cells=6))
def test_ascii_and_svg_agree(x):
    spec = RenderSpec(0, 6, -20, 20)
    marks = marks_concrete(x, spec)
    counts = {}
    for m in marks.particles:
        counts[(m.x, m.t)] = counts.get((m.x, m.t), 0) + 1
    from_svg = [m for m in svg_marks(render_svg(marks, spec)) if counts[m[:2]] == 1]
    assert ascii_marks(render_ascii(marks, spec), spec) == from_svg
    assert sorted((m.x, m.t, m.speed) for m in marks.particles) == svg_marks(render_svg(marks, spec))


def test_logical_marks_are_dashed_and_deterministic():
    spec = RenderSpec(0, 3, -8, 10, mode="logical", style="svg", show_formulas=True)
    a = render_svg(marks_logical(fully_general(1), spec), spec)
    assert a == render_svg(marks_logical(fully_general(1), spec), spec)
    assert "stroke-dasharray" in a and "v0" in a


def test_render_spec_validation():
    with pytest.raises(ValueError):
        RenderSpec(3, 1, 0, 1)
    with pytest.raises(ValueError):
        RenderSpec(0, 1, 0, 1, style="png")
