import random

import pytest
from hypothesis import settings, strategies as st

from physca import formula as fm
from physca.core_ca import SPEEDS, Configuration

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

cells = st.integers(0, 15)


@st.composite
def configurations(draw, span=24, max_cells=12):
    coords = draw(st.lists(st.integers(-span, span), max_size=max_cells, unique=True))
    return Configuration({x: draw(cells) for x in coords})


def random_formula(rng: random.Random, nvars: int, depth: int = 3):
    if depth == 0 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.1:
            return fm.const(rng.randint(0, 1))
        return fm.var(rng.randrange(nvars))
    return fm.nand(random_formula(rng, nvars, depth - 1), random_formula(rng, nvars, depth - 1))


@st.composite
def formulas(draw, nvars=4, depth=3):
    seed = draw(st.integers(0, 2 ** 32 - 1))
    return random_formula(random.Random(seed), nvars, depth)


@pytest.fixture
def rng():
    return random.Random(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)
