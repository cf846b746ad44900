from fractions import Fraction
from pathlib import Path

import pytest

from probreach.model import PropertySpec, Relation, load_model, state_from_bits

DATA = Path(__file__).parent / "data"

# filled by test_acceptance, printed once at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def s(bits: str) -> int:
    return state_from_bits(bits)


@pytest.fixture
def chain4():
    return load_model(DATA / "chain4.dtmc")


@pytest.fixture
def frag3():
    return load_model(DATA / "frag3.dtmc")


def prop_for(model, y, relation=Relation.STRICTLY_LESS):
    return PropertySpec(model.bad, Fraction(y), relation)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
