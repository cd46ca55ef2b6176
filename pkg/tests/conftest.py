import random

import pytest

from htkoop.constructions import random_element, random_tree_pair
from htkoop.nadic import GroupParams

ACCEPTANCE_LINES: list[str] = []

PARAMS = [GroupParams(2, 1), GroupParams(2, 2), GroupParams(3, 1), GroupParams(3, 2)]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return random.Random(20240611)


def random_F(params, seed, length=2):
    return random_element(params, random.Random(seed), length=length)


def random_G(params, seed):
    return random_tree_pair(params, random.Random(seed), expansions=3, permute=True)
