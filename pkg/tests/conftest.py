from __future__ import annotations

import numpy as np
import pytest

from src.envs.grid import GridMap, grid_labelling, load_map
from src.envs.tasks import load_office_map, office_tasks
from src.mdprm import Mdprm, assemble
from src.rm.dsl import parse_rm
from src.rm.machine import SimpleRewardMachine

GAMMA = 0.9

COFFEE_RM = """\
props: c o d
state: u0 init
state: u1
state: done terminal
state: fail terminal bad
edge: u0 -> u1 if "c & !d" reward 0
edge: u0 -> fail if "d" reward 0
edge: u0 -> u0 otherwise reward 0
edge: u1 -> done if "o & !d" reward 1
edge: u1 -> fail if "d" reward 0
edge: u1 -> u1 otherwise reward 0
"""

# corridor: start, coffee, office in a row with decoration at the far end
CORRIDOR = """\
XXXXXXX
XS.c.oX
X....dX
XXXXXXX
"""


@pytest.fixture(scope="session")
def office_map() -> GridMap:
    return load_office_map()


@pytest.fixture(scope="session")
def office_specs():
    return office_tasks()


@pytest.fixture
def coffee_rm() -> SimpleRewardMachine:
    return parse_rm(COFFEE_RM, name="coffee")


@pytest.fixture
def corridor_map() -> GridMap:
    return load_map(CORRIDOR, ("c", "m", "o", "d", "A", "B", "C", "D"))


@pytest.fixture
def office_mdprms(office_map, office_specs) -> list[Mdprm]:
    labelling = grid_labelling(office_map, "office")
    return [assemble(office_map, spec.rm, labelling, GAMMA, name=spec.name) for spec in office_specs]


@pytest.fixture
def task1(office_mdprms) -> Mdprm:
    return office_mdprms[0]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
