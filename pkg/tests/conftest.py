import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lmpkit.problem import builtin_example


@pytest.fixture(scope="session")
def ex1():
    return builtin_example("ex1", t0=0.0, t1=1.0, ncells=100)


@pytest.fixture(scope="session")
def ex2():
    return builtin_example("ex2", T=1.0, m=0.5, ncells=400)


@pytest.fixture(scope="session")
def ex2_variant():
    return builtin_example("ex2", T=1.0, m=0.5, ncells=400, contact_split=(0.0, 1.0))
