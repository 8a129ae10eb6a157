import sys
from functools import lru_cache

import numpy as np

from polylift.mesh import generate_mesh
from polylift.scheme import Discretization


@lru_cache(maxsize=None)
def disc(family: str, n: int, k: int, seed: int = 0) -> Discretization:
    """Shared discretizations; tests must not mutate them."""
    return Discretization(generate_mesh(family, n, seed), k)


def monomial(a: int, b: int):
    return lambda p: np.asarray(p)[:, 0] ** a * np.asarray(p)[:, 1] ** b


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[c])
