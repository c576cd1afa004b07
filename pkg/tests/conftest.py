import numpy as np
import pytest

from quiverlearn.quiver import Quiver


def random_quiver(rng, max_vertices=5, max_dim=4, n_at_least_d=True, arrow_prob=0.5):
    """Random acyclic quiver: arrows only go from lower to higher ids."""
    k = int(rng.integers(1, max_vertices + 1))
    vertices = []
    for i in range(1, k + 1):
        d = int(rng.integers(1, max_dim + 1))
        lo = d if n_at_least_d else 0
        n = int(rng.integers(lo, max_dim + 1)) if lo <= max_dim else d
        vertices.append((i, max(n, lo), d))
    arrows = []
    for i in range(1, k + 1):
        for j in range(i + 1, k + 1):
            if rng.random() < arrow_prob:
                arrows.append((len(arrows) + 1, i, j))
    return Quiver.build(vertices, arrows)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one summary line per acceptance criterion."""
    lines = request.config.stash[ACCEPTANCE_KEY]

    def record(number, title, passed, detail, seconds, limit):
        in_time = seconds < limit
        ok = passed and in_time
        lines.append((number, f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}; "
                              f"{seconds:.2f} s (limit {limit:g} s)"))
        print(lines[-1][1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
