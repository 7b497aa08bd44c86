import numpy as np
import pytest

from mtrisk import AssessmentConfig, Branch, Generator, Load, NetworkCase, bundled_case_path, load_case

FOUR_NODE_INITIAL = (5,)


def random_connected_case(rng: np.random.Generator, n_bus: int = 20, extra: int = 15,
                          parallel: int = 2, with_injections: bool = True) -> NetworkCase:
    """Random spanning tree plus chords (some parallel), random reactances and injections."""
    buses = list(range(1, n_bus + 1))
    order = rng.permutation(buses)
    edges = []
    for k in range(1, n_bus):
        edges.append((int(order[k]), int(order[rng.integers(0, k)])))
    for _ in range(extra):
        u, v = rng.choice(buses, size=2, replace=False)
        edges.append((int(u), int(v)))
    for _ in range(parallel):
        edges.append(edges[int(rng.integers(0, len(edges)))])
    branches = [Branch(i + 1, u, v, float(rng.uniform(0.02, 0.3)), float(rng.uniform(50, 300)),
                       float(rng.uniform(0.001, 0.05))) for i, (u, v) in enumerate(edges)]
    gens, loads = [], []
    if with_injections:
        gen_buses = rng.choice(buses, size=max(2, n_bus // 4), replace=False)
        load_buses = [b for b in buses if b not in set(gen_buses)]
        load_p = rng.uniform(5, 60, size=len(load_buses))
        share = rng.dirichlet(np.ones(len(gen_buses))) * load_p.sum()
        gens = [Generator(int(b), float(p), 0.0, float(p * 1.5 + 10), 5.0) for b, p in zip(gen_buses, share)]
        loads = [Load(int(b), float(p)) for b, p in zip(load_buses, load_p)]
    return NetworkCase(buses=buses, branches=branches, generators=gens, loads=loads)


def line_case(x=(0.1,), rating=100.0, gen=50.0, load=50.0, lam=0.01) -> NetworkCase:
    """Buses 1..n in a chain; generator at bus 1, load at the far end."""
    n = len(x) + 1
    branches = [Branch(k + 1, k + 1, k + 2, xk, rating, lam) for k, xk in enumerate(x)]
    return NetworkCase(buses=list(range(1, n + 1)), branches=branches,
                       generators=[Generator(1, gen, 0.0, max(gen, 200.0), 10.0)],
                       loads=[Load(n, load)])


@pytest.fixture(scope="session")
def four_node():
    return load_case(bundled_case_path("four_node"))


@pytest.fixture(scope="session")
def rts96():
    return load_case(bundled_case_path("rts96"))


@pytest.fixture
def config():
    return AssessmentConfig()


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
