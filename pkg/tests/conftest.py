import numpy as np
import pytest

from olc_sim.costs import QuadraticCost
from olc_sim.network import Bus, Line, build_network


def quad_bus(bid, kind, D=1.0, P_m=0.0, M=None, alpha=1.0, lo=-10.0, hi=10.0):
    if kind == "generator" and M is None:
        M = 1.0
    return Bus(bid, kind, D, QuadraticCost(alpha, lo, hi), P_m, M)


def make_n1(lo=-10.0, hi=10.0, P_m=1.0):
    buses = [
        quad_bus(1, "generator", P_m=P_m, lo=lo, hi=hi),
        quad_bus(2, "load", lo=lo, hi=hi),
    ]
    return build_network(buses, [Line(1, 2, B=6.0)])


def make_ring3(M=0.5):
    buses = [
        quad_bus(1, "generator", P_m=1.0, M=M),
        quad_bus(2, "generator", P_m=0.0, M=M),
        quad_bus(3, "load", P_m=0.5),
    ]
    lines = [Line(1, 2, B=6.0), Line(2, 3, B=6.0), Line(1, 3, B=6.0)]
    return build_network(buses, lines)


def random_network(rng, n_bus, extra_edges=0, clip_fraction=0.5):
    """Random connected network: a random spanning tree plus chords."""
    n_gen = int(rng.integers(1, n_bus + 1))
    buses = []
    for k in range(1, n_bus + 1):
        kind = "generator" if k <= n_gen else "load"
        alpha = float(rng.uniform(0.2, 3.0))
        if rng.random() < clip_fraction:
            hi = float(rng.uniform(0.01, 0.3))
            lo = -float(rng.uniform(0.01, 0.3))
        else:
            lo, hi = -50.0, 50.0
        buses.append(Bus(k, kind, float(rng.uniform(0.5, 2.0)), QuadraticCost(alpha, lo, hi),
                         float(rng.uniform(-1.0, 1.0)), float(rng.uniform(0.5, 2.0)) if kind == "generator" else None))
    order = rng.permutation(n_bus) + 1
    pairs = []
    for k in range(1, n_bus):
        parent = int(order[rng.integers(0, k)])
        pairs.append((parent, int(order[k])))
    existing = {frozenset(p) for p in pairs}
    candidates = [(i, j) for i in range(1, n_bus + 1) for j in range(i + 1, n_bus + 1) if frozenset((i, j)) not in existing]
    rng.shuffle(candidates)
    pairs += [tuple(map(int, c)) for c in candidates[:extra_edges]]
    lines = []
    for i, j in pairs:
        if rng.random() < 0.5:
            i, j = j, i
        lines.append(Line(i, j, B=float(rng.uniform(2.0, 10.0))))
    return build_network(buses, lines)


@pytest.fixture
def n1():
    return make_n1()


@pytest.fixture
def n1_clipped():
    return make_n1(-0.1, 0.1)


@pytest.fixture
def ring3():
    return make_ring3()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_report(request):
    """Record one verdict line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number, title, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
