import json
import random

import pytest
from hypothesis import HealthCheck, settings

from evacnav.building import default_building, load_building

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# acceptance outcomes, filled in by test_acceptance and printed at the end of the session
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture(scope="session")
def mall():
    return default_building()


def make_graph(nodes, edges, access_points=()):
    """Build a graph from ``[(id, x, y, floor, kind)]`` and ``[(a, b)]`` or ``[(a, b, length)]``."""
    doc = {
        "nodes": [{"id": i, "x_m": x, "y_m": y, "floor": f, "kind": k} for i, x, y, f, k in nodes],
        "edges": [
            {"a": e[0], "b": e[1], **({"length_m": e[2]} if len(e) > 2 else {})} for e in edges
        ],
        "access_points": list(access_points),
    }
    return load_building(json.dumps(doc))


def line_graph(n, spacing=3.0):
    """Nodes 0..n-1 on a line, node n-1 is the exit."""
    nodes = [(i, spacing * i, 0.0, 0, "exit" if i == n - 1 else "landmark") for i in range(n)]
    return make_graph(nodes, [(i, i + 1) for i in range(n - 1)])


def random_connected_edges(rng: random.Random, n: int, extra: int):
    """A random spanning tree plus ``extra`` random chords, no duplicates."""
    order = list(range(n))
    rng.shuffle(order)
    edges = set()
    for i in range(1, n):
        a, b = order[i], order[rng.randrange(i)]
        edges.add((min(a, b), max(a, b)))
    tries = 0
    while len(edges) < n - 1 + extra and tries < 1000:
        a, b = rng.sample(range(n), 2)
        edges.add((min(a, b), max(a, b)))
        tries += 1
    return sorted(edges)
