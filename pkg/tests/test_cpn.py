import math
import random

import pytest
from hypothesis import given, strategies as st

from evacnav.cpn import (
    AdditiveGoal,
    CpnEngine,
    ProductSumGoal,
    best_route,
    dijkstra_route,
    explore,
    loop_erase,
    process_ack,
    send_smart_packet,
)

from conftest import line_graph, make_graph
from oracles import brute_force_cost, random_weighted_graph


def engine_for(g, cost=None, **kw):
    cost = cost or (lambda u, v, t: g.length(u, v))
    kw.setdefault("hop_limit", 4 * len(g.nodes))
    return CpnEngine(neighbors=g.neighbors, goal=AdditiveGoal(cost), **kw)


def diamond():
    # 0 -> {1 (short), 2 (long)} -> 3
    return make_graph(
        [(0, 0, 0, 0, "landmark"), (1, 5, 5, 0, "landmark"), (2, 5, -5, 0, "landmark"), (3, 10, 0, 0, "exit")],
        [(0, 1, 2.0), (1, 3, 2.0), (0, 2, 5.0), (2, 3, 5.0)],
    )


def test_line_graph_packet():
    g = line_graph(3)
    p = send_smart_packet(engine_for(g), 0, {2}, random.Random(0))
    assert p.delivered and p.visited == [0, 1, 2]
    assert p.measurements == [3.0, 3.0]


def test_source_is_destination():
    g = line_graph(3)
    e = engine_for(g)
    p = send_smart_packet(e, 2, {2}, random.Random(0))
    assert p.delivered and p.visited == [2] and p.measurements == []
    assert process_ack(e, p) == [2]
    assert best_route(e, 2) == [2]


def test_all_blocked_at_source():
    g = line_graph(3)
    e = engine_for(g, cost=lambda u, v, t: None)
    assert send_smart_packet(e, 0, {2}, random.Random(0)).status == "blocked"


def test_hop_limit_drops():
    g = line_graph(6)
    e = engine_for(g, hop_limit=3)
    p = send_smart_packet(e, 0, {5}, random.Random(0))
    assert p.status == "dropped"
    assert len(p.visited) - 1 <= 3


def test_empty_destinations_rejected():
    with pytest.raises(ValueError):
        send_smart_packet(engine_for(line_graph(3)), 0, set(), random.Random(0))


def test_loop_erasure_example():
    assert loop_erase(["A", "B", "A", "C"]) == ["A", "C"]
    path, meas = loop_erase(["A", "B", "A", "C"], [1, 2, 3])
    assert path == ["A", "C"] and meas == [3]


@given(st.lists(st.integers(0, 5), min_size=1, max_size=30))
def test_loop_erasure_properties(walk):
    out = loop_erase(walk)
    assert out[0] == walk[0] and out[-1] == walk[-1]
    assert len(set(out)) == len(out)
    assert loop_erase(out) == out
    # consecutive nodes of the result were consecutive somewhere in the walk
    steps = set(zip(walk, walk[1:]))
    assert all(s in steps for s in zip(out, out[1:]))


def test_first_ack_populates_cache():
    g = line_graph(4)
    e = engine_for(g)
    assert best_route(e, 0) is None
    p = send_smart_packet(e, 0, {3}, random.Random(0))
    process_ack(e, p)
    assert best_route(e, 0) == [0, 1, 2, 3]
    assert e.cache[0].goal_value == pytest.approx(9.0)
    # suffixes are cached too
    assert best_route(e, 2) == [2, 3]


def test_ack_rejects_undelivered():
    g = line_graph(6)
    e = engine_for(g, hop_limit=2)
    p = send_smart_packet(e, 0, {5}, random.Random(0))
    with pytest.raises(ValueError):
        process_ack(e, p)


def test_diamond_converges_to_cheaper_branch():
    g = diamond()
    e = engine_for(g)
    explore(e, 0, {3}, random.Random(11), packets=200)
    assert best_route(e, 0) == [0, 1, 3]
    assert e.cache[0].goal_value == pytest.approx(brute_force_cost(g.neighbors, g.length, 0, {3}))


def test_diamond_reinforcement_prefers_cheaper_hop():
    g = diamond()
    e = engine_for(g, epsilon=0.5)
    explore(e, 0, {3}, random.Random(5), packets=200)
    nbrs, net = e.network(0)
    assert net.q[nbrs.index(1)] > net.q[nbrs.index(2)]


def test_cache_invalidated_when_first_hop_blocks():
    g = line_graph(4)
    blocked = set()
    e = engine_for(g, cost=lambda u, v, t: None if (u in blocked or v in blocked) else g.length(u, v))
    explore(e, 0, {3}, random.Random(0), packets=3)
    assert best_route(e, 0) == [0, 1, 2, 3]
    blocked.add(1)
    assert best_route(e, 0) is None
    assert 0 not in e.cache


def test_cached_route_re_evaluated_when_costs_change():
    g = diamond()
    jam = {"on": False}

    def cost(u, v, t):
        c = g.length(u, v)
        return c * 10 if jam["on"] and 1 in (u, v) else c

    e = engine_for(g, cost=cost, epsilon=1.0)
    explore(e, 0, {3}, random.Random(2), packets=40)
    assert best_route(e, 0) == [0, 1, 3]
    jam["on"] = True
    explore(e, 0, {3}, random.Random(3), packets=40, t=1.0)
    assert best_route(e, 0, 1.0) == [0, 2, 3]


@given(st.integers(0, 10_000))
def test_cached_paths_are_simple_and_anchored(seed):
    g, rng = random_weighted_graph(seed, 9, 5)
    e = engine_for(g)
    explore(e, 5, {0}, rng, packets=15)
    for src, entry in e.cache.items():
        assert entry.path[0] == src and entry.path[-1] == 0
        assert len(set(entry.path)) == len(entry.path)
        assert entry.goal_value == pytest.approx(e.path_goal(entry.path, 0.0))
    assert e.hops_travelled <= e.packets_sent * e.hop_limit


def test_product_sum_goal():
    goal = ProductSumGoal(lambda u, v, t: (1.0, 1.0), alpha=2.0)
    assert goal.value([(1.25, 0.04), (1.2, 0.08)]) == pytest.approx(2.0 * 1.5 * 0.12)
    assert goal.value([]) == 0.0


def test_dijkstra_triangle():
    g = make_graph(
        [(0, 0, 0, 0, "landmark"), (1, 3, 0, 0, "landmark"), (2, 3, 4, 0, "exit")],
        [(0, 1), (1, 2), (0, 2)],
    )
    assert dijkstra_route(g, 0, {2}, g.length) == [0, 2]


def test_dijkstra_unreachable_and_unknown():
    g = line_graph(4)
    assert dijkstra_route(g, 0, {3}, lambda u, v: None if 2 in (u, v) else 1.0) is None
    with pytest.raises(KeyError):
        dijkstra_route(g, 99, {3}, g.length)


def test_dijkstra_ties_are_lexicographic():
    # two equal-cost routes 0-1-3 and 0-2-3
    g = make_graph(
        [(0, 0, 0, 0, "landmark"), (1, 1, 1, 0, "landmark"), (2, 1, -1, 0, "landmark"), (3, 2, 0, 0, "exit")],
        [(0, 2, 1.0), (2, 3, 1.0), (0, 1, 1.0), (1, 3, 1.0)],
    )
    assert dijkstra_route(g, 0, {3}, g.length) == [0, 1, 3]


def test_dijkstra_nearest_destination():
    g = line_graph(5)
    assert dijkstra_route(g, 2, {0, 4}, g.length) == [2, 1, 0]


@pytest.mark.parametrize("seed", range(100))
def test_dijkstra_matches_brute_force_on_eight_nodes(seed):
    g, _ = random_weighted_graph(seed, 8, 4 + seed % 6)
    src = 1 + seed % 7
    path = dijkstra_route(g, src, {0}, g.length)
    got = math.fsum(g.length(u, v) for u, v in zip(path, path[1:]))
    assert got == pytest.approx(brute_force_cost(g.neighbors, g.length, src, {0}), rel=1e-12)
