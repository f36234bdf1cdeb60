"""Cognitive packet routing over an arbitrary graph, plus the Dijkstra baseline.

Smart packets walk the graph guided by a random neural network at every node,
recording a goal measurement per hop. When one reaches a destination its
loop-erased path is acknowledged: each node on the way back is rewarded with
the inverse of the goal value still ahead of it, and the route cache keeps the
best path seen for every node.

The engine is graph-agnostic. It needs a ``neighbors(u)`` callable and a goal
whose ``hop(u, v, t)`` returns a per-hop measurement, or ``None`` when the
hop is blocked.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Protocol, Sequence

from evacnav.rnn import RandomNeuralNetwork, reinforce, rnn_init, select_next

Node = Hashable
MIN_GOAL = 1e-6


class Goal(Protocol):
    def hop(self, u: Node, v: Node, t: float) -> Any | None: ...

    def value(self, measurements: Sequence[Any]) -> float: ...


@dataclass(frozen=True)
class AdditiveGoal:
    """Sum of non-negative per-hop costs (e.g. travel time)."""

    edge_cost: Callable[[Node, Node, float], float | None]

    def hop(self, u: Node, v: Node, t: float) -> float | None:
        return self.edge_cost(u, v, t)

    def value(self, measurements: Sequence[float]) -> float:
        return math.fsum(measurements)


@dataclass(frozen=True)
class ProductSumGoal:
    """``alpha * prod(factor) * sum(delay)`` over hops measured as ``(factor, delay)``."""

    hop_measure: Callable[[Node, Node, float], tuple[float, float] | None]
    alpha: float = 1.0

    def hop(self, u: Node, v: Node, t: float) -> tuple[float, float] | None:
        return self.hop_measure(u, v, t)

    def value(self, measurements: Sequence[tuple[float, float]]) -> float:
        if not measurements:
            return 0.0
        prod = math.prod(f for f, _ in measurements)
        return self.alpha * prod * math.fsum(d for _, d in measurements)


@dataclass
class SmartPacket:
    source: Node
    visited: list[Node]
    measurements: list[Any] = field(default_factory=list)
    status: str = "travelling"  # -> delivered | dropped | blocked

    @property
    def delivered(self) -> bool:
        return self.status == "delivered"


@dataclass
class CacheEntry:
    path: tuple[Node, ...]
    goal_value: float
    stamp: float
    _checked_at: float = math.nan
    _current: float = math.inf


@dataclass
class CpnEngine:
    neighbors: Callable[[Node], Sequence[Node]]
    goal: Goal
    hop_limit: int
    epsilon: float = 0.1
    threshold_smoothing: float = 0.8
    tolerance: float = 1e-6
    cache_suffixes: bool = True
    networks: dict[Node, tuple[tuple[Node, ...], RandomNeuralNetwork]] = field(default_factory=dict)
    cache: dict[Node, CacheEntry] = field(default_factory=dict)
    packets_sent: int = 0
    hops_travelled: int = 0

    def network(self, u: Node) -> tuple[tuple[Node, ...], RandomNeuralNetwork]:
        nbrs = tuple(self.neighbors(u))
        entry = self.networks.get(u)
        if entry is None or entry[0] != nbrs:
            entry = (nbrs, rnn_init(max(len(nbrs), 1), a=self.threshold_smoothing, tolerance=self.tolerance))
            self.networks[u] = entry
        return entry

    def path_goal(self, path: Sequence[Node], t: float) -> float:
        """Goal of ``path`` evaluated at time ``t``; inf if any hop is blocked or missing."""
        meas = []
        for u, v in zip(path, path[1:]):
            if v not in self.neighbors(u):
                return math.inf
            m = self.goal.hop(u, v, t)
            if m is None:
                return math.inf
            meas.append(m)
        return self.goal.value(meas)

    def _current_goal(self, entry: CacheEntry, t: float) -> float:
        if entry._checked_at != t:
            entry._current = self.path_goal(entry.path, t)
            entry._checked_at = t
        return entry._current


def loop_erase(path: Sequence[Node], measurements: Sequence[Any] | None = None):
    """Splice cycles out of a walk, keeping the first visit of every node.

    With ``measurements`` (one per hop) returns ``(path, measurements)``
    trimmed consistently; otherwise just the path.
    """
    out: list[Node] = []
    meas: list[Any] = []
    index: dict[Node, int] = {}
    for i, u in enumerate(path):
        k = index.get(u)
        if k is not None:
            for dropped in out[k + 1 :]:
                del index[dropped]
            del out[k + 1 :]
            del meas[k:]
        else:
            index[u] = len(out)
            out.append(u)
        if measurements is not None and i < len(path) - 1:
            meas.append(measurements[i])
    if measurements is None:
        return out
    return out, meas[: len(out) - 1]


def send_smart_packet(
    engine: CpnEngine,
    source: Node,
    destinations: Iterable[Node] | frozenset,
    rng: random.Random,
    t: float = 0.0,
) -> SmartPacket:
    dest = destinations if isinstance(destinations, (set, frozenset)) else frozenset(destinations)
    if not dest:
        raise ValueError("smart packet needs at least one destination")
    engine.packets_sent += 1
    packet = SmartPacket(source=source, visited=[source])
    if source in dest:
        packet.status = "delivered"
        return packet
    seen = {source}
    u = source
    hops = 0
    while hops < engine.hop_limit:
        nbrs, net = engine.network(u)
        meas = [engine.goal.hop(u, v, t) for v in nbrs]
        blocked = {i for i, m in enumerate(meas) if m is None}
        if len(blocked) == len(nbrs):
            packet.status = "blocked" if u == source else "dropped"
            return packet
        forbidden = blocked | {i for i, v in enumerate(nbrs) if v in seen}
        if len(forbidden) == len(nbrs):
            forbidden = blocked
        i = select_next(net, engine.epsilon, forbidden, rng)
        v = nbrs[i]
        packet.visited.append(v)
        packet.measurements.append(meas[i])
        seen.add(v)
        hops += 1
        engine.hops_travelled += 1
        if v in dest:
            packet.status = "delivered"
            return packet
        u = v
    packet.status = "dropped"
    return packet


def process_ack(engine: CpnEngine, packet: SmartPacket, t: float = 0.0) -> list[Node]:
    """Reinforce along the loop-erased path in reverse and refresh the cache.

    Returns the loop-erased path.
    """
    if not packet.delivered:
        raise ValueError(f"cannot acknowledge a packet that was {packet.status}")
    path, meas = loop_erase(packet.visited, packet.measurements)
    goal = engine.goal
    for i in range(len(path) - 2, -1, -1):
        u, v = path[i], path[i + 1]
        g_down = goal.value(meas[i:])
        nbrs, net = engine.network(u)
        if v in nbrs:
            reinforce(net, nbrs.index(v), 1.0 / max(g_down, MIN_GOAL))
        if i == 0 or engine.cache_suffixes:
            _offer(engine, tuple(path[i:]), g_down, t)
    if len(path) == 1:
        _offer(engine, tuple(path), 0.0, t)
    return path


def _offer(engine: CpnEngine, path: tuple[Node, ...], g: float, t: float) -> None:
    entry = engine.cache.get(path[0])
    if entry is None or g < engine._current_goal(entry, t):
        engine.cache[path[0]] = CacheEntry(path=path, goal_value=g, stamp=t, _checked_at=t, _current=g)


def best_route(engine: CpnEngine, source: Node, t: float = 0.0) -> list[Node] | None:
    entry = engine.cache.get(source)
    if entry is None:
        return None
    path = entry.path
    if len(path) > 1:
        u, v = path[0], path[1]
        if v not in engine.neighbors(u) or engine.goal.hop(u, v, t) is None:
            del engine.cache[source]
            return None
    return list(path)


def explore(
    engine: CpnEngine,
    source: Node,
    destinations: Iterable[Node],
    rng: random.Random,
    packets: int,
    t: float = 0.0,
) -> list[SmartPacket]:
    """Send ``packets`` smart packets from ``source`` and acknowledge the successful ones."""
    dest = frozenset(destinations)
    sent = []
    for _ in range(packets):
        p = send_smart_packet(engine, source, dest, rng, t)
        if p.delivered:
            process_ack(engine, p, t)
        sent.append(p)
        if p.status == "blocked":
            break
    return sent


def dijkstra_route(
    g: Any,
    source: Node,
    destinations: Iterable[Node],
    edge_cost: Callable[[Node, Node], float | None],
) -> list[Node] | None:
    """Cheapest path to the nearest destination; ``None`` costs mark blocked edges.

    Equal-cost paths are resolved toward the lexicographically smallest node sequence.
    """
    if source not in g.nodes:
        raise KeyError(f"unknown node {source}")
    dest = set(destinations)
    heap: list[tuple[float, tuple[Node, ...]]] = [(0.0, (source,))]
    done: set[Node] = set()
    while heap:
        cost, path = heapq.heappop(heap)
        u = path[-1]
        if u in done:
            continue
        done.add(u)
        if u in dest:
            return list(path)
        for v in g.neighbors(u):
            if v in done:
                continue
            c = edge_cost(u, v)
            if c is None:
                continue
            heapq.heappush(heap, (cost + c, path + (v,)))
    return None
