"""Fire ignition and spread over building nodes.

The route service only learns that a node burns ``sensing_delay_s`` seconds
after ignition; movement and casualties use the true state.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping

from evacnav.building import BuildingGraph


class HazardError(ValueError):
    pass


@dataclass(frozen=True)
class HazardParams:
    spread_probability: float = 0.3
    spread_tick_s: float = 5.0
    sensing_delay_s: float = 10.0
    ignition_node: int | str = "random"

    def __post_init__(self) -> None:
        if not 0.0 <= self.spread_probability <= 1.0:
            raise HazardError(f"hazard.spread_probability must lie in [0, 1], got {self.spread_probability}")
        if not self.spread_tick_s > 0:
            raise HazardError(f"hazard.spread_tick_s must be positive, got {self.spread_tick_s}")
        if self.sensing_delay_s < 0:
            raise HazardError(f"hazard.sensing_delay_s must be non-negative, got {self.sensing_delay_s}")
        if isinstance(self.ignition_node, str) and self.ignition_node not in ("random", "none"):
            raise HazardError(f"hazard.ignition_node must be 'random', 'none' or a node id, got {self.ignition_node!r}")


@dataclass(frozen=True)
class HazardField:
    nodes: frozenset[int]
    spread_probability: float = 0.3
    spread_tick_s: float = 5.0
    sensing_delay_s: float = 10.0
    ignition_time_s: Mapping[int, float] = field(default_factory=lambda: MappingProxyType({}))

    @classmethod
    def empty(cls, g: BuildingGraph, params: HazardParams | None = None) -> HazardField:
        p = params or HazardParams()
        return cls(
            nodes=frozenset(g.nodes),
            spread_probability=p.spread_probability,
            spread_tick_s=p.spread_tick_s,
            sensing_delay_s=p.sensing_delay_s,
        )

    def _check(self, node: int) -> None:
        if node not in self.nodes:
            raise HazardError(f"unknown node {node}")

    def burning(self, node: int, t: float) -> bool:
        t0 = self.ignition_time_s.get(node)
        return t0 is not None and t >= t0

    def burnt_set(self, t: float = math.inf) -> frozenset[int]:
        return frozenset(n for n, t0 in self.ignition_time_s.items() if t >= t0)


def ignite(h: HazardField, node: int, t: float) -> HazardField:
    h._check(node)
    if node in h.ignition_time_s:
        raise HazardError(f"node {node} is already burning")
    times = dict(h.ignition_time_s)
    times[node] = t
    return replace(h, ignition_time_s=MappingProxyType(times))


def spread(h: HazardField, g: BuildingGraph, t: float, rng: random.Random) -> HazardField:
    """One spread tick at time ``t``; one draw per exposed node, ascending id."""
    if h.spread_probability <= 0.0:
        return h
    burning = h.burnt_set(t)
    exposed = sorted(
        n for n in g.nodes if n not in h.ignition_time_s and any(v in burning for v in g.adjacency[n])
    )
    if not exposed:
        return h
    times = dict(h.ignition_time_s)
    for n in exposed:
        if rng.random() < h.spread_probability:
            times[n] = t
    return replace(h, ignition_time_s=MappingProxyType(times))


def known_burning(h: HazardField, node: int, t: float) -> bool:
    h._check(node)
    t0 = h.ignition_time_s.get(node)
    return t0 is not None and t >= t0 + h.sensing_delay_s
