"""Building model: landmark/exit nodes joined by walkable edges.

The geometry lives in a single JSON document::

    {"nodes": [{"id": 0, "x_m": 0.0, "y_m": 0.0, "floor": 0, "kind": "exit"}, ...],
     "edges": [{"a": 0, "b": 1, "length_m": 5.0}, ...],
     "access_points": [0]}

``length_m`` may be omitted, in which case the 3-D Euclidean distance between
the endpoints is used.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

if TYPE_CHECKING:
    from evacnav.hazard import HazardField

FLOOR_HEIGHT_M = 4.0
NODE_KINDS = ("landmark", "exit", "plain")


class BuildingError(ValueError):
    """Malformed or inconsistent building description."""


@dataclass(frozen=True)
class NodeRecord:
    id: int
    x_m: float
    y_m: float
    floor: int
    kind: str = "landmark"

    @property
    def z_m(self) -> float:
        return self.floor * FLOOR_HEIGHT_M


@dataclass(frozen=True)
class EdgeRecord:
    a: int
    b: int
    length_m: float


@dataclass(frozen=True)
class BuildingGraph:
    nodes: dict[int, NodeRecord]
    edges: tuple[EdgeRecord, ...]
    access_points: frozenset[int] = frozenset()
    adjacency: dict[int, tuple[int, ...]] = field(init=False, repr=False, compare=False)
    lengths: dict[tuple[int, int], float] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        _validate(self.nodes, self.edges, self.access_points)
        adj: dict[int, list[int]] = {n: [] for n in self.nodes}
        lengths: dict[tuple[int, int], float] = {}
        for e in self.edges:
            adj[e.a].append(e.b)
            adj[e.b].append(e.a)
            lengths[(e.a, e.b)] = e.length_m
            lengths[(e.b, e.a)] = e.length_m
        object.__setattr__(self, "adjacency", {n: tuple(sorted(v)) for n, v in adj.items()})
        object.__setattr__(self, "lengths", lengths)

    @property
    def exits(self) -> frozenset[int]:
        return frozenset(n.id for n in self.nodes.values() if n.kind == "exit")

    def neighbors(self, u: int) -> tuple[int, ...]:
        return self.adjacency[u]

    def length(self, u: int, v: int) -> float:
        return self.lengths[(u, v)]

    def node(self, u: int) -> NodeRecord:
        try:
            return self.nodes[u]
        except KeyError:
            raise KeyError(f"unknown node {u}") from None

    def position(self, u: int) -> tuple[float, float, float]:
        n = self.node(u)
        return (n.x_m, n.y_m, n.z_m)


def _validate(nodes: dict[int, NodeRecord], edges: Iterable[EdgeRecord], access_points: frozenset[int]) -> None:
    if not nodes:
        raise BuildingError("building has no nodes")
    for n in nodes.values():
        if n.floor < 0:
            raise BuildingError(f"node {n.id}: negative floor {n.floor}")
        if n.kind not in NODE_KINDS:
            raise BuildingError(f"node {n.id}: unknown kind {n.kind!r}")
    if not any(n.kind == "exit" for n in nodes.values()):
        raise BuildingError("building has no exit node")

    seen: set[frozenset[int]] = set()
    adj: dict[int, set[int]] = {n: set() for n in nodes}
    for e in edges:
        for end in (e.a, e.b):
            if end not in nodes:
                raise BuildingError(f"edge {e.a}-{e.b} references missing node {end}")
        if e.a == e.b:
            raise BuildingError(f"edge {e.a}-{e.b} is a self loop")
        if not e.length_m > 0 or not math.isfinite(e.length_m):
            raise BuildingError(f"edge {e.a}-{e.b} has non-positive length {e.length_m}")
        key = frozenset((e.a, e.b))
        if key in seen:
            raise BuildingError(f"duplicate edge {e.a}-{e.b}")
        seen.add(key)
        adj[e.a].add(e.b)
        adj[e.b].add(e.a)

    for ap in access_points:
        if ap not in nodes:
            raise BuildingError(f"access point references missing node {ap}")

    start = min(nodes)
    reached = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adj[u] - reached:
            reached.add(v)
            queue.append(v)
    if len(reached) != len(nodes):
        stray = min(set(nodes) - reached)
        raise BuildingError(f"building graph is disconnected: node {stray} unreachable from node {start}")


def _distance(a: NodeRecord, b: NodeRecord) -> float:
    return math.sqrt((a.x_m - b.x_m) ** 2 + (a.y_m - b.y_m) ** 2 + (a.z_m - b.z_m) ** 2)


def load_building(text: str) -> BuildingGraph:
    """Parse and validate a building document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BuildingError(f"building file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise BuildingError("building file must be a JSON object")

    nodes: dict[int, NodeRecord] = {}
    try:
        for i, raw in enumerate(doc["nodes"]):
            try:
                n = NodeRecord(
                    id=int(raw["id"]),
                    x_m=float(raw["x_m"]),
                    y_m=float(raw["y_m"]),
                    floor=int(raw["floor"]),
                    kind=str(raw.get("kind", "landmark")),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise BuildingError(f"nodes[{i}] is malformed: {exc!r}") from exc
            if n.id in nodes:
                raise BuildingError(f"duplicate node id {n.id}")
            nodes[n.id] = n

        edges = []
        for i, raw in enumerate(doc["edges"]):
            try:
                a, b = int(raw["a"]), int(raw["b"])
                length = raw.get("length_m")
            except (KeyError, TypeError, ValueError) as exc:
                raise BuildingError(f"edges[{i}] is malformed: {exc!r}") from exc
            for end in (a, b):
                if end not in nodes:
                    raise BuildingError(f"edge {a}-{b} references missing node {end}")
            edges.append(EdgeRecord(a, b, _distance(nodes[a], nodes[b]) if length is None else float(length)))

        access_points = frozenset(int(x) for x in doc.get("access_points", []))
    except KeyError as exc:
        raise BuildingError(f"building file is missing key {exc}") from exc
    except TypeError as exc:
        raise BuildingError(f"building file is malformed: {exc}") from exc

    return BuildingGraph(nodes=nodes, edges=tuple(edges), access_points=access_points)


def load_building_file(path: str | Path) -> BuildingGraph:
    return load_building(Path(path).read_text(encoding="utf-8"))


def render_building(g: BuildingGraph) -> str:
    """Serialize ``g`` so that ``load_building(render_building(g)) == g``."""
    doc = {
        "nodes": [
            {"id": n.id, "x_m": n.x_m, "y_m": n.y_m, "floor": n.floor, "kind": n.kind}
            for n in sorted(g.nodes.values(), key=lambda n: n.id)
        ],
        "edges": [{"a": e.a, "b": e.b, "length_m": e.length_m} for e in g.edges],
        "access_points": sorted(g.access_points),
    }
    return json.dumps(doc, indent=1)


def default_building() -> BuildingGraph:
    """The bundled three-floor, 50-node shopping mall."""
    return load_building_file(default_building_path())


def default_building_path() -> Path:
    return Path(__file__).with_name("data") / "mall.json"


def euclidean_m(g: BuildingGraph, u: int, v: int) -> float:
    return _distance(g.node(u), g.node(v))


def line_of_sight(g: BuildingGraph, u: int, v: int, hazard: HazardField, t: float) -> bool:
    """Visibility between two nodes: same node, or same-floor neighbours with no fire at either end."""
    nu, nv = g.node(u), g.node(v)
    if u == v:
        return True
    if nu.floor != nv.floor or v not in g.adjacency[u]:
        return False
    return not (hazard.burning(u, t) or hazard.burning(v, t))
