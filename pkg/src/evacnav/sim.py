"""Time-stepped evacuation world.

Each step runs, in order: fire spread (on its tick), casualties, phone
communication, routing decisions at nodes, movement along edges, exit
arrivals and bookkeeping. Evacuees are always processed in ascending id.

Fire uses its own random stream derived from the seed, so every algorithm
and comms mode sees the same fire for the same seed. Everything else draws
from the world stream.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from evacnav import comms as cm
from evacnav.building import BuildingGraph, line_of_sight
from evacnav.config import SimConfig
from evacnav.cpn import AdditiveGoal, CpnEngine, best_route, dijkstra_route, explore
from evacnav.energy import Battery, sample_initial_battery, to_joules
from evacnav.hazard import HazardField, ignite, spread
from evacnav.spf import resultant_force, spf_next_node

MOVING, EVACUATED, DEAD = "moving", "evacuated", "dead"
STAY = None


@dataclass
class Evacuee:
    id: int
    node: int | None
    speed_mps: float
    battery: Battery
    edge: tuple[int, int] | None = None  # (from, to) while walking
    progress_m: float = 0.0
    life_state: str = MOVING
    phone_active: bool = True
    current_route: list[int] | None = None
    follow_target: int | None = None
    arrived: bool = True
    pending_upload: bool = True
    evac_time_s: float | None = None

    @property
    def ref_node(self) -> int:
        """Node the evacuee stands on, or is walking toward."""
        return self.node if self.node is not None else self.edge[1]


@dataclass
class RunMetrics:
    evacuee_count: int = 0
    survivors: int = 0
    survivor_pct: float = 0.0
    casualties: int = 0
    trapped_at_cap: int = 0
    drained_phones: int = 0
    mean_evacuation_time_s: float = 0.0
    total_energy_j: float = 0.0
    comms_overhead_j: float = 0.0
    steps: int = 0
    initial_charge_q: int = 0
    final_charge_q: int = 0
    debited_q: int = 0
    events: list[tuple[float, str, int, str]] = field(default_factory=list, repr=False)

    def ledger_balanced(self) -> bool:
        return self.debited_q == self.initial_charge_q - self.final_charge_q


def _edge_key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


class World:
    def __init__(self, cfg: SimConfig, g: BuildingGraph) -> None:
        self.cfg = cfg
        self.g = g
        self.rng = random.Random(cfg.seed)
        self.hazard_rng = random.Random(f"hazard:{cfg.seed}")
        self.t = 0.0
        self.step_index = 0
        self.hazard = HazardField.empty(g, cfg.hazard)
        self.evacuees: list[Evacuee] = []
        self.by_id: dict[int, Evacuee] = {}
        self.occupancy: dict[tuple[int, int], int] = {}
        self.events: list[tuple[float, str, int, str]] = []
        self.known: frozenset[int] = frozenset()
        self.open_exits: frozenset[int] = g.exits
        self.debited_q = 0
        self.drained = 0
        self._next_spread = cfg.hazard.spread_tick_s
        self._next_discovery = 0.0
        self._explored: dict[int, int] = {}
        self._dijkstra_cache: dict[int, list[int] | None] = {}
        self._dijkstra_known: frozenset[int] | None = None

        self.nav: CpnEngine | None = None
        if cfg.algorithm in ("cpnst", "cpn-spf"):
            self.nav = CpnEngine(
                neighbors=g.neighbors,
                goal=AdditiveGoal(self.travel_cost),
                hop_limit=cfg.cpn.hop_limit_factor * len(g.nodes),
                epsilon=cfg.rnn.epsilon,
                threshold_smoothing=cfg.rnn.threshold_smoothing_a,
                tolerance=cfg.rnn.fixed_point_tolerance,
            )
        self.comms = cm.Comms(
            energy=cfg.energy,
            params=cfg.comms,
            epsilon=cfg.rnn.epsilon,
            threshold_smoothing=cfg.rnn.threshold_smoothing_a,
            tolerance=cfg.rnn.fixed_point_tolerance,
        )
        self._ap_positions = {a: g.position(a) for a in sorted(g.access_points)}
        self._phone_graph_step = -1

    # --- setup -----------------------------------------------------------

    def populate(self) -> None:
        cfg = self.cfg
        starts = sorted(n for n in self.g.nodes if n not in self.g.exits)
        b = cfg.battery
        for i in range(cfg.evacuee_count):
            node = self.rng.choice(starts)
            self.evacuees.append(Evacuee(id=i, node=node, speed_mps=cfg.walk_speed_mps, battery=None))
        for e in self.evacuees:
            e.battery = sample_initial_battery(
                self.rng, b.battery_mean_j, b.battery_sd_j, b.battery_min_j, b.battery_max_j
            )
        self.by_id = {e.id: e for e in self.evacuees}
        self.comms.batteries = {e.id: e.battery for e in self.evacuees}

        where = cfg.hazard.ignition_node
        if where == "random":
            self.hazard = ignite(self.hazard, self.hazard_rng.choice(starts), 0.0)
        elif where != "none":
            self.hazard = ignite(self.hazard, int(where), 0.0)
        self._refresh_knowledge()

    # --- queries ---------------------------------------------------------

    def _refresh_knowledge(self) -> None:
        t = self.t
        delay = self.hazard.sensing_delay_s
        self.known = frozenset(n for n, t0 in self.hazard.ignition_time_s.items() if t >= t0 + delay)
        self.open_exits = self.g.exits - self.known

    def burning(self, node: int) -> bool:
        return self.hazard.burning(node, self.t)

    def travel_cost(self, u: int, v: int, t: float) -> float | None:
        """Congestion-aware walking time of edge u-v as seen by the route service."""
        if u in self.known or v in self.known:
            return None
        n = self.occupancy.get(_edge_key(u, v), 0)
        return self.g.length(u, v) / self.cfg.cpn.walk_speed_mps * (1.0 + self.cfg.cpn.congestion_gamma * max(n - 1, 0))

    def _length_cost(self, u: int, v: int) -> float | None:
        if u in self.known or v in self.known:
            return None
        return self.g.length(u, v)

    def position(self, e: Evacuee) -> tuple[float, float, float]:
        if e.node is not None:
            return self.g.position(e.node)
        (x0, y0, z0), (x1, y1, z1) = self.g.position(e.edge[0]), self.g.position(e.edge[1])
        f = e.progress_m / self.g.length(*e.edge)
        return (x0 + f * (x1 - x0), y0 + f * (y1 - y0), z0 + f * (z1 - z0))

    def floor_of(self, e: Evacuee) -> int:
        if e.node is not None:
            return self.g.nodes[e.node].floor
        u, v = e.edge
        near = u if e.progress_m * 2 < self.g.length(u, v) else v
        return self.g.nodes[near].floor

    def moving(self) -> list[Evacuee]:
        return [e for e in self.evacuees if e.life_state == MOVING]

    def log(self, kind: str, who: int, detail: str = "") -> None:
        self.events.append((self.t, kind, who, detail))

    # --- routing service -------------------------------------------------

    def request_route(self, node: int) -> list[int] | None:
        if not self.open_exits:
            return None
        if node in self.open_exits:
            return [node]
        if self.cfg.algorithm == "dijkstra":
            if self._dijkstra_known != self.known:
                self._dijkstra_cache.clear()
                self._dijkstra_known = self.known
            if node not in self._dijkstra_cache:
                self._dijkstra_cache[node] = dijkstra_route(self.g, node, self.open_exits, self._length_cost)
            route = self._dijkstra_cache[node]
            return list(route) if route is not None else None
        if self._explored.get(node) != self.step_index:
            self._explored[node] = self.step_index
            explore(self.nav, node, self.open_exits, self.rng, self.cfg.cpn.packets_per_recompute, self.t)
        return best_route(self.nav, node, self.t)

    # --- decisions -------------------------------------------------------

    def decide_next(self, e: Evacuee) -> int | None:
        if not e.phone_active:
            return self.depleted_behavior(e)
        e.follow_target = None
        route = e.current_route
        if e.arrived or not route or route[0] != e.node:
            route = self.request_route(e.node)
            e.current_route = route
            if route is not None:
                e.arrived = False
        hop = route[1] if route is not None and len(route) > 1 else STAY
        if hop is not STAY and (hop in self.known or e.node in self.known):
            hop = STAY
        if self.cfg.algorithm != "cpn-spf":
            return hop
        p = self.cfg.p_spf
        if p <= 0.0:
            return hop
        if p < 1.0 and self.rng.random() >= p:
            return hop
        floor = self.g.nodes[e.node].floor
        me = self.position(e)
        others = [
            self.position(o)[:2]
            for o in self.evacuees
            if o is not e and o.life_state == MOVING and self.floor_of(o) == floor
        ]
        force = resultant_force(me[:2], others, self.cfg.spf)
        spf_hop = spf_next_node(self.g, e.node, force, allowed=lambda v: v not in self.known)
        return hop if spf_hop is None else spf_hop

    def depleted_behavior(self, e: Evacuee) -> int | None:
        here = e.node
        best, best_d = None, math.inf
        for o in self.evacuees:
            if o is e or o.life_state != MOVING or not o.phone_active:
                continue
            if not line_of_sight(self.g, here, o.ref_node, self.hazard, self.t):
                continue
            d = math.dist(self.position(e), self.position(o))
            if d < best_d:
                best, best_d = o, d
        if best is not None:
            e.follow_target = best.id
            if best.ref_node != here:
                return best.ref_node
            route = best.current_route
            if route and len(route) > 1 and route[0] == here and not self.burning(route[1]):
                return route[1]
            return STAY
        e.follow_target = None
        options = [v for v in self.g.adjacency[here] if not self.burning(v)]
        if not options:
            return STAY
        return options[self.rng.randrange(len(options))]

    # --- communication ---------------------------------------------------

    def _phone_graph(self) -> cm.PhoneGraph:
        if self._phone_graph_step != self.step_index:
            phones = {e.id: self.position(e) for e in self.evacuees if e.life_state == MOVING and e.phone_active}
            graph = cm.PhoneGraph.build(phones, self.comms.batteries, self._ap_positions, self.cfg.comms.bluetooth_range_m, self.t)
            self.comms.set_graph(graph)
            self._phone_graph_step = self.step_index
        return self.comms.graph

    def _account(self, report: cm.DeliveryReport) -> None:
        self.debited_q += sum(report.quanta.values())

    def localize(self, e: Evacuee) -> None:
        """Photo upload and instruction download at a landmark."""
        p = self.cfg.comms
        mode = self.cfg.comms_mode
        if mode == cm.AHCPN:
            self._phone_graph()
            before = self.comms.overhead_q
            up = cm.upload(self.comms, e.id, p.photo_bytes, mode, self.rng, self.t)
            self.debited_q += self.comms.overhead_q - before
        else:
            up = cm.upload(self.comms, e.id, p.photo_bytes, mode, self.rng, self.t)
        self._account(up)
        if up.success and not e.battery.drained:
            down_path = up.path if (mode == cm.AHCPN and not up.fell_back) else None
            self._account(cm.download(self.comms, e.id, p.instruction_bytes, mode, down_path))

    def discovery_round(self) -> None:
        self._phone_graph()
        before = self.comms.overhead_q
        for e in self.evacuees:
            if e.life_state == MOVING and e.phone_active and not e.battery.drained:
                try:
                    cm.discover_relay_route(self.comms, e.id, self.rng, self.t)
                except cm.Drained:
                    pass
        self.debited_q += self.comms.overhead_q - before

    def _sync_phones(self) -> None:
        for e in self.evacuees:
            if e.phone_active and e.battery.drained:
                e.phone_active = False
                e.current_route = None
                self.drained += 1
                self.log("drained", e.id)

    # --- main loop -------------------------------------------------------

    def step(self) -> None:
        cfg = self.cfg
        g = self.g

        # 1. fire
        while self.t >= self._next_spread - 1e-9:
            self.hazard = spread(self.hazard, g, self._next_spread, self.hazard_rng)
            self._next_spread += cfg.hazard.spread_tick_s
        self._refresh_knowledge()

        # 2. casualties
        for e in self.evacuees:
            if e.life_state != MOVING:
                continue
            if e.node is not None:
                dead = self.burning(e.node)
            else:
                dead = self.burning(e.edge[0]) or self.burning(e.edge[1])
            if dead:
                self._leave_edge(e)
                e.life_state = DEAD
                self.log("dead", e.id, str(e.ref_node))

        # 3. communication
        if cfg.comms_mode == cm.AHCPN and self.t >= self._next_discovery - 1e-9:
            self.discovery_round()
            self._next_discovery += cfg.comms.discovery_tick_s
            self._sync_phones()
        for e in self.evacuees:
            if e.life_state != MOVING or not e.pending_upload:
                continue
            e.pending_upload = False
            if e.phone_active and g.nodes[e.node].kind == "landmark":
                self.localize(e)
                self._sync_phones()

        # 4. decisions
        for e in self.evacuees:
            if e.life_state != MOVING or e.node is None:
                continue
            nxt = self.decide_next(e)
            if nxt is not STAY:
                key = _edge_key(e.node, nxt)
                self.occupancy[key] = self.occupancy.get(key, 0) + 1
                e.edge = (e.node, nxt)
                e.node = None
                e.progress_m = 0.0

        # 5. movement
        gamma = cfg.cpn.congestion_gamma
        for e in self.evacuees:
            if e.life_state != MOVING or e.edge is None:
                continue
            n = self.occupancy[_edge_key(*e.edge)]
            e.progress_m += e.speed_mps * cfg.step_s / (1.0 + gamma * max(n - 1, 0))
            length = g.length(*e.edge)
            if e.progress_m >= length:
                self._leave_edge(e)
                e.node = e.edge[1]
                e.edge = None
                e.progress_m = 0.0
                e.arrived = True
                e.pending_upload = True

        # 6. exits
        for e in self.evacuees:
            if e.life_state == MOVING and e.node is not None and e.node in g.exits:
                e.life_state = EVACUATED
                e.evac_time_s = self.t + cfg.step_s
                self.log("evacuated", e.id, str(e.node))

        self.step_index += 1
        self.t = self.step_index * cfg.step_s

    def _leave_edge(self, e: Evacuee) -> None:
        if e.edge is not None:
            key = _edge_key(*e.edge)
            self.occupancy[key] -= 1
            if not self.occupancy[key]:
                del self.occupancy[key]

    def done(self) -> bool:
        return all(e.life_state != MOVING for e in self.evacuees)

    def metrics(self) -> RunMetrics:
        n = len(self.evacuees)
        survivors = [e for e in self.evacuees if e.life_state == EVACUATED]
        casualties = sum(e.life_state == DEAD for e in self.evacuees)
        trapped = n - len(survivors) - casualties
        initial = sum(e.battery.initial_q for e in self.evacuees)
        final = sum(e.battery.remaining_q for e in self.evacuees)
        return RunMetrics(
            evacuee_count=n,
            survivors=len(survivors),
            survivor_pct=len(survivors) / n if n else 0.0,
            casualties=casualties,
            trapped_at_cap=trapped,
            drained_phones=self.drained,
            mean_evacuation_time_s=math.fsum(e.evac_time_s for e in survivors) / len(survivors) if survivors else 0.0,
            total_energy_j=to_joules(initial - final),
            comms_overhead_j=to_joules(self.comms.overhead_q),
            steps=self.step_index,
            initial_charge_q=initial,
            final_charge_q=final,
            debited_q=self.debited_q,
            events=list(self.events),
        )


def run(config: SimConfig, g: BuildingGraph) -> RunMetrics:
    """Simulate one seeded evacuation until everyone is out, dead, or the step cap hits."""
    world = World(config, g)
    world.populate()
    while world.step_index < config.max_steps and not world.done():
        world.step()
    return world.metrics()
