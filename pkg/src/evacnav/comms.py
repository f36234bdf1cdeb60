"""Phone-to-cloud communication: direct 3G and ad-hoc CPN relaying (AHCPN).

AHCPN runs a CPN engine over the phone graph (phones within Bluetooth range of
each other plus the deployed access points). A relay path is scored by

    G = alpha * prod(availability of each sending phone) * sum(hop delays)

where a phone's availability is ``B / (B - U)`` for remaining charge ``B``
and the charge ``U`` the payload would cost it. Phones with ``U >= B`` cannot
take part in the path at all.

Phone vertices are evacuee ids (>= 0); access points are encoded as
``-(node_id + 1)`` so every vertex is an int and orderings stay deterministic.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from evacnav.cpn import CpnEngine, ProductSumGoal, best_route, process_ack, send_smart_packet
from evacnav.energy import (
    BLUETOOTH,
    DOWNLOAD,
    THREEG,
    UPLOAD,
    Battery,
    Drained,
    EnergyModel,
    debit,
    tx_energy,
    to_joules,
    tx_time,
)

DIRECT_3G = "direct3g"
AHCPN = "ahcpn"
COMMS_MODES = (DIRECT_3G, AHCPN)


@dataclass(frozen=True)
class CommsParams:
    alpha: float = 1.0
    bluetooth_range_m: float = 10.0
    smart_packet_bytes: int = 100
    discovery_tick_s: float = 10.0
    discovery_packets: int = 2
    photo_bytes: int = 500_000
    instruction_bytes: int = 1_000
    fallback_to_3g: bool = True

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError("comms.alpha must be positive")
        if not self.bluetooth_range_m > 0:
            raise ValueError("comms.bluetooth_range_m must be positive")
        if not self.discovery_tick_s > 0:
            raise ValueError("comms.discovery_tick_s must be positive")
        for name in ("smart_packet_bytes", "photo_bytes", "instruction_bytes", "discovery_packets"):
            if getattr(self, name) < 0:
                raise ValueError(f"comms.{name} must be non-negative")


def ap_vertex(node_id: int) -> int:
    return -(node_id + 1)


def is_access_point(v: int) -> bool:
    return v < 0


def path_availability(remaining_j: float, estimated_j: float) -> float | None:
    """Availability factor ``B / (B - U)``, or ``None`` when the node must be excluded."""
    if remaining_j < 0 or estimated_j < 0:
        raise ValueError("battery quantities must be non-negative")
    if estimated_j >= remaining_j:
        return None
    return remaining_j / (remaining_j - estimated_j)


def path_goal(availabilities: Sequence[float], delays: Sequence[float], alpha: float = 1.0) -> float:
    if not availabilities or len(availabilities) != len(delays):
        raise ValueError("a relay path needs at least one hop and one delay per hop")
    return alpha * math.prod(availabilities) * math.fsum(delays)


def estimated_drain(m: EnergyModel, payload_bytes: int, role: str) -> float:
    """Charge a vertex spends to move ``payload_bytes`` along a relay path.

    ``role`` is ``"source"`` (Bluetooth upload only), ``"relay"`` (download
    then upload) or ``"access_point"`` (mains powered).
    """
    if role == "source":
        return tx_energy(m, BLUETOOTH, UPLOAD, payload_bytes)
    if role == "relay":
        return tx_energy(m, BLUETOOTH, DOWNLOAD, payload_bytes) + tx_energy(m, BLUETOOTH, UPLOAD, payload_bytes)
    if role == "access_point":
        return 0.0
    raise ValueError(f"unknown role {role!r}")


@dataclass(frozen=True)
class PathQuote:
    path: tuple[int, ...]
    availabilities: tuple[float, ...]
    delays: tuple[float, ...]
    alpha: float
    goal_value: float

    @property
    def hops(self) -> int:
        return len(self.path) - 1


@dataclass
class PhoneGraph:
    """Snapshot of who can talk to whom over Bluetooth."""

    positions: dict[int, tuple[float, float, float]]
    batteries: Mapping[int, Battery]
    adjacency: dict[int, tuple[int, ...]]
    stamp: float = 0.0

    @classmethod
    def build(
        cls,
        phones: Mapping[int, tuple[float, float, float]],
        batteries: Mapping[int, Battery],
        access_points: Mapping[int, tuple[float, float, float]],
        range_m: float,
        t: float = 0.0,
    ) -> PhoneGraph:
        ids = sorted(phones) + sorted(ap_vertex(a) for a in access_points)
        pos = {**phones, **{ap_vertex(a): p for a, p in access_points.items()}}
        adjacency: dict[int, list[int]] = {v: [] for v in ids}
        n_phones = len(phones)
        if ids and n_phones:
            xyz = np.array([pos[v] for v in ids], dtype=float)
            d2 = ((xyz[:n_phones, None, :] - xyz[None, :, :]) ** 2).sum(axis=2)
            close = d2 <= range_m * range_m
            rows, cols = np.nonzero(close)
            for i, j in zip(rows.tolist(), cols.tolist()):
                if i == j:
                    continue
                a, b = ids[i], ids[j]
                adjacency[a].append(b)
                if j >= n_phones:
                    adjacency[b].append(a)
        return cls(
            positions=pos,
            batteries=batteries,
            adjacency={v: tuple(sorted(n)) for v, n in adjacency.items()},
            stamp=t,
        )

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency.get(v, ())

    @property
    def access_points(self) -> frozenset[int]:
        return frozenset(v for v in self.adjacency if is_access_point(v))


class RelayGoal:
    """Relay-path goal bound to the phone graph and the pending payload.

    The sending phone of each hop contributes its availability factor; the
    source phone only pays for its upload, intermediate phones for both
    receiving and forwarding.
    """

    def __init__(self, energy: EnergyModel, payload_bytes: int, alpha: float) -> None:
        self.energy = energy
        self.payload_bytes = payload_bytes
        self.alpha = alpha
        self.graph: PhoneGraph | None = None
        self.source: int | None = None
        self._delay = tx_time(energy, BLUETOOTH, payload_bytes)
        self._drain = {r: estimated_drain(energy, payload_bytes, r) for r in ("source", "relay")}
        self.goal = ProductSumGoal(self.hop, alpha)

    def availability(self, u: int) -> float | None:
        if is_access_point(u):
            return None
        battery = self.graph.batteries.get(u)
        if battery is None or battery.drained:
            return None
        role = "source" if u == self.source else "relay"
        return path_availability(battery.remaining_j, self._drain[role])

    def hop(self, u: int, v: int, t: float) -> tuple[float, float] | None:
        pa = self.availability(u)
        if pa is None:
            return None
        # a phone that receives must also forward, so it has to qualify as a relay
        if not is_access_point(v) and (v == self.source or self.availability(v) is None):
            return None
        return (pa, self._delay)

    def value(self, measurements):
        return self.goal.value(measurements)


@dataclass
class DeliveryReport:
    source: int
    mode: str
    payload_bytes: int
    path: tuple[int, ...]
    quanta: dict[int, int]
    latency_s: float
    success: bool
    fell_back: bool = False

    @property
    def joules(self) -> dict[int, float]:
        """Charge actually taken from each phone."""
        return {v: to_joules(q) for v, q in self.quanta.items()}

    @property
    def total_joules(self) -> float:
        return to_joules(sum(self.quanta.values()))


@dataclass
class Comms:
    """Per-run communication state: energy model, phone graph and relay engine."""

    energy: EnergyModel = field(default_factory=EnergyModel)
    params: CommsParams = field(default_factory=CommsParams)
    epsilon: float = 0.1
    threshold_smoothing: float = 0.8
    tolerance: float = 1e-6
    graph: PhoneGraph | None = None
    batteries: Mapping[int, Battery] = field(default_factory=dict)
    overhead_q: int = 0

    def __post_init__(self) -> None:
        self.relay = RelayGoal(self.energy, self.params.photo_bytes, self.params.alpha)
        self.engine = CpnEngine(
            neighbors=self._neighbors,
            goal=self.relay,
            hop_limit=4,
            epsilon=self.epsilon,
            threshold_smoothing=self.threshold_smoothing,
            tolerance=self.tolerance,
            cache_suffixes=False,
        )

    def _neighbors(self, v: int) -> tuple[int, ...]:
        return self.graph.neighbors(v) if self.graph is not None else ()

    def set_graph(self, graph: PhoneGraph) -> None:
        self.graph = graph
        self.relay.graph = graph
        self.engine.hop_limit = 4 * max(len(graph.adjacency), 1)

    def quote(self, path: Sequence[int], t: float = 0.0) -> PathQuote | None:
        """Price ``path`` for the pending payload; ``None`` if any hop is missing or excluded."""
        source = path[0]
        self.relay.source = source
        if len(path) < 2 or not is_access_point(path[-1]):
            return None
        avail, delays = [], []
        for u, v in zip(path, path[1:]):
            if v not in self.graph.neighbors(u) or (is_access_point(u)):
                return None
            m = self.relay.hop(u, v, t)
            if m is None:
                return None
            avail.append(m[0])
            delays.append(m[1])
        return PathQuote(
            path=tuple(path),
            availabilities=tuple(avail),
            delays=tuple(delays),
            alpha=self.params.alpha,
            goal_value=path_goal(avail, delays, self.params.alpha),
        )


def _charge(batteries: Mapping[int, Battery], v: int, joules: float, ledger: dict[int, int]) -> None:
    b = batteries[v]
    before = b.remaining_q
    try:
        debit(b, joules)
    finally:
        ledger[v] = ledger.get(v, 0) + before - b.remaining_q


def discover_relay_route(
    comms: Comms,
    phone: int,
    rng: random.Random,
    t: float = 0.0,
    packets: int | None = None,
) -> PathQuote | None:
    """Emit smart packets from ``phone`` toward the access points and quote the best admissible path.

    Every phone a smart packet traverses pays for sending (and, past the
    source, receiving) its ``smart_packet_bytes``. If the source drains, its
    remaining packets are abandoned.
    """
    g = comms.graph
    if g is None:
        raise RuntimeError("phone graph not built")
    batteries = comms.batteries
    if batteries[phone].drained:
        raise Drained(0.0)
    p = comms.params
    n = p.discovery_packets if packets is None else packets
    aps = g.access_points
    if aps and n > 0:
        up = tx_energy(comms.energy, BLUETOOTH, UPLOAD, p.smart_packet_bytes)
        down = tx_energy(comms.energy, BLUETOOTH, DOWNLOAD, p.smart_packet_bytes)
        spent: dict[int, int] = {}
        comms.relay.source = phone
        for _ in range(n):
            if batteries[phone].drained:
                break
            packet = send_smart_packet(comms.engine, phone, aps, rng, t)
            if packet.status == "blocked":
                break
            walked = packet.visited
            lost = False
            for u, v in zip(walked, walked[1:]):
                try:
                    _charge(batteries, u, up, spent)
                    if not is_access_point(v):
                        _charge(batteries, v, down, spent)
                except Drained:
                    lost = True
                    break
            if packet.delivered and not lost:
                process_ack(comms.engine, packet, t)
        comms.overhead_q += sum(spent.values())
    comms.relay.source = phone
    path = best_route(comms.engine, phone, t)
    if path is None:
        return None
    return comms.quote(path, t)


def upload(
    comms: Comms,
    phone: int,
    payload_bytes: int,
    mode: str,
    rng: random.Random,
    t: float = 0.0,
    quote: PathQuote | None = None,
    discover: bool = True,
) -> DeliveryReport:
    """Send ``payload_bytes`` from ``phone`` to the cloud.

    Under AHCPN a relay path is discovered (or the supplied ``quote`` used);
    without one the phone falls back to 3G when allowed.
    """
    batteries = comms.batteries
    if mode == AHCPN:
        if quote is None and discover:
            try:
                quote = discover_relay_route(comms, phone, rng, t)
            except Drained:
                return DeliveryReport(phone, mode, payload_bytes, (phone,), {}, 0.0, False)
        if quote is not None:
            return _relay(comms, batteries, phone, payload_bytes, quote.path)
        if not comms.params.fallback_to_3g:
            return DeliveryReport(phone, mode, payload_bytes, (phone,), {}, 0.0, False)
        report = _direct(comms, batteries, phone, payload_bytes, UPLOAD)
        report.mode, report.fell_back = AHCPN, True
        return report
    if mode == DIRECT_3G:
        return _direct(comms, batteries, phone, payload_bytes, UPLOAD)
    raise ValueError(f"unknown comms mode {mode!r}")


def download(
    comms: Comms,
    phone: int,
    payload_bytes: int,
    mode: str,
    path: Sequence[int] | None = None,
) -> DeliveryReport:
    """Deliver cloud instructions to ``phone``, over 3G or back along a relay ``path``."""
    batteries = comms.batteries
    if mode == AHCPN and path is not None and len(path) > 1:
        return _relay(comms, batteries, phone, payload_bytes, tuple(reversed(path)))
    if mode not in COMMS_MODES:
        raise ValueError(f"unknown comms mode {mode!r}")
    report = _direct(comms, batteries, phone, payload_bytes, DOWNLOAD)
    report.mode = mode
    report.fell_back = mode == AHCPN
    return report


def _direct(comms: Comms, batteries, phone: int, payload_bytes: int, direction: str) -> DeliveryReport:
    spent: dict[int, int] = {}
    ok = True
    try:
        _charge(batteries, phone, tx_energy(comms.energy, THREEG, direction, payload_bytes), spent)
    except Drained:
        ok = False
    return DeliveryReport(
        phone, DIRECT_3G, payload_bytes, (phone,), spent, tx_time(comms.energy, THREEG, payload_bytes), ok
    )


def _relay(
    comms: Comms,
    batteries,
    phone: int,
    payload_bytes: int,
    path: Sequence[int],
) -> DeliveryReport:
    m = comms.energy
    up = tx_energy(m, BLUETOOTH, UPLOAD, payload_bytes)
    down = tx_energy(m, BLUETOOTH, DOWNLOAD, payload_bytes)
    per_hop = tx_time(m, BLUETOOTH, payload_bytes)
    spent: dict[int, int] = {}
    latency = 0.0
    ok = True
    for u, v in zip(path, path[1:]):
        try:
            if not is_access_point(u):
                _charge(batteries, u, up, spent)
            if not is_access_point(v):
                _charge(batteries, v, down, spent)
        except Drained:
            ok = False
            break
        latency += per_hop
    return DeliveryReport(phone, AHCPN, payload_bytes, tuple(path), spent, latency, ok)
