"""Deterministic discrete-event fabric with name-based forwarding.

Nodes exchange interest and data packets over weighted links.  Each node
runs the usual trio of forwarding structures: a FIB mapping name prefixes
to next hops (built from shortest paths to whoever advertised the
prefix), a PIT that aggregates outstanding interests and routes data back
along the reverse path, and an LRU content store on nodes configured with
cache capacity.

Two packet disciplines matter for the protocols riding on top:

* plain interests (no token) are satisfied from any content store and
  their data is cacheable;
* tokened interests carry authentication payloads, never match a cache,
  never aggregate with one another, and their replies are not cached.

Execution is a single event queue ordered by (tick, sequence); identical
inputs replay identically, byte for byte.
"""

from __future__ import annotations

import heapq
from collections import OrderedDict
from dataclasses import dataclass, field, replace


class FabricError(Exception):
    """Topology or scheduling invariant broken."""


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    role: str = "router"
    cache_capacity: int = 0

    ROLES = ("consumer", "router", "publisher", "manager", "adversary")

    def __post_init__(self) -> None:
        if not self.node_id:
            raise FabricError("node id must be non-empty")
        if self.role not in self.ROLES:
            raise FabricError(f"unknown role {self.role!r} for node {self.node_id}")
        if self.cache_capacity < 0:
            raise FabricError(f"negative cache capacity on {self.node_id}")


@dataclass(frozen=True)
class LinkSpec:
    a: str
    b: str
    latency: int = 1

    def __post_init__(self) -> None:
        if self.latency < 1:
            raise FabricError(f"link {self.a}-{self.b} needs latency >= 1")
        if self.a == self.b:
            raise FabricError(f"self-link on {self.a}")


class Topology:
    def __init__(self, nodes: list[NodeSpec], links: list[LinkSpec]) -> None:
        self.nodes: dict[str, NodeSpec] = {}
        for spec in nodes:
            if spec.node_id in self.nodes:
                raise FabricError(f"duplicate node id {spec.node_id}")
            self.nodes[spec.node_id] = spec
        self.links = list(links)
        self.neighbors: dict[str, dict[str, int]] = {n: {} for n in self.nodes}
        for link in self.links:
            for end in (link.a, link.b):
                if end not in self.nodes:
                    raise FabricError(f"link references unknown node {end}")
            if link.b in self.neighbors[link.a]:
                raise FabricError(f"duplicate link {link.a}-{link.b}")
            self.neighbors[link.a][link.b] = link.latency
            self.neighbors[link.b][link.a] = link.latency
        self._check_connected()

    def _check_connected(self) -> None:
        if not self.nodes:
            raise FabricError("topology has no nodes")
        start = next(iter(self.nodes))
        seen = {start}
        frontier = [start]
        while frontier:
            here = frontier.pop()
            for neighbor in self.neighbors[here]:
                if neighbor not in seen:
                    seen.add(neighbor)
                    frontier.append(neighbor)
        missing = set(self.nodes) - seen
        if missing:
            raise FabricError(f"topology is disconnected: {sorted(missing)} unreachable")


@dataclass(frozen=True)
class InterestPacket:
    name: str
    segment_index: int = 0
    token: str | None = None
    auth_payload: bytes | None = None
    requester: str = ""

    def key(self) -> tuple:
        return (self.name, self.segment_index, self.token)


@dataclass(frozen=True)
class DataPacket:
    name: str
    segment_index: int = 0
    token: str | None = None
    payload: bytes = b""
    cacheable: bool = False
    served_by: str = ""
    hops: int = 0

    def key(self) -> tuple:
        return (self.name, self.segment_index, self.token)


@dataclass
class _PitEntry:
    faces: list[str | None]
    expiry: int


class ContentStore:
    """LRU cache of data packets, capacity counted in packets."""

    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self._store: OrderedDict[tuple, DataPacket] = OrderedDict()
        self.hits = 0
        self.misses = 0
        self.insertions = 0
        self.evictions = 0

    def __len__(self) -> int:
        return len(self._store)

    def get(self, name: str, segment_index: int) -> DataPacket | None:
        key = (name, segment_index)
        packet = self._store.get(key)
        if packet is None:
            self.misses += 1
            return None
        self._store.move_to_end(key)
        self.hits += 1
        return packet

    def put(self, packet: DataPacket) -> list[tuple]:
        key = (packet.name, packet.segment_index)
        if key in self._store:
            self._store.move_to_end(key)
            self._store[key] = packet
            return []
        self._store[key] = packet
        self.insertions += 1
        evicted = []
        while len(self._store) > self.capacity:
            old_key, _ = self._store.popitem(last=False)
            self.evictions += 1
            evicted.append(old_key)
        return evicted

    def stats(self) -> dict:
        return {"hits": self.hits, "misses": self.misses,
                "insertions": self.insertions, "evictions": self.evictions,
                "size": len(self._store), "capacity": self.capacity}


@dataclass
class _Node:
    spec: NodeSpec
    fib: dict[tuple[str, ...], str] = field(default_factory=dict)
    pit: dict[tuple, _PitEntry] = field(default_factory=dict)
    cs: ContentStore | None = None


@dataclass(frozen=True)
class ReplyHandle:
    """Where a producer must send its answer for one received interest."""
    node_id: str
    face: str | None
    interest: InterestPacket


@dataclass(frozen=True)
class WireRecord:
    """One packet crossing one link; the adversary's eavesdropping view."""
    tick: int
    src: str
    dst: str
    packet: object


def _components(name: str) -> tuple[str, ...]:
    return tuple(part for part in name.split("/") if part)


DEFAULT_PIT_LIFETIME = 100
DEFAULT_MAX_TICKS = 1_000_000


class Fabric:
    def __init__(self, topology: Topology, pit_lifetime: int = DEFAULT_PIT_LIFETIME,
                 max_ticks: int = DEFAULT_MAX_TICKS) -> None:
        self.topology = topology
        self.pit_lifetime = pit_lifetime
        self.max_ticks = max_ticks
        self.now = 0
        self.nodes: dict[str, _Node] = {}
        for node_id, spec in topology.nodes.items():
            node = _Node(spec=spec)
            if spec.cache_capacity > 0:
                node.cs = ContentStore(spec.cache_capacity)
            self.nodes[node_id] = node
        self.apps: dict[str, object] = {}
        self.events: list[dict] = []
        self.wiretap: list[WireRecord] = []
        self._advertisements: dict[tuple[str, ...], str] = {}
        self._fib_dirty = False
        self._queue: list[tuple] = []
        self._seq = 0

    # --- wiring ------------------------------------------------------------

    def attach_app(self, node_id: str, app) -> None:
        if node_id not in self.nodes:
            raise FabricError(f"unknown node {node_id}")
        self.apps[node_id] = app

    def advertise(self, prefix: str, node_id: str) -> None:
        key = _components(prefix)
        if not key:
            raise FabricError("cannot advertise an empty prefix")
        owner = self._advertisements.get(key)
        if owner is not None and owner != node_id:
            raise FabricError(f"prefix {prefix} advertised by both {owner} and {node_id}")
        if node_id not in self.nodes:
            raise FabricError(f"unknown node {node_id}")
        self._advertisements[key] = node_id
        self._fib_dirty = True

    def build_fib(self) -> None:
        """Shortest-path next hops toward each advertised prefix.

        Ties break on node id so rebuilt tables are always identical.
        """
        by_owner: dict[str, list[tuple[str, ...]]] = {}
        for prefix, owner in self._advertisements.items():
            by_owner.setdefault(owner, []).append(prefix)
        for node in self.nodes.values():
            node.fib = {}
        for owner, prefixes in sorted(by_owner.items()):
            distance, first_hop = self._paths_toward(owner)
            for node_id, node in self.nodes.items():
                if node_id == owner or node_id not in first_hop:
                    continue
                for prefix in prefixes:
                    node.fib[prefix] = first_hop[node_id]
        self._fib_dirty = False

    def _paths_toward(self, target: str) -> tuple[dict[str, int], dict[str, str]]:
        # Dijkstra rooted at the target; first_hop[n] is n's neighbor on
        # its best path to the target.
        distance = {target: 0}
        first_hop: dict[str, str] = {}
        heap: list[tuple[int, str]] = [(0, target)]
        done: set[str] = set()
        while heap:
            dist, here = heapq.heappop(heap)
            if here in done:
                continue
            done.add(here)
            for neighbor, latency in sorted(self.topology.neighbors[here].items()):
                candidate = dist + latency
                known = distance.get(neighbor)
                if known is None or candidate < known:
                    distance[neighbor] = candidate
                    first_hop[neighbor] = target if here == target else here
                    heapq.heappush(heap, (candidate, neighbor))
        return distance, first_hop

    def override_route(self, node_id: str, prefix: str, next_hop: str) -> None:
        """Point one node's route for a prefix somewhere else (route hijack)."""
        if next_hop not in self.topology.neighbors[node_id]:
            raise FabricError(f"{next_hop} is not a neighbor of {node_id}")
        if self._fib_dirty:
            self.build_fib()
        self.nodes[node_id].fib[_components(prefix)] = next_hop

    # --- scheduling ----------------------------------------------------------

    def _push(self, tick: int, kind: str, node_id: str, payload) -> None:
        if tick < self.now:
            raise FabricError("cannot schedule into the past")
        self._seq += 1
        heapq.heappush(self._queue, (tick, self._seq, kind, node_id, payload))

    def send_interest(self, node_id: str, interest: InterestPacket,
                      at: int | None = None) -> None:
        self._push(self.now if at is None else at, "interest", node_id,
                   (interest, None))

    def schedule_timer(self, node_id: str, at: int, tag: str) -> None:
        self._push(at, "timer", node_id, tag)

    def reply(self, handle: ReplyHandle, data: DataPacket) -> None:
        """Producer answer for one interest; follows the PIT trail back."""
        if handle.face is None:
            self._push(self.now, "deliver", handle.node_id, data)
        else:
            self._transmit(handle.node_id, handle.face, "data", data)

    def _transmit(self, src: str, dst: str, kind: str, packet) -> None:
        latency = self.topology.neighbors[src].get(dst)
        if latency is None:
            raise FabricError(f"no link {src}-{dst}")
        if kind == "data":
            packet = replace(packet, hops=packet.hops + 1)
        self.wiretap.append(WireRecord(tick=self.now, src=src, dst=dst, packet=packet))
        self._push(self.now + latency, kind, dst, (packet, src))

    # --- event log -------------------------------------------------------------

    def _log(self, node_id: str, event: str, packet=None, **extra) -> None:
        entry = {"tick": self.now, "node": node_id, "event": event}
        if packet is not None:
            entry["name"] = packet.name
            entry["index"] = packet.segment_index
            if packet.token is not None:
                entry["token"] = packet.token
        entry.update(extra)
        self.events.append(entry)

    def note(self, node_id: str, event: str, **extra) -> None:
        """Application-level event recorded into the shared log."""
        self._log(node_id, event, **extra)

    # --- execution --------------------------------------------------------------

    def run(self) -> None:
        """Drain the queue; callable again after injecting more events."""
        if self._fib_dirty:
            self.build_fib()
        while self._queue:
            tick, _, kind, node_id, payload = heapq.heappop(self._queue)
            if tick > self.max_ticks:
                raise FabricError(f"simulation passed {self.max_ticks} ticks; "
                                  "likely a forwarding loop")
            self.now = tick
            if kind == "interest":
                interest, from_face = payload
                self._handle_interest(node_id, interest, from_face)
            elif kind == "data":
                data, from_face = payload
                self._handle_data(node_id, data, from_face)
            elif kind == "deliver":
                self._deliver(node_id, payload)
            elif kind == "timer":
                self._log(node_id, "timer", tag=payload)
                self.apps[node_id].on_timer(payload, self.now)

    def _handle_interest(self, node_id: str, interest: InterestPacket,
                         from_face: str | None) -> None:
        node = self.nodes[node_id]
        self._log(node_id, "interest", interest, face=from_face)

        app = self.apps.get(node_id)
        if app is not None and app.owns(interest.name):
            app.on_interest(interest, ReplyHandle(node_id, from_face, interest),
                            self.now)
            return

        if interest.token is None and node.cs is not None:
            cached = node.cs.get(interest.name, interest.segment_index)
            if cached is not None:
                self._log(node_id, "cs_hit", interest)
                served = replace(cached, served_by=node_id, hops=0)
                if from_face is None:
                    self._push(self.now, "deliver", node_id, served)
                else:
                    self._transmit(node_id, from_face, "data", served)
                return

        key = interest.key()
        entry = node.pit.get(key)
        if entry is not None and entry.expiry <= self.now:
            self._log(node_id, "pit_expire", interest)
            del node.pit[key]
            entry = None
        if entry is not None:
            if from_face not in entry.faces:
                entry.faces.append(from_face)
            self._log(node_id, "pit_aggregate", interest)
            return

        next_hop = self._lookup_fib(node, interest.name)
        if next_hop is None or next_hop == from_face:
            self._log(node_id, "drop_no_route", interest)
            return
        node.pit[key] = _PitEntry(faces=[from_face],
                                  expiry=self.now + self.pit_lifetime)
        self._log(node_id, "forward", interest, next_hop=next_hop)
        self._transmit(node_id, next_hop, "interest", interest)

    def _lookup_fib(self, node: _Node, name: str) -> str | None:
        parts = _components(name)
        for length in range(len(parts), 0, -1):
            next_hop = node.fib.get(parts[:length])
            if next_hop is not None:
                return next_hop
        return None

    def _handle_data(self, node_id: str, data: DataPacket,
                     from_face: str | None) -> None:
        node = self.nodes[node_id]
        self._log(node_id, "data", data, face=from_face, served_by=data.served_by)

        entry = node.pit.pop(data.key(), None)
        if entry is None or entry.expiry <= self.now:
            self._log(node_id, "drop_unsolicited", data)
            return

        # Tokened replies answer authenticated exchanges and must never be
        # cached, whatever the producer set on the packet.
        if data.cacheable and data.token is None and node.cs is not None:
            for evicted_name, evicted_index in node.cs.put(data):
                self._log(node_id, "cache_evict", name=evicted_name,
                          index=evicted_index)
            self._log(node_id, "cache_insert", data)

        for face in entry.faces:
            if face is None:
                self._push(self.now, "deliver", node_id, data)
            else:
                self._transmit(node_id, face, "data", data)

    def _deliver(self, node_id: str, data: DataPacket) -> None:
        self._log(node_id, "deliver", data, served_by=data.served_by)
        self.apps[node_id].on_data(data, self.now)

    # --- reporting ---------------------------------------------------------------

    def cache_stats(self) -> dict[str, dict]:
        return {node_id: node.cs.stats() for node_id, node in sorted(self.nodes.items())
                if node.cs is not None}
