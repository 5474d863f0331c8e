"""Discrete-event engine and Ethernet-like topology emulation.

Simulation time is an integer count of picoseconds (``SimTime``). Links
carry per-direction delays and Gaussian jitter truncated at zero; switches
add a residence time and may act as transparent clocks, in which case the
per-hop ingress/egress instants are recorded on the delivery.
"""

from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from weavesim.errors import WeaveError
from weavesim.rng import RngStreams

SimTime = int

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

PS = 1
NS = 1_000
US = 1_000_000
MS = 1_000_000_000
S = 1_000_000_000_000


class NetsimError(WeaveError):
    pass


class SimTimeOverflow(NetsimError):
    pass


class SchedulePast(NetsimError):
    pass


class Disconnected(NetsimError):
    pass


class InvalidFanout(NetsimError):
    pass


class NoPath(NetsimError):
    pass


def check_simtime(t: int) -> SimTime:
    if not INT64_MIN <= t <= INT64_MAX:
        raise SimTimeOverflow(f"{t} ps does not fit in a signed 64-bit SimTime")
    return t


def to_simtime(value: float, unit: int = NS) -> SimTime:
    """Convert ``value`` expressed in ``unit`` (e.g. NS) to integer picoseconds."""
    return check_simtime(int(round(value * unit)))


# ---------------------------------------------------------------- topology


@dataclass(frozen=True)
class Link:
    a: str
    b: str
    delay_fwd: SimTime  # a -> b
    delay_rev: SimTime  # b -> a
    jitter_sigma: SimTime = 0
    infinite_capacity: bool = True

    def __post_init__(self):
        if self.delay_fwd < 0 or self.delay_rev < 0:
            raise ValueError(f"link {self.a}-{self.b}: delays must be >= 0")
        if self.jitter_sigma < 0:
            raise ValueError(f"link {self.a}-{self.b}: jitter must be >= 0")

    @property
    def asymmetry(self) -> SimTime:
        return self.delay_fwd - self.delay_rev

    def delay(self, src: str, dst: str) -> SimTime:
        if (src, dst) == (self.a, self.b):
            return self.delay_fwd
        if (src, dst) == (self.b, self.a):
            return self.delay_rev
        raise KeyError(f"link {self.a}-{self.b} does not join {src}->{dst}")


@dataclass(frozen=True)
class SwitchModel:
    node: str
    residence: SimTime = 0
    residence_jitter: SimTime = 0
    transparent_clock: bool = False

    def __post_init__(self):
        if self.residence < 0 or self.residence_jitter < 0:
            raise ValueError(f"switch {self.node}: residence must be >= 0")


@dataclass(frozen=True)
class LinkTemplate:
    """Parameters stamped onto every link/switch a constructor creates.

    ``asymmetry`` is split evenly: the downstream (a -> b) direction gets
    ``delay + asymmetry/2`` and upstream ``delay - asymmetry/2``.
    """

    delay: SimTime = 500 * NS
    jitter_sigma: SimTime = 0
    asymmetry: SimTime = 0
    residence: SimTime = 0
    residence_jitter: SimTime = 0
    transparent_clock: bool = False

    def link(self, a: str, b: str) -> Link:
        half, rest = divmod(self.asymmetry, 2)
        return Link(a, b, self.delay + half + rest, self.delay - half, self.jitter_sigma)

    def switch(self, node: str) -> SwitchModel:
        return SwitchModel(node, self.residence, self.residence_jitter, self.transparent_clock)


@dataclass
class TopologyGraph:
    nodes: list[str]
    tiles: list[str]
    switches: dict[str, SwitchModel]
    links: list[Link]
    root: str
    _adj: dict[str, dict[str, Link]] = field(default_factory=dict, repr=False)
    _paths: dict[tuple[str, str], tuple[str, ...]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._adj = {n: {} for n in self.nodes}
        for link in self.links:
            self._adj[link.a][link.b] = link
            self._adj[link.b][link.a] = link

    def neighbors(self, node: str) -> list[str]:
        return sorted(self._adj[node])

    def link(self, u: str, v: str) -> Link:
        return self._adj[u][v]

    def is_connected(self) -> bool:
        if not self.nodes:
            return False
        seen, stack = {self.nodes[0]}, [self.nodes[0]]
        while stack:
            for nxt in self._adj[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return len(seen) == len(self.nodes)

    def _mean_cost(self, u: str, v: str) -> int:
        cost = self._adj[u][v].delay(u, v)
        sw = self.switches.get(v)
        return cost + (sw.residence if sw else 0)

    def path(self, src: str, dst: str) -> tuple[str, ...]:
        """Minimum mean-delay path; ties go to the lexicographically smaller node sequence."""
        key = (src, dst)
        cached = self._paths.get(key)
        if cached is not None:
            return cached
        if src not in self._adj or dst not in self._adj:
            raise NoPath(f"unknown endpoint in {src}->{dst}")
        heap = [(0, (src,))]
        settled: dict[str, int] = {}
        while heap:
            cost, route = heapq.heappop(heap)
            node = route[-1]
            if node in settled:
                continue
            settled[node] = cost
            if node == dst:
                self._paths[key] = route
                return route
            for nxt in self._adj[node]:
                if nxt not in settled:
                    heapq.heappush(heap, (cost + self._mean_cost(node, nxt), route + (nxt,)))
        raise NoPath(f"no path {src}->{dst}")


def tile_node(index: int) -> str:
    return f"t{index:03d}"


def build_topology(
    kind: str,
    tiles: Sequence[str],
    template: LinkTemplate = LinkTemplate(),
    fanout: int = 48,
    edges: Sequence[tuple[str, str]] | None = None,
    switches: Sequence[str] = (),
    root: str | None = None,
) -> TopologyGraph:
    """Build a star, tree, mesh or explicit-edge topology over ``tiles``.

    star: one switch ``sw0`` with every tile attached.
    tree: ceil(N/fanout) aggregation switches under a ``root`` switch.
    mesh: ceil(N/fanout) switches, fully meshed, each serving up to
    ``fanout`` tiles; ``sw00`` holds the grandmaster port.
    explicit: ``edges`` over ``tiles`` (plus any named ``switches``).
    """
    tiles = list(tiles)
    if not tiles:
        raise ValueError("topology needs at least one tile")
    if kind in ("tree", "mesh") and fanout < 1:
        raise InvalidFanout(f"fanout must be >= 1, got {fanout}")

    if kind == "star":
        sw = ["sw0"]
        links = [template.link("sw0", t) for t in tiles]
        root_node = "sw0"
    elif kind == "tree":
        n_agg = math.ceil(len(tiles) / fanout)
        width = len(str(n_agg - 1))
        aggs = [f"agg{i:0{width}d}" for i in range(n_agg)]
        sw = ["root"] + aggs
        links = [template.link("root", a) for a in aggs]
        links += [template.link(aggs[i // fanout], t) for i, t in enumerate(tiles)]
        root_node = "root"
    elif kind == "mesh":
        n_sw = math.ceil(len(tiles) / fanout)
        width = max(2, len(str(n_sw - 1)))
        sw = [f"sw{i:0{width}d}" for i in range(n_sw)]
        links = [template.link(sw[i], sw[j]) for i in range(n_sw) for j in range(i + 1, n_sw)]
        links += [template.link(sw[i // fanout], t) for i, t in enumerate(tiles)]
        root_node = sw[0]
    elif kind == "explicit":
        if edges is None:
            raise ValueError("explicit topology needs an edge list")
        sw = list(switches)
        links = [template.link(a, b) for a, b in edges]
        root_node = root or (sw[0] if sw else tiles[0])
        known = set(tiles) | set(sw)
        for link in links:
            for end in (link.a, link.b):
                if end not in known:
                    raise ValueError(f"edge endpoint {end!r} is not a declared node")
    else:
        raise ValueError(f"unknown topology kind {kind!r}")

    graph = TopologyGraph(
        nodes=sw + tiles,
        tiles=tiles,
        switches={s: template.switch(s) for s in sw},
        links=links,
        root=root_node,
    )
    if not graph.is_connected():
        raise Disconnected(f"{kind} topology is not connected")
    return graph


# ------------------------------------------------------------------ engine


@dataclass
class Event:
    due: SimTime
    seq: int
    kind: str
    handler: Callable[["Event"], Any] | None = None
    payload: Any = None


class Engine:
    """Single-threaded event loop ordered by (due, sequence)."""

    def __init__(self):
        self.now: SimTime = 0
        self.processed = 0
        self._queue: list[tuple[int, int, Event]] = []
        self._seq = 0
        self._trace = hashlib.sha256()

    def schedule(self, due: SimTime, handler=None, kind: str = "event", payload=None) -> Event:
        check_simtime(due)
        if due < self.now:
            raise SchedulePast(f"event {kind!r} due at {due} ps, engine is at {self.now} ps")
        event = Event(due, self._seq, kind, handler, payload)
        self._seq += 1
        heapq.heappush(self._queue, (due, event.seq, event))
        return event

    def schedule_in(self, delay: SimTime, handler=None, kind: str = "event", payload=None) -> Event:
        return self.schedule(check_simtime(self.now + delay), handler, kind, payload)

    def run_until(self, t: SimTime) -> int:
        """Process every event due at or before ``t``; return how many ran."""
        check_simtime(t)
        count = 0
        while self._queue and self._queue[0][0] <= t:
            due, seq, event = heapq.heappop(self._queue)
            self.now = due
            self._trace.update(f"{due}:{seq}:{event.kind};".encode())
            if event.handler is not None:
                event.handler(event)
            count += 1
        self.now = max(self.now, t)
        self.processed += count
        return count

    @property
    def pending(self) -> int:
        return len(self._queue)

    def trace_hash(self) -> str:
        return self._trace.copy().hexdigest()


# --------------------------------------------------------------- transport


@dataclass(frozen=True)
class HopStamp:
    node: str
    ingress: SimTime
    egress: SimTime
    transparent: bool


@dataclass(frozen=True)
class Delivery:
    src: str
    dst: str
    sent_at: SimTime
    arrival: SimTime
    path: tuple[str, ...]
    link_delay: SimTime
    residence: SimTime
    hops: tuple[HopStamp, ...]
    payload: Any = None

    @property
    def delay(self) -> SimTime:
        return self.arrival - self.sent_at


def _truncated(mean: int, sigma: int, rng) -> int:
    z = rng.standard_normal()
    return max(0, mean + int(round(sigma * z)))


def transit(
    graph: TopologyGraph, src: str, dst: str, sent_at: SimTime, streams: RngStreams, payload=None
) -> Delivery:
    """Walk the routed path and sample link and residence delays."""
    path = graph.path(src, dst)
    t = sent_at
    link_total = 0
    residence_total = 0
    hops = []
    for i, (u, v) in enumerate(zip(path, path[1:])):
        link = graph.link(u, v)
        d = _truncated(link.delay(u, v), link.jitter_sigma, streams.get("link", u))
        t += d
        link_total += d
        sw = graph.switches.get(v)
        if sw is not None and i < len(path) - 2:
            r = _truncated(sw.residence, sw.residence_jitter, streams.get("switch", v))
            hops.append(HopStamp(v, t, t + r, sw.transparent_clock))
            t += r
            residence_total += r
    return Delivery(src, dst, sent_at, check_simtime(t), path, link_total, residence_total, tuple(hops), payload)


class Network:
    """Binds a topology to an engine; deliveries become scheduled events."""

    def __init__(self, graph: TopologyGraph, engine: Engine, streams: RngStreams):
        self.graph = graph
        self.engine = engine
        self.streams = streams

    def send(self, src: str, dst: str, handler, payload=None, kind: str = "deliver") -> Event:
        delivery = transit(self.graph, src, dst, self.engine.now, self.streams, payload)
        return self.engine.schedule(delivery.arrival, handler, kind, delivery)
