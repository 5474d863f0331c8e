"""Run a synchronization tier over a topology on the event engine."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from weavesim.netsim import MS, NS, US, Engine, Network, SimTime, TopologyGraph
from weavesim.rng import RngStreams
from weavesim.timesync.clock import LocalClock, clock_read
from weavesim.timesync.protocol import (
    SyncMode,
    SyncSession,
    asymmetry_correct,
    dedicated_reference,
    estimate_skew,
    transparent_correction,
    two_way_exchange,
)
from weavesim.timesync.servo import ServoConfig, servo_step

PPS_PERIOD = 1_000_000_000_000


@dataclass(frozen=True)
class SyncConfig:
    mode: SyncMode = SyncMode.MESSAGE_SYNC
    interval: SimTime = 125 * MS
    ts_jitter: float = 8.0 * NS
    # per-link forward-minus-reverse delay the slave assumes (syntonized mode)
    known_asymmetry: float = 0.0
    dedicated_error_sigma: float = 0.0
    kp: float = 0.7
    ki: float = 0.3
    boundary_clocks: bool = False
    turnaround: SimTime = 10 * US
    initial_offset_spread: float = 100.0 * US
    initial_skew_spread: float = 20e-6
    drift_rw_sigma: float = 1e-9

    @property
    def servo(self) -> ServoConfig:
        return ServoConfig(self.kp, self.ki, self.interval)


@dataclass
class SyncResult:
    nodes: list[str]
    sample_times: np.ndarray
    errors: np.ndarray  # (samples, nodes), ps, after warm-up
    trace_hash: str
    events: int
    masters: dict[str, str] = field(default_factory=dict)

    def abs_errors(self) -> np.ndarray:
        return np.abs(self.errors)

    def p99(self) -> float:
        return float(np.percentile(self.abs_errors(), 99)) if self.errors.size else 0.0

    def per_node_p99(self) -> dict[str, float]:
        return {
            n: float(np.percentile(np.abs(self.errors[:, i]), 99)) for i, n in enumerate(self.nodes)
        }


def sync_hierarchy(graph: TopologyGraph, boundary_clocks: bool) -> dict[str, str]:
    """Map every disciplined node to the master it exchanges messages with."""
    masters: dict[str, str] = {}
    for tile in graph.tiles:
        if tile == graph.root:
            continue
        route = graph.path(graph.root, tile)
        upstream = graph.root
        for node in route[1:-1]:
            if boundary_clocks and node in graph.switches:
                masters.setdefault(node, upstream)
                upstream = node
        masters[tile] = upstream
    return masters


def _levels(masters: dict[str, str], root: str) -> dict[str, int]:
    levels = {root: 0}

    def level(n):
        if n not in levels:
            levels[n] = level(masters[n]) + 1
        return levels[n]

    for n in masters:
        level(n)
    return levels


def simulate_sync(
    graph: TopologyGraph,
    config: SyncConfig,
    duration: SimTime,
    seed: int,
    warmup_intervals: int = 50,
) -> SyncResult:
    """Discipline every tile clock to the grandmaster at ``graph.root``.

    Clock error is sampled (without timestamp noise) for every tile at the
    start of each sync interval, before that interval's exchanges.
    """
    mode = SyncMode(config.mode)
    streams = RngStreams(seed)
    engine = Engine()
    net = Network(graph, engine, streams)
    masters = sync_hierarchy(graph, config.boundary_clocks)
    levels = _levels(masters, graph.root)
    depth = max(levels.values(), default=1)
    stagger = config.interval // (depth + 1)

    clocks: dict[str, LocalClock] = {
        graph.root: LocalClock(
            ts_jitter_sigma=config.ts_jitter,
            rng=streams.get("ts", graph.root),
            walk_rng=streams.get("walk", graph.root),
        )
    }
    for node in sorted(masters):
        init = streams.get("init", node)
        clocks[node] = LocalClock(
            offset=float(init.uniform(-config.initial_offset_spread, config.initial_offset_spread)),
            skew=float(init.uniform(-config.initial_skew_spread, config.initial_skew_spread)),
            drift_rw_sigma=config.drift_rw_sigma,
            ts_jitter_sigma=config.ts_jitter,
            rng=streams.get("ts", node),
            walk_rng=streams.get("walk", node),
        )

    sampled = [t for t in graph.tiles if t in masters]
    n_intervals = int(duration // config.interval)
    times: list[int] = []
    rows: list[list[float]] = []
    last_sync: dict[str, tuple[float, float]] = {}
    servo = config.servo
    by_level: dict[int, list[str]] = {}
    for slave in sorted(masters, key=lambda n: (levels[n], n)):
        by_level.setdefault(levels[slave], []).append(slave)

    def start_exchange(slave: str):
        master = masters[slave]
        session = SyncSession(master, slave, interval=config.interval)
        session.t1 = clock_read(clocks[master], engine.now)
        t1_raw = session.t1 - clocks[master].steps_total
        net.send(master, slave, on_sync, payload=(session, t1_raw), kind="sync")

    def on_sync(event):
        delivery = event.payload
        session, t1_raw = delivery.payload
        slave_clock = clocks[session.slave]
        session.t2 = clock_read(slave_clock, engine.now)
        transparent_correction(session, delivery.hops, "fwd")
        if mode is SyncMode.MESSAGE_SYNC_SYNTONIZED:
            t2_raw = session.t2 - slave_clock.steps_total - session.correction_fwd
            prev = last_sync.get(session.slave)
            if prev is not None:
                skew = estimate_skew(prev[0], prev[1], t1_raw, t2_raw)
                slave_clock.adjust_frequency(engine.now, -skew)
            last_sync[session.slave] = (t1_raw, t2_raw)
        engine.schedule_in(config.turnaround, send_delay_req, "delay_req_tx", (session, len(delivery.path) - 1))

    def send_delay_req(event):
        session, n_links = event.payload
        session.t3 = clock_read(clocks[session.slave], engine.now)
        net.send(session.slave, session.master, on_delay_req, payload=(session, n_links), kind="delay_req")

    def on_delay_req(event):
        delivery = event.payload
        session, n_links = delivery.payload
        session.t4 = clock_read(clocks[session.master], engine.now)
        transparent_correction(session, delivery.hops, "rev")
        offset, _ = two_way_exchange(session)
        if mode is SyncMode.MESSAGE_SYNC_SYNTONIZED:
            offset = asymmetry_correct(offset, config.known_asymmetry * n_links)
        servo_step(clocks[session.slave], offset, servo, engine.now)

    def start_level(level: int):
        for slave in by_level[level]:
            start_exchange(slave)

    def level_tick(event):
        start_level(event.payload)

    def tick(event):
        k = event.payload
        if k >= warmup_intervals:
            times.append(engine.now)
            rows.append([clocks[n].error(engine.now) for n in sampled])
        if mode in (SyncMode.MESSAGE_SYNC, SyncMode.MESSAGE_SYNC_SYNTONIZED):
            for level in sorted(by_level):
                if level == 1:
                    start_level(1)
                else:
                    engine.schedule_in((level - 1) * stagger, level_tick, "level_tick", level)
        if k + 1 < n_intervals:
            engine.schedule((k + 1) * config.interval, tick, "tick", k + 1)

    def pps(event):
        for node in sorted(masters):
            dedicated_reference(
                clocks[node], mode, engine.now, config.dedicated_error_sigma, streams.get("dedicated", node)
            )
        nxt = engine.now + PPS_PERIOD
        if nxt < duration:
            engine.schedule(nxt, pps, "pps")

    if mode is SyncMode.DEDICATED:
        engine.schedule(0, pps, "pps")
    if n_intervals > 0:
        engine.schedule(0, tick, "tick", 0)
    engine.run_until(duration)

    errors = np.array(rows, dtype=float).reshape(len(rows), len(sampled))
    return SyncResult(sampled, np.array(times, dtype=np.int64), errors, engine.trace_hash(), engine.processed, masters)
