"""Experiment dispatch: one scenario plus one seed in, one RunReport out."""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field

import numpy as np

from weavesim import facility, phy, rover
from weavesim.errors import WeaveError
from weavesim.netsim import MS, NS, S, US, LinkTemplate, build_topology, tile_node, to_simtime
from weavesim.orchestrator.scenario import Scenario, check_number_param, room_spec
from weavesim.positioning import (
    Beacon,
    RansacConfig,
    evaluate_scenario,
    grid_points,
    toa_estimator,
    vlp_estimator,
)
from weavesim.rng import generator
from weavesim.timesync import SyncConfig, SyncResult, simulate_sync

UNITS = frozenset({"s", "ns", "m", "W", "Wh", "J", "dB", "ratio", "count"})


class RunError(WeaveError):
    """A module error raised while running an experiment, with run context."""


class UnknownParameter(WeaveError):
    pass


@dataclass(frozen=True)
class MetricRecord:
    run_id: str
    seed: int
    experiment: str
    metric: str
    value: float
    unit: str
    sim_time_ps: int

    def __post_init__(self):
        if self.unit not in UNITS:
            raise ValueError(f"unit {self.unit!r} not in {sorted(UNITS)}")


@dataclass
class RunReport:
    run_id: str
    scenario_hash: str
    seed: int
    experiment: str
    records: list[MetricRecord]
    trace_hash: str
    wall_clock_s: float = field(default=0.0, compare=False)

    def metric(self, name: str) -> float:
        for r in self.records:
            if r.metric == name:
                return r.value
        raise KeyError(name)

    def metrics(self) -> dict[str, float]:
        return {r.metric: r.value for r in self.records}


# ------------------------------------------------------------ builders


def topology(sc: Scenario, n_tiles: int | None = None):
    t = sc["topology"]
    template = LinkTemplate(
        delay=to_simtime(t["link_delay_ns"], NS),
        jitter_sigma=to_simtime(t["link_jitter_ns"], NS),
        asymmetry=to_simtime(t["asymmetry_ns"], NS),
        residence=to_simtime(t["residence_ns"], NS),
        residence_jitter=to_simtime(t["residence_jitter_ns"], NS),
        transparent_clock=t["transparent_clock"],
    )
    n = t["n_tiles"] if n_tiles is None else n_tiles
    return build_topology(t["kind"], [tile_node(i) for i in range(n)], template, fanout=t["fanout"])


def sync_config(sc: Scenario) -> SyncConfig:
    s = sc["sync"]
    return SyncConfig(
        mode=s["mode"],
        interval=to_simtime(s["interval_ms"], MS),
        ts_jitter=s["ts_jitter_ns"] * NS,
        known_asymmetry=s["known_asymmetry_ns"] * NS,
        dedicated_error_sigma=s["dedicated_error_ns"] * NS,
        kp=s["kp"],
        ki=s["ki"],
        boundary_clocks=s["boundary_clocks"],
        turnaround=to_simtime(s["turnaround_us"], US),
        initial_offset_spread=s["initial_offset_us"] * US,
        initial_skew_spread=s["initial_skew_ppm"] * 1e-6,
        drift_rw_sigma=s["drift_rw"],
    )


def duration_ps(sc: Scenario) -> int:
    return to_simtime(sc["experiment"]["duration_s"], S)


def run_sync(sc: Scenario, seed: int, n_tiles: int | None = None) -> SyncResult:
    return simulate_sync(
        topology(sc, n_tiles), sync_config(sc), duration_ps(sc), seed, sc["sync"]["warmup_intervals"]
    )


def rover_config(sc: Scenario) -> rover.RoverConfig:
    r = sc["rover"]
    return rover.RoverConfig(
        lift_min_m=r["lift_min_m"],
        lift_max_m=r["lift_max_m"],
        localization_precision_m=r["localization_precision_m"],
        battery_wh=r["battery_wh"],
        footprint_m=r["footprint_m"],
        drive_power_w=r["drive_power_w"],
        speed_m_s=r["speed_m_s"],
    )


def channel_model(sc: Scenario) -> phy.ChannelModel:
    p = sc["phy"]
    return phy.ChannelModel(p["model"], p["carrier_hz"], p["exponent"], p["reference_distance_m"])


def beacons(sc: Scenario, tiles: list[facility.Tile] | None = None) -> list[Beacon]:
    """Resolve beacon entries (explicit or tile-mounted) to world positions."""
    pos = sc["positioning"]
    tiles = tiles if tiles is not None else facility.build_room(room_spec(sc.data))
    out = []
    for b in pos["beacons"]:
        if "tile" in b:
            xyz = facility.mount_world_position(tiles[b["tile"]], *b["mount"])
        else:
            xyz = b["position"]
        out.append(
            Beacon(
                b["id"],
                tuple(float(c) for c in xyz),
                pos["technology"],
                lambertian_order=pos["lambertian_order"],
                power_w=pos["led_power_w"],
            )
        )
    k = pos["active_beacons"]
    return out[:k] if k else out


def eval_points(sc: Scenario) -> np.ndarray:
    pos, room = sc["positioning"], sc["room"]
    if pos["points"]:
        return np.array(pos["points"], float)
    return grid_points(room["length_m"], room["width_m"], pos["device_z_m"], pos["grid_spacing_m"], pos["grid_margin_m"])


# ------------------------------------------------------------ experiments


def _hash(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(repr(p).encode())
        h.update(b"\x00")
    return h.hexdigest()


def _facility_metrics(sc: Scenario):
    tiles = facility.build_room(room_spec(sc.data))
    pw = sc["power"]
    plan = facility.plan_power(tiles, pw["per_tile_draw_w"], pw["port_cap_w"], pw["aggregate_cap_w"], pw["port_count_cap"])
    return tiles, [
        ("facility.tiles", len(tiles), "count"),
        ("facility.power_total", plan.total_w, "W"),
        ("facility.power_headroom", pw["aggregate_cap_w"] - plan.total_w, "W"),
    ]


def _offset_metrics(result: SyncResult, per_node: bool):
    a = result.abs_errors() / NS
    out = [
        ("offset_abs_p50", float(np.percentile(a, 50)) if a.size else 0.0, "ns"),
        ("offset_abs_p99", result.p99() / NS, "ns"),
        ("offset_abs_max", float(a.max()) if a.size else 0.0, "ns"),
        ("offset_abs_mean", float(a.mean()) if a.size else 0.0, "ns"),
        ("samples", result.errors.shape[0], "count"),
        ("events", result.events, "count"),
    ]
    if per_node:
        out += [(f"offset_abs_p99.{n}", v / NS, "ns") for n, v in result.per_node_p99().items()]
    return out


def _sync_accuracy(sc, seed, tiles):
    result = run_sync(sc, seed)
    return _offset_metrics(result, per_node=True), result.trace_hash, duration_ps(sc)


def _coherent_gain(sc, seed, tiles):
    n = sc["topology"]["n_tiles"]
    result = run_sync(sc, seed)
    phases = phy.phase_error_from_clock(result.errors, sc["phy"]["carrier_hz"])
    rng = generator(seed, "coherent_gain", "channels")
    h = np.exp(1j * rng.uniform(-np.pi, np.pi, n))
    gains = np.atleast_1d(phy.coherent_receive_power(phy.conjugate_weights(h), h, phases))
    mean = float(gains.mean())
    stderr = float(gains.std(ddof=1) / math.sqrt(len(gains))) if len(gains) > 1 else 0.0
    metrics = [
        ("gain_mean", mean, "ratio"),
        ("gain_stderr", stderr, "ratio"),
        ("gain_coherent_limit", float(n * n), "ratio"),
        ("gain_incoherent_limit", float(n), "ratio"),
        ("gain_mean_db", 10 * math.log10(mean) if mean > 0 else -math.inf, "dB"),
    ] + _offset_metrics(result, per_node=False)
    return metrics, result.trace_hash, duration_ps(sc)


def _calibration_pairs(chains, positions, model, pattern):
    n = len(chains)
    pairs = [(0, j) for j in range(1, n)] if pattern == "star" else [(i, j) for i in range(n) for j in range(i + 1, n)]
    meas = {}
    for i, j in pairs:
        h = phy.channel_gain(positions[i], positions[j], model)
        meas[(i, j)] = chains[i].tx_gain * h * chains[j].rx_gain
        meas[(j, i)] = chains[j].tx_gain * h * chains[i].rx_gain
    return meas


def _wpt_focus(sc, seed, tiles):
    p = sc["phy"]
    n = sc["topology"]["n_tiles"]
    model = channel_model(sc)
    positions = np.array([t.center for t in tiles[:n]], float)
    device = np.array(p["device"], float)
    h = phy.channel_gains(positions, device, model)
    mags = (p["chain_mag_min"], p["chain_mag_max"])
    chains = phy.random_chains(n, generator(seed, "wpt", "chains"), mags, p["carrier_hz"])
    dev_chain = phy.random_chains(1, generator(seed, "wpt", "device"), mags, p["carrier_hz"])[0]
    t = np.array([c.tx_gain for c in chains])
    r = np.array([c.rx_gain for c in chains])

    if n > 1:
        cal = phy.reciprocity_calibrate(_calibration_pairs(chains, positions, model, p["calibration_pairs"]), 0)
        cal = np.array([cal[i] for i in range(n)])
    else:
        cal = np.ones(1, complex)
    est = phy.uplink_pilot_estimate(
        dev_chain.tx_gain, r, h, p["pilot_noise_sigma"], generator(seed, "wpt", "pilot")
    )
    w = phy.conjugate_weights(est, cal)
    downlink = t * h * dev_chain.rx_gain

    result = run_sync(sc, seed, n)
    phases = phy.phase_error_from_clock(result.errors, p["carrier_hz"])
    p_tile = phy.dbm_to_w(p["tx_power_dbm"])
    amp = np.abs((w * downlink * np.exp(1j * phases)).sum(axis=-1)) ** 2
    received = float(p_tile * amp.mean())
    single = float(p_tile * np.mean(np.abs(downlink) ** 2))
    try:
        harvest = phy.wpt_harvest(received, p["harvest_s"], p["harvest_efficiency"], p["energy_target_j"])
        ttt = harvest.time_to_target_s
        energy = harvest.energy_j
    except phy.ZeroPower:
        energy, ttt = 0.0, math.inf
    metrics = [
        ("received_power", received, "W"),
        ("single_tile_power", single, "W"),
        ("focus_gain", received / single, "ratio"),
        ("focus_gain_db", 10 * math.log10(received / single), "dB"),
        ("harvested_energy", energy, "J"),
        ("time_to_target", ttt, "s"),
        ("tiles", n, "count"),
    ] + _offset_metrics(result, per_node=False)
    return metrics, result.trace_hash, duration_ps(sc)


def _positioning(sc, seed, tiles):
    pos = sc["positioning"]
    bs = beacons(sc, tiles)
    if pos["technology"] == "vlp":
        est = vlp_estimator(bs, pos["vlp_rel_noise"], pos["device_z_m"], pos["rx_area_m2"])
    else:
        ransac = RansacConfig(
            iterations=pos["ransac_iterations"],
            noise_sigma=max(pos["range_sigma_m"], 1e-6),
            threshold_sigmas=pos["ransac_threshold_sigmas"],
        )
        active = {b.id for b in bs}
        nlos = {k: v for k, v in pos["nlos"].items() if k in active}
        est = toa_estimator(bs, pos["range_sigma_m"], pos["estimator"], nlos, pos["clock_bias_s"], ransac)
    points = eval_points(sc)
    stats = evaluate_scenario(points, est, seed, "positioning")
    metrics = [
        ("error_median", stats.median, "m"),
        ("error_p95", stats.p95, "m"),
        ("failures", stats.failures, "count"),
        ("points", len(points), "count"),
        ("beacons", len(bs), "count"),
    ]
    return metrics, _hash(stats.errors.tolist(), stats.failures), 0


def _rover(sc, seed, tiles):
    r, room = sc["rover"], sc["room"]
    cfg = rover_config(sc)
    plan = rover.plan_grid(room["length_m"], room["width_m"], r["spacing_m"], r["heights_m"], cfg)
    boxes = [rover.Box(*b) for b in r["obstacles"]]
    if boxes:
        plan = rover.route_avoiding(plan, room["length_m"], room["width_m"], boxes, cfg)
    try:
        rover.energy_feasible(plan, cfg)
        feasible, shortfall = 1, 0.0
    except rover.InsufficientBattery as e:
        feasible, shortfall = 0, e.shortfall_wh
    metrics = [
        ("waypoints", len(plan.waypoints), "count"),
        ("measurements", len(plan.waypoints) * len(plan.heights), "count"),
        ("unreachable", len(plan.unreachable), "count"),
        ("distance", plan.distance_m, "m"),
        ("energy", plan.energy_wh, "Wh"),
        ("drive_time", plan.distance_m / cfg.speed_m_s, "s"),
        ("feasible", feasible, "count"),
        ("battery_shortfall", shortfall, "Wh"),
    ]
    return metrics, _hash(plan.path, plan.unreachable), 0


DISPATCH = {
    "sync_accuracy": _sync_accuracy,
    "coherent_gain_vs_sync": _coherent_gain,
    "wpt_focus": _wpt_focus,
    "positioning_eval": _positioning,
    "rover_plan": _rover,
}


def run_id(scenario: Scenario, seed: int) -> str:
    return f"{scenario.hash[:12]}-s{seed}"


def run(scenario: Scenario, seed: int | None = None) -> RunReport:
    """Run the scenario's experiment once; ``seed`` defaults to its first seed."""
    seed = scenario.seeds[0] if seed is None else int(seed)
    kind = scenario.kind
    rid = run_id(scenario, seed)
    start = time.perf_counter()
    try:
        tiles, fac = _facility_metrics(scenario)
        metrics, trace, sim_t = DISPATCH[kind](scenario, seed, tiles)
    except (WeaveError, ValueError) as e:
        raise RunError(f"run {rid} ({kind}, seed {seed}): {type(e).__name__}: {e}") from e
    records = [MetricRecord(rid, seed, kind, name, float(v), unit, sim_t) for name, v, unit in fac + metrics]
    return RunReport(rid, scenario.hash, seed, kind, records, trace, time.perf_counter() - start)


def run_all(scenario: Scenario) -> list[RunReport]:
    return [run(scenario, s) for s in scenario.seeds]


@dataclass
class SweepPoint:
    param: str
    value: float
    report: RunReport


def sweep(scenario: Scenario, param: str, values, seeds=None) -> list[SweepPoint]:
    """One run per (value, seed), ordered by value then seed."""
    try:
        coerce = check_number_param(param)
    except WeaveError as e:
        raise UnknownParameter(f"{param}: {e}") from None
    seeds = scenario.seeds if seeds is None else list(seeds)
    out = []
    for v in values:
        v = coerce(v)
        sc = scenario.replace(param, v)
        out.extend(SweepPoint(param, v, run(sc, s)) for s in seeds)
    return out
