"""Scenario files: schema, defaults with provenance, parsing and validation.

A scenario is a TOML document restricted to the sections and keys listed in
SCHEMA. Every default is tagged as either a published facility constant
("published") or a choice made for this simulator ("decision").
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import tomli
import tomli_w

from weavesim import facility
from weavesim.errors import WeaveError

EXPERIMENT_KINDS = ("sync_accuracy", "coherent_gain_vs_sync", "wpt_focus", "positioning_eval", "rover_plan")


class ScenarioError(WeaveError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class ScenarioSyntaxError(ScenarioError):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"line {line}, column {col}", message)
        self.line = line
        self.col = col


class UnknownKey(ScenarioError):
    pass


class CrossRefError(ScenarioError):
    pass


class RangeError(ScenarioError):
    pass


@dataclass(frozen=True)
class Field:
    default: Any
    kind: str  # float | int | bool | str | floats | ints | table | beacons | boxes
    source: str  # published | decision
    doc: str
    unit: str = ""
    lo: float | None = None
    hi: float | None = None
    lo_open: bool = False
    choices: tuple | None = None
    length: int | None = None
    min_len: int = 0


P, D = "published", "decision"

DEFAULT_BEACONS = [
    {"id": "b00", "position": [0.1, 0.1, 2.3]},
    {"id": "b01", "position": [7.9, 0.1, 1.0]},
    {"id": "b02", "position": [7.9, 3.9, 2.3]},
    {"id": "b03", "position": [0.1, 3.9, 1.0]},
]

SCHEMA: dict[str, dict[str, Field]] = {
    "room": {
        "length_m": Field(8.0, "float", P, "room length", "m", 0, None, True),
        "width_m": Field(4.0, "float", P, "room width", "m", 0, None, True),
        "height_m": Field(2.4, "float", P, "room height", "m", 0, None, True),
    },
    "tiles": {
        "wall_a": Field(24, "int", D, "tiles on the y=0 wall", "count", 0),
        "wall_b": Field(24, "int", D, "tiles on the y=W wall", "count", 0),
        "ceiling": Field(36, "int", D, "ceiling tiles", "count", 0),
        "floor": Field(36, "int", D, "floor tiles", "count", 0),
    },
    "power": {
        "per_tile_draw_w": Field(30.0, "float", D, "PoE draw of every tile", "W", 0),
        "port_cap_w": Field(90.0, "float", P, "per-port PoE limit", "W", 0, None, True),
        "aggregate_cap_w": Field(9000.0, "float", P, "total PoE budget", "W", 0, None, True),
        "port_count_cap": Field(156, "int", P, "powered-device ports", "count", 0),
    },
    "daq": {
        "sample_rate_hz": Field(1.25e6, "float", P, "DAQ sample rate", "Hz", 0, None, True),
        "bits": Field(16, "int", P, "ADC resolution", "bit", 1, 32),
        "full_scale_v": Field(1.0, "float", D, "ADC full scale (+-)", "V", 0, None, True),
        "channels": Field(192, "int", P, "differential channels", "count", 1),
    },
    "topology": {
        "kind": Field("tree", "str", D, "backbone shape", choices=("star", "tree", "mesh")),
        "n_tiles": Field(120, "int", D, "tiles attached to the backbone", "count", 1),
        "fanout": Field(8, "int", D, "tiles per aggregation switch", "count", 1),
        "link_delay_ns": Field(500.0, "float", D, "nominal one-way link delay", "ns", 0),
        "link_jitter_ns": Field(0.0, "float", D, "link delay jitter sigma", "ns", 0),
        "asymmetry_ns": Field(0.0, "float", D, "per-link forward minus reverse delay", "ns"),
        "residence_ns": Field(2000.0, "float", D, "switch residence time", "ns", 0),
        "residence_jitter_ns": Field(0.0, "float", D, "switch residence jitter sigma", "ns", 0),
        "transparent_clock": Field(False, "bool", D, "switches correct for residence"),
    },
    "sync": {
        "mode": Field(
            "message_sync",
            "str",
            D,
            "synchronization tier",
            choices=("message_sync", "message_sync_syntonized", "dedicated", "free_running"),
        ),
        "interval_ms": Field(125.0, "float", D, "sync interval", "ms", 0, None, True),
        "ts_jitter_ns": Field(8.0, "float", D, "timestamp jitter sigma", "ns", 0),
        "known_asymmetry_ns": Field(0.0, "float", D, "per-link asymmetry known to slaves", "ns"),
        "dedicated_error_ns": Field(0.0, "float", D, "dedicated-reference residual sigma", "ns", 0),
        "kp": Field(0.7, "float", D, "servo proportional gain", "", 0, 2),
        "ki": Field(0.3, "float", D, "servo integral gain", "", 0, 2),
        "boundary_clocks": Field(False, "bool", D, "switches act as boundary clocks"),
        "turnaround_us": Field(10.0, "float", D, "Sync to Delay_Req gap", "us", 0),
        "initial_offset_us": Field(100.0, "float", D, "initial offset spread (+-)", "us", 0),
        "initial_skew_ppm": Field(20.0, "float", D, "initial skew spread (+-)", "ppm", 0, 1000),
        "drift_rw": Field(1e-9, "float", D, "skew random walk per sqrt(s)", "", 0),
        "warmup_intervals": Field(50, "int", D, "intervals discarded before sampling", "count", 0),
    },
    "phy": {
        "carrier_hz": Field(3.8e9, "float", D, "carrier frequency", "Hz", 70e6, 6e9),
        "bandwidth_hz": Field(56e6, "float", P, "SDR bandwidth (metadata only)", "Hz", 0, None, True),
        "model": Field("free_space", "str", D, "channel model", choices=("free_space", "log_distance")),
        "exponent": Field(2.0, "float", D, "log-distance exponent", "", 1),
        "reference_distance_m": Field(1.0, "float", D, "log-distance anchor", "m", 0, None, True),
        "chain_mag_min": Field(0.5, "float", D, "RF chain gain magnitude lower bound", "", 0, None, True),
        "chain_mag_max": Field(2.0, "float", D, "RF chain gain magnitude upper bound", "", 0, None, True),
        "calibration_pairs": Field("star", "str", D, "inter-tile calibration links", choices=("star", "complete")),
        "pilot_noise_sigma": Field(0.0, "float", D, "uplink pilot noise sigma", "", 0),
        "tx_power_dbm": Field(20.0, "float", P, "per-tile transmit power", "dBm", None, 20.0),
        "harvest_efficiency": Field(0.5, "float", D, "RF-to-DC efficiency", "", 0, 1),
        "harvest_s": Field(1.0, "float", D, "harvesting window", "s", 0),
        "energy_target_j": Field(362.45e-6, "float", P, "device energy budget", "J", 0),
        "device": Field([4.0, 2.0, 1.0], "floats", D, "energy-neutral device position", "m", length=3),
    },
    "positioning": {
        "technology": Field("acoustic", "str", D, "ranging technology", choices=("acoustic", "rf", "vlp")),
        "beacons": Field(DEFAULT_BEACONS, "beacons", D, "beacon list ({id, position} or {id, tile, mount})"),
        "active_beacons": Field(0, "int", D, "use the first k beacons (0 = all)", "count", 0),
        "estimator": Field("ls", "str", D, "position estimator", choices=("ls", "ransac", "hybrid")),
        "range_sigma_m": Field(0.43, "float", D, "range noise sigma (calibrated operating point)", "m", 0),
        "clock_bias_s": Field(0.0, "float", D, "device clock bias (hybrid only)", "s"),
        "nlos": Field({}, "table", D, "beacon id -> excess path length", "m"),
        "ransac_iterations": Field(200, "int", D, "RANSAC iteration budget", "count", 1),
        "ransac_threshold_sigmas": Field(3.0, "float", D, "inlier threshold in sigmas", "", 0, None, True),
        "grid_spacing_m": Field(0.5, "float", D, "evaluation grid spacing", "m", 0, None, True),
        "grid_margin_m": Field(0.5, "float", D, "evaluation grid wall margin", "m", 0),
        "device_z_m": Field(1.0, "float", D, "evaluation height", "m", 0),
        "points": Field([], "points", D, "explicit evaluation points (empty = grid)", "m"),
        "vlp_rel_noise": Field(0.05, "float", D, "VLP multiplicative RSS noise", "", 0, 1),
        "lambertian_order": Field(1.0, "float", D, "LED Lambertian order", "", 1),
        "led_power_w": Field(1.0, "float", D, "LED optical power", "W", 0, None, True),
        "rx_area_m2": Field(1e-4, "float", D, "photodiode area", "m2", 0, None, True),
    },
    "rover": {
        "spacing_m": Field(1.0, "float", D, "sampling grid spacing", "m", 0, None, True),
        "heights_m": Field([1.0], "floats", D, "measurement heights per waypoint", "m", min_len=1),
        "obstacles": Field([], "boxes", D, "floor boxes [x_min, y_min, x_max, y_max]", "m"),
        "footprint_m": Field(0.5, "float", D, "rover square footprint", "m", 0, None, True),
        "drive_power_w": Field(50.0, "float", D, "drive power draw", "W", 0, None, True),
        "speed_m_s": Field(0.25, "float", D, "drive speed", "m/s", 0, None, True),
        "battery_wh": Field(170.0, "float", P, "battery capacity", "Wh", 0),
        "lift_min_m": Field(0.55, "float", P, "scissor lift lower limit", "m", 0),
        "lift_max_m": Field(1.85, "float", P, "scissor lift upper limit", "m", 0),
        "localization_precision_m": Field(0.02, "float", P, "localization precision", "m", 0),
    },
    "experiment": {
        "kind": Field("sync_accuracy", "str", D, "experiment to run", choices=EXPERIMENT_KINDS),
        "seeds": Field([0], "ints", D, "seeds run by default", min_len=1),
        "duration_s": Field(31.25, "float", D, "simulated time for engine experiments", "s", 0, None, True),
    },
}


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_number(path: str, f: Field, v):
    if not math.isfinite(v):
        raise RangeError(path, f"must be finite, got {v}")
    if f.lo is not None and (v <= f.lo if f.lo_open else v < f.lo):
        raise RangeError(path, f"must be {'>' if f.lo_open else '>='} {f.lo}, got {v}")
    if f.hi is not None and v > f.hi:
        raise RangeError(path, f"must be <= {f.hi}, got {v}")


def _float(path: str, v) -> float:
    if not _is_number(v):
        raise RangeError(path, f"expected a number, got {type(v).__name__}")
    return float(v)


def _int(path: str, v) -> int:
    if isinstance(v, float) and v.is_integer():
        v = int(v)
    if not isinstance(v, int) or isinstance(v, bool):
        raise RangeError(path, f"expected an integer, got {v!r}")
    return v


def _vector(path: str, v, n: int | None = None) -> list[float]:
    if not isinstance(v, list):
        raise RangeError(path, "expected an array of numbers")
    out = [_float(f"{path}[{i}]", x) for i, x in enumerate(v)]
    if n is not None and len(out) != n:
        raise RangeError(path, f"expected {n} numbers, got {len(out)}")
    return out


def _beacons(path: str, v) -> list[dict]:
    if not isinstance(v, list):
        raise RangeError(path, "expected an array of tables")
    out, seen = [], set()
    for i, b in enumerate(v):
        p = f"{path}[{i}]"
        if not isinstance(b, dict):
            raise RangeError(p, "expected a table")
        for k in b:
            if k not in ("id", "position", "tile", "mount"):
                raise UnknownKey(f"{p}.{k}", "unknown beacon key")
        if not isinstance(b.get("id"), str) or not b["id"]:
            raise RangeError(f"{p}.id", "beacon needs a string id")
        if b["id"] in seen:
            raise RangeError(f"{p}.id", f"duplicate beacon id {b['id']!r}")
        seen.add(b["id"])
        if ("position" in b) == ("tile" in b or "mount" in b):
            raise RangeError(p, "give either position or tile + mount")
        if "position" in b:
            out.append({"id": b["id"], "position": _vector(f"{p}.position", b["position"], 3)})
        else:
            if "tile" not in b or "mount" not in b:
                raise RangeError(p, "tile and mount must be given together")
            mount = b["mount"]
            if not isinstance(mount, list) or len(mount) != 2:
                raise RangeError(f"{p}.mount", "expected [u, v]")
            out.append(
                {
                    "id": b["id"],
                    "tile": _int(f"{p}.tile", b["tile"]),
                    "mount": [_int(f"{p}.mount[{j}]", m) for j, m in enumerate(mount)],
                }
            )
    return out


def _coerce(path: str, f: Field, v):
    k = f.kind
    if k == "float":
        v = _float(path, v)
        _check_number(path, f, v)
    elif k == "int":
        v = _int(path, v)
        _check_number(path, f, v)
    elif k == "bool":
        if not isinstance(v, bool):
            raise RangeError(path, f"expected true or false, got {v!r}")
    elif k == "str":
        if not isinstance(v, str):
            raise RangeError(path, f"expected a string, got {v!r}")
        if f.choices and v not in f.choices:
            raise RangeError(path, f"must be one of {', '.join(f.choices)}; got {v!r}")
    elif k == "floats":
        v = _vector(path, v, f.length)
        for i, x in enumerate(v):
            _check_number(f"{path}[{i}]", f, x)
    elif k == "ints":
        if not isinstance(v, list):
            raise RangeError(path, "expected an array of integers")
        v = [_int(f"{path}[{i}]", x) for i, x in enumerate(v)]
    elif k == "table":
        if not isinstance(v, dict):
            raise RangeError(path, "expected a table")
        v = {str(key): _float(f"{path}.{key}", x) for key, x in v.items()}
        for key, x in v.items():
            if x < 0:
                raise RangeError(f"{path}.{key}", "must be >= 0")
    elif k == "beacons":
        v = _beacons(path, v)
    elif k == "points":
        if not isinstance(v, list):
            raise RangeError(path, "expected an array of [x, y, z]")
        v = [_vector(f"{path}[{i}]", p, 3) for i, p in enumerate(v)]
    elif k == "boxes":
        if not isinstance(v, list):
            raise RangeError(path, "expected an array of [x_min, y_min, x_max, y_max]")
        v = [_vector(f"{path}[{i}]", b, 4) for i, b in enumerate(v)]
        for i, b in enumerate(v):
            if b[0] > b[2] or b[1] > b[3]:
                raise RangeError(f"{path}[{i}]", "min corner exceeds max corner")
    else:  # pragma: no cover
        raise AssertionError(k)
    if isinstance(v, list) and len(v) < f.min_len:
        raise RangeError(path, f"needs at least {f.min_len} entries")
    return v


def _inside(p, room) -> bool:
    return all(0 <= c <= lim for c, lim in zip(p, (room["length_m"], room["width_m"], room["height_m"])))


def room_spec(data: dict) -> facility.RoomSpec:
    r, t = data["room"], data["tiles"]
    return facility.RoomSpec(r["length_m"], r["width_m"], r["height_m"], {s: t[s] for s in facility.SURFACES})


def _cross_validate(data: dict) -> None:
    try:
        tiles = facility.build_room(room_spec(data))
    except facility.CountExceedsSurface as e:
        raise RangeError("tiles", str(e)) from None
    pw = data["power"]
    try:
        facility.plan_power(tiles, pw["per_tile_draw_w"], pw["port_cap_w"], pw["aggregate_cap_w"], pw["port_count_cap"])
    except facility.PowerBudgetError as e:
        raise RangeError("power", str(e)) from None

    room = data["room"]
    pos = data["positioning"]
    ids = set()
    for i, b in enumerate(pos["beacons"]):
        path = f"positioning.beacons[{i}]"
        ids.add(b["id"])
        if "tile" in b:
            if not 0 <= b["tile"] < len(tiles):
                raise CrossRefError(f"{path}.tile", f"no tile {b['tile']} (room has {len(tiles)})")
            try:
                facility.mount_world_position(tiles[b["tile"]], *b["mount"])
            except facility.OutOfGrid as e:
                raise CrossRefError(f"{path}.mount", str(e)) from None
        elif not _inside(b["position"], room):
            raise CrossRefError(f"{path}.position", f"{b['position']} lies outside the room")
    for key in pos["nlos"]:
        if key not in ids:
            raise CrossRefError(f"positioning.nlos.{key}", "names no beacon")
    if pos["active_beacons"] > len(pos["beacons"]):
        raise CrossRefError("positioning.active_beacons", f"only {len(pos['beacons'])} beacons listed")
    for i, p in enumerate(pos["points"]):
        if not _inside(p, room):
            raise CrossRefError(f"positioning.points[{i}]", f"{p} lies outside the room")
    if not _inside([0, 0, pos["device_z_m"]], room):
        raise CrossRefError("positioning.device_z_m", "evaluation height outside the room")
    if not _inside(data["phy"]["device"], room):
        raise CrossRefError("phy.device", f"{data['phy']['device']} lies outside the room")
    phy = data["phy"]
    if phy["chain_mag_min"] > phy["chain_mag_max"]:
        raise RangeError("phy.chain_mag_min", "exceeds chain_mag_max")

    rv = data["rover"]
    if rv["lift_min_m"] > rv["lift_max_m"]:
        raise RangeError("rover.lift_min_m", "exceeds lift_max_m")
    for i, h in enumerate(rv["heights_m"]):
        if not rv["lift_min_m"] <= h <= rv["lift_max_m"]:
            raise RangeError(f"rover.heights_m[{i}]", f"{h} m outside lift range [{rv['lift_min_m']}, {rv['lift_max_m']}]")

    if data["experiment"]["kind"] == "wpt_focus" and data["topology"]["n_tiles"] > len(tiles):
        raise CrossRefError(
            "topology.n_tiles", f"wpt_focus places {data['topology']['n_tiles']} tiles but the room has {len(tiles)}"
        )


def validate_dict(raw: dict) -> tuple[dict, frozenset]:
    """Check a parsed document against SCHEMA; return (filled data, explicit paths)."""
    if not isinstance(raw, dict):
        raise RangeError("", "scenario must be a table")
    explicit = set()
    data = {}
    for section, fields in SCHEMA.items():
        given = raw.get(section, {})
        if not isinstance(given, dict):
            raise RangeError(section, "expected a section table")
        for key in given:
            if key not in fields:
                raise UnknownKey(f"{section}.{key}", "unknown key")
        out = {}
        for key, f in fields.items():
            path = f"{section}.{key}"
            if key in given:
                out[key] = _coerce(path, f, given[key])
                explicit.add(path)
            else:
                out[key] = copy.deepcopy(f.default)
        data[section] = out
    for section in raw:
        if section not in SCHEMA:
            raise UnknownKey(section, "unknown section")
    _cross_validate(data)
    return data, frozenset(explicit)


@dataclass(frozen=True)
class Scenario:
    data: dict
    explicit: frozenset = field(default=frozenset(), compare=False)

    def __getitem__(self, section: str) -> dict:
        return self.data[section]

    def get(self, path: str):
        section, key = split_path(path)
        return self.data[section][key]

    def provenance(self, path: str) -> str:
        """'user' for values set in the file, else the default's source tag."""
        section, key = split_path(path)
        return "user" if path in self.explicit else SCHEMA[section][key].source

    def replace(self, path: str, value) -> "Scenario":
        section, key = split_path(path)
        raw = copy.deepcopy(self.data)
        raw[section][key] = value
        data, _ = validate_dict(raw)
        return Scenario(data, self.explicit | {path})

    @property
    def kind(self) -> str:
        return self.data["experiment"]["kind"]

    @property
    def seeds(self) -> list[int]:
        return list(self.data["experiment"]["seeds"])

    @property
    def hash(self) -> str:
        canon = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def to_toml(self) -> str:
        return serialize(self)


def split_path(path: str) -> tuple[str, str]:
    section, _, key = path.partition(".")
    if section not in SCHEMA or key not in SCHEMA[section]:
        raise UnknownKey(path, "no such scenario parameter")
    return section, key


def parse_scenario(text: str) -> Scenario:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        raise ScenarioSyntaxError(getattr(e, "lineno", 0), getattr(e, "colno", 0), getattr(e, "msg", str(e))) from None
    data, explicit = validate_dict(raw)
    return Scenario(data, explicit)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def serialize(scenario: Scenario) -> str:
    return tomli_w.dumps(scenario.data)


def default_scenario(kind: str = "sync_accuracy") -> Scenario:
    return parse_scenario(f'[experiment]\nkind = "{kind}"\n')


def iter_defaults():
    """Yield (path, default, unit, source, doc) for every scenario key."""
    for section, fields in SCHEMA.items():
        for key, f in fields.items():
            yield f"{section}.{key}", f.default, f.unit, f.source, f.doc


def format_default(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, (list, dict)):
        return json.dumps(value, separators=(", ", ": ")) if value else ("[]" if isinstance(value, list) else "{}")
    return repr(value)


def check_number_param(path: str) -> Callable[[Any], Any]:
    """Coercer for a numeric scenario parameter (used by sweeps)."""
    section, key = split_path(path)
    f = SCHEMA[section][key]
    if f.kind not in ("float", "int"):
        raise UnknownKey(path, "parameter is not numeric")
    return lambda v: _coerce(path, f, v)
