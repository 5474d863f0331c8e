"""Sampling-rover planning: serpentine grids, lift limits, obstacle-aware
routing on an occupancy lattice, range-sensor quantization and battery checks.

Lengths on the routing lattice are handled as integer micrometres so that
clearance and distance checks are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order

from weavesim.errors import WeaveError

UM = 1_000_000  # micrometres per metre


class RoverError(WeaveError):
    pass


class HeightOutOfRange(RoverError):
    def __init__(self, height: float, lo: float, hi: float):
        super().__init__(f"height {height} m outside lift range [{lo}, {hi}] m")
        self.height = height


class EmptyPlan(RoverError):
    pass


class StartBlocked(RoverError):
    pass


class InsufficientBattery(RoverError):
    def __init__(self, needed_wh: float, capacity_wh: float):
        self.needed_wh = needed_wh
        self.shortfall_wh = needed_wh - capacity_wh
        super().__init__(f"plan needs {needed_wh:.6g} Wh, battery holds {capacity_wh} Wh ({self.shortfall_wh:.6g} Wh short)")


def _exact(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x))


def _um(x) -> int:
    v = _exact(x) * UM
    if v.denominator != 1:
        v = round(v)
    return int(v)


@dataclass(frozen=True)
class RoverConfig:
    lift_min_m: float = 0.55
    lift_max_m: float = 1.85
    sensor_min_m: float = 0.02
    sensor_max_m: float = 4.00
    sensor_resolution_m: float = 0.003
    localization_precision_m: float = 0.02
    battery_wh: float = 170.0
    footprint_m: float = 0.5
    drive_power_w: float = 50.0
    speed_m_s: float = 0.25
    cell_m: float = 0.05

    def __post_init__(self):
        if not 0 < self.lift_min_m <= self.lift_max_m:
            raise ValueError("lift range must satisfy 0 < min <= max")
        if self.drive_power_w <= 0 or self.speed_m_s <= 0:
            raise ValueError("drive power and speed must be > 0")
        if self.footprint_m <= 0 or self.cell_m <= 0:
            raise ValueError("footprint and cell size must be > 0")

    @property
    def clearance_m(self) -> Fraction:
        return _exact(self.footprint_m) / 2 + _exact(self.localization_precision_m)


@dataclass(frozen=True)
class Box:
    """Axis-aligned floor obstacle."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError("box min must not exceed max")


@dataclass
class SamplePlan:
    waypoints: list[tuple[float, float]]
    heights: tuple[float, ...]
    distance_m: float
    energy_wh: float
    unreachable: list[tuple[float, float]] = field(default_factory=list)
    path: list[tuple[float, float]] = field(default_factory=list)


def drive_energy_wh(distance_m: float, config: RoverConfig) -> float:
    return config.drive_power_w * (distance_m / config.speed_m_s) / 3600


def check_heights(heights: Sequence[float], config: RoverConfig) -> tuple[float, ...]:
    for h in heights:
        if not config.lift_min_m <= h <= config.lift_max_m:
            raise HeightOutOfRange(h, config.lift_min_m, config.lift_max_m)
    return tuple(float(h) for h in heights)


def plan_grid(length_m: float, width_m: float, spacing_m: float, heights: Sequence[float], config: RoverConfig = RoverConfig()) -> SamplePlan:
    """Serpentine sweep along x over the lattice {0, s, 2s, ...} covering the floor."""
    spacing = _exact(spacing_m)
    if spacing <= 0:
        raise ValueError("spacing must be > 0")
    if not heights:
        raise EmptyPlan("no measurement heights given")
    heights = check_heights(heights, config)
    if length_m < 0 or width_m < 0:
        raise EmptyPlan("room has negative extent")
    nx = math.floor(_exact(length_m) / spacing) + 1
    ny = math.floor(_exact(width_m) / spacing) + 1
    pts: list[tuple[Fraction, Fraction]] = []
    for j in range(ny):
        cols = range(nx) if j % 2 == 0 else range(nx - 1, -1, -1)
        pts.extend((i * spacing, j * spacing) for i in cols)
    dist = sum(
        (abs(a[0] - b[0]) + abs(a[1] - b[1]) for a, b in zip(pts, pts[1:])),
        Fraction(0),
    )
    waypoints = [(float(x), float(y)) for x, y in pts]
    return SamplePlan(waypoints, heights, float(dist), drive_energy_wh(float(dist), config), path=list(waypoints))


class OccupancyGrid:
    """Lattice of rover-centre positions at ``cell`` spacing over [0, L] x [0, W].

    A node is blocked when it lies strictly inside an obstacle grown by the
    clearance on every side. For a square footprint that keeps its
    orientation this is the exact configuration-space obstacle, and it also
    bounds Euclidean clearance from below.
    """

    def __init__(self, length_m: float, width_m: float, obstacles: Sequence[Box], config: RoverConfig = RoverConfig()):
        self.cell_um = _um(config.cell_m)
        self.nx = _um(length_m) // self.cell_um + 1
        self.ny = _um(width_m) // self.cell_um + 1
        c = _um(config.clearance_m)
        xs = np.arange(self.nx, dtype=np.int64) * self.cell_um
        ys = np.arange(self.ny, dtype=np.int64) * self.cell_um
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        blocked = np.zeros((self.nx, self.ny), bool)
        for b in obstacles:
            blocked |= (
                (X > _um(b.x_min) - c) & (X < _um(b.x_max) + c) & (Y > _um(b.y_min) - c) & (Y < _um(b.y_max) + c)
            )
        self.blocked = blocked
        self._graph = self._build_graph()

    def _build_graph(self):
        free = ~self.blocked
        ids = np.arange(self.nx * self.ny).reshape(self.nx, self.ny)
        rows, cols = [], []
        right = free[:-1, :] & free[1:, :]
        rows.append(ids[:-1, :][right])
        cols.append(ids[1:, :][right])
        up = free[:, :-1] & free[:, 1:]
        rows.append(ids[:, :-1][up])
        cols.append(ids[:, 1:][up])
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        n = self.nx * self.ny
        return coo_matrix((np.ones(len(r)), (r, c)), shape=(n, n)).tocsr()

    def node(self, x: float, y: float) -> tuple[int, int]:
        """Nearest lattice node, clamped to the room."""
        i = min(max(round(_um(x) / self.cell_um), 0), self.nx - 1)
        j = min(max(round(_um(y) / self.cell_um), 0), self.ny - 1)
        return i, j

    def coords(self, node: tuple[int, int]) -> tuple[float, float]:
        return node[0] * self.cell_um / UM, node[1] * self.cell_um / UM

    def is_free(self, node: tuple[int, int]) -> bool:
        return not self.blocked[node]

    def bfs(self, src: tuple[int, int]):
        """Predecessor array of a breadth-first tree rooted at ``src``."""
        flat = src[0] * self.ny + src[1]
        _, pred = breadth_first_order(self._graph, flat, directed=False, return_predecessors=True)
        return pred

    def walk(self, pred, src: tuple[int, int], dst: tuple[int, int]) -> list[tuple[int, int]] | None:
        s = src[0] * self.ny + src[1]
        d = dst[0] * self.ny + dst[1]
        if d != s and pred[d] < 0:
            return None
        out = [d]
        while out[-1] != s:
            out.append(int(pred[out[-1]]))
        return [divmod(k, self.ny) for k in reversed(out)]


def route_avoiding(
    plan: SamplePlan, length_m: float, width_m: float, obstacles: Sequence[Box], config: RoverConfig = RoverConfig()
) -> SamplePlan:
    """Shortest 4-connected lattice route through the plan's waypoints.

    Waypoints that are blocked or cut off from the current position are
    dropped and listed in ``unreachable``.
    """
    if not plan.waypoints:
        raise EmptyPlan("plan has no waypoints")
    grid = OccupancyGrid(length_m, width_m, obstacles, config)
    start = grid.node(*plan.waypoints[0])
    if not grid.is_free(start):
        raise StartBlocked(f"start {plan.waypoints[0]} lies inside an inflated obstacle")
    reached = [plan.waypoints[0]]
    unreachable = []
    path_nodes = [start]
    hops = 0
    here = start
    pred = grid.bfs(here)
    for wp in plan.waypoints[1:]:
        target = grid.node(*wp)
        leg = grid.walk(pred, here, target) if grid.is_free(target) else None
        if leg is None:
            unreachable.append(wp)
            continue
        hops += len(leg) - 1
        path_nodes.extend(leg[1:])
        reached.append(wp)
        if target != here:
            here = target
            pred = grid.bfs(here)
    dist = hops * grid.cell_um / UM
    return SamplePlan(
        reached, plan.heights, dist, drive_energy_wh(dist, config), unreachable, [grid.coords(n) for n in path_nodes]
    )


def sense_obstacle(distance_m: float, config: RoverConfig = RoverConfig()) -> float | None:
    """Range reading quantized to the sensor resolution, or None when out of range.

    Rounds to the nearest step; exact half steps round toward zero.
    """
    d = _exact(distance_m)
    if not _exact(config.sensor_min_m) <= d <= _exact(config.sensor_max_m):
        return None
    step = _exact(config.sensor_resolution_m)
    q = d / step
    k = math.floor(q)
    if q - k > Fraction(1, 2):
        k += 1
    return float(k * step)


@dataclass(frozen=True)
class EnergyCheck:
    ok: bool
    wh: float


def energy_feasible(plan: SamplePlan | float, config: RoverConfig = RoverConfig()) -> EnergyCheck:
    """Battery check for a plan (or a drive distance in metres)."""
    dist = plan.distance_m if isinstance(plan, SamplePlan) else float(plan)
    wh = drive_energy_wh(dist, config)
    if wh > config.battery_wh:
        raise InsufficientBattery(wh, config.battery_wh)
    return EnergyCheck(True, wh)
