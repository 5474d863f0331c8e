"""Room geometry, tile grid, mount lattice, PoE budget and DAQ quantizer.

Coordinates are metres in a right-handed world frame: x along the room
length, y along the width, z up, origin at a floor corner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from weavesim.errors import WeaveError

TILE_LONG_M = Fraction(6, 5)
TILE_SHORT_M = Fraction(3, 5)
MOUNT_PITCH_M = Fraction(1, 20)
MOUNT_U_MAX = 24
MOUNT_V_MAX = 12

SURFACES = ("wall_a", "wall_b", "ceiling", "floor")

# Per-surface counts as published for the facility. They exceed what fits on
# an 8 x 4 x 2.4 m room (52 floor tiles need 37.44 m^2 of a 32 m^2 floor),
# so they are kept for reference and are not the RoomSpec default.
PUBLISHED_SURFACE_COUNTS = {"wall_a": 28, "wall_b": 28, "ceiling": 42, "floor": 52}
# Largest landscape row-major packing of the default room.
DEFAULT_SURFACE_COUNTS = {"wall_a": 24, "wall_b": 24, "ceiling": 36, "floor": 36}

RESOURCE_KINDS = ("sdr", "edge", "microphone", "speaker", "led", "photodiode", "custom")


class FacilityError(WeaveError):
    pass


class CountExceedsSurface(FacilityError):
    pass


class OutOfGrid(FacilityError):
    pass


class PowerBudgetError(FacilityError):
    pass


class PortCapExceeded(PowerBudgetError):
    pass


class AggregateExceeded(PowerBudgetError):
    pass


class PortCountExceeded(PowerBudgetError):
    pass


def _exact(x: float) -> Fraction:
    # Dimensions are given in decimal metres; recover the intended rational.
    return Fraction(x).limit_denominator(10**6)


@dataclass(frozen=True)
class RoomSpec:
    length_m: float = 8.0
    width_m: float = 4.0
    height_m: float = 2.4
    surface_tile_counts: dict = field(default_factory=lambda: dict(DEFAULT_SURFACE_COUNTS))

    def __post_init__(self):
        for name in ("length_m", "width_m", "height_m"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        unknown = set(self.surface_tile_counts) - set(SURFACES)
        if unknown:
            raise ValueError(f"unknown surfaces {sorted(unknown)}")
        for surface, count in self.surface_tile_counts.items():
            if count < 0:
                raise ValueError(f"tile count for {surface} must be >= 0, got {count}")

    @property
    def total_tiles(self) -> int:
        return sum(self.surface_tile_counts.get(s, 0) for s in SURFACES)


@dataclass(frozen=True)
class Tile:
    id: int
    surface: str
    index: int
    row: int
    col: int
    origin: tuple[float, float, float]
    orientation: tuple[float, float, float]
    long_axis: tuple[float, float, float]
    short_axis: tuple[float, float, float]

    @property
    def center(self) -> np.ndarray:
        return mount_world_position(self, MOUNT_U_MAX // 2, MOUNT_V_MAX // 2)


@dataclass(frozen=True)
class MountPoint:
    tile_id: int
    u: int
    v: int
    kind: str = "custom"

    def __post_init__(self):
        if self.kind not in RESOURCE_KINDS:
            raise ValueError(f"unknown resource kind {self.kind!r}")
        _check_lattice(self.u, self.v)


@dataclass(frozen=True)
class _SurfaceFrame:
    origin: tuple[Fraction, Fraction, Fraction]
    axis_a: tuple[int, int, int]
    axis_b: tuple[int, int, int]
    extent_a: Fraction
    extent_b: Fraction
    normal: tuple[int, int, int]


def _surface_frame(spec: RoomSpec, surface: str) -> _SurfaceFrame:
    L, W, H = _exact(spec.length_m), _exact(spec.width_m), _exact(spec.height_m)
    zero = Fraction(0)
    x, y, z = (1, 0, 0), (0, 1, 0), (0, 0, 1)
    if surface == "floor":
        frame = ((zero, zero, zero), x, y, L, W, (0, 0, 1))
    elif surface == "ceiling":
        frame = ((zero, zero, H), x, y, L, W, (0, 0, -1))
    elif surface == "wall_a":
        frame = ((zero, zero, zero), x, z, L, H, (0, 1, 0))
    elif surface == "wall_b":
        frame = ((zero, W, zero), x, z, L, H, (0, -1, 0))
    else:
        raise ValueError(f"unknown surface {surface!r}")
    origin, a, b, ea, eb, n = frame
    # tile long edge runs along the surface's longer axis
    if eb > ea:
        a, b, ea, eb = b, a, eb, ea
    return _SurfaceFrame(origin, a, b, ea, eb, n)


def surface_capacity(spec: RoomSpec, surface: str) -> tuple[int, int]:
    """(columns, rows) of the row-major landscape packing of one surface."""
    frame = _surface_frame(spec, surface)
    return math.floor(frame.extent_a / TILE_LONG_M), math.floor(frame.extent_b / TILE_SHORT_M)


def build_room(spec: RoomSpec) -> list[Tile]:
    """Lay out tiles on every surface, ordered by (surface, row, column).

    Packing starts at the surface corner; unused margin is left at the far
    edges.
    """
    tiles: list[Tile] = []
    for surface in SURFACES:
        count = spec.surface_tile_counts.get(surface, 0)
        if count == 0:
            continue
        cols, rows = surface_capacity(spec, surface)
        if count > cols * rows:
            raise CountExceedsSurface(
                f"{surface}: {count} tiles requested but a {cols} x {rows} "
                f"row-major packing holds {cols * rows}"
            )
        frame = _surface_frame(spec, surface)
        for index in range(count):
            row, col = divmod(index, cols)
            da, db = col * TILE_LONG_M, row * TILE_SHORT_M
            origin = tuple(
                float(o + da * a + db * b)
                for o, a, b in zip(frame.origin, frame.axis_a, frame.axis_b)
            )
            tiles.append(
                Tile(
                    id=len(tiles),
                    surface=surface,
                    index=index,
                    row=row,
                    col=col,
                    origin=origin,
                    orientation=tuple(float(c) for c in frame.normal),
                    long_axis=tuple(float(c) for c in frame.axis_a),
                    short_axis=tuple(float(c) for c in frame.axis_b),
                )
            )
    return tiles


def _check_lattice(u: int, v: int) -> None:
    if not (0 <= u <= MOUNT_U_MAX and 0 <= v <= MOUNT_V_MAX):
        raise OutOfGrid(f"mount ({u}, {v}) outside 0..{MOUNT_U_MAX} x 0..{MOUNT_V_MAX}")


def mount_world_position(tile: Tile, u: int, v: int) -> np.ndarray:
    _check_lattice(u, v)
    du, dv = u * MOUNT_PITCH_M, v * MOUNT_PITCH_M
    return np.array(
        [
            float(Fraction(o) + du * int(a) + dv * int(b))
            for o, a, b in zip(tile.origin, tile.long_axis, tile.short_axis)
        ]
    )


@dataclass(frozen=True)
class PowerPlan:
    draws_w: dict
    port_cap_w: float = 90.0
    aggregate_cap_w: float = 9000.0
    port_count_cap: int = 156

    @property
    def total_w(self) -> float:
        return math.fsum(self.draws_w.values())


def plan_power(
    grid,
    per_tile_draw_w: float,
    port_cap_w: float = 90.0,
    aggregate_cap_w: float = 9000.0,
    port_count_cap: int = 156,
) -> PowerPlan:
    """Check a uniform per-tile PoE draw against port, count and aggregate caps."""
    if per_tile_draw_w < 0:
        raise ValueError("per_tile_draw_w must be >= 0")
    draws = {tile.id: float(per_tile_draw_w) for tile in grid}
    for tile_id, draw in draws.items():
        if draw > port_cap_w:
            raise PortCapExceeded(f"tile {tile_id} draws {draw} W > port cap {port_cap_w} W")
    if len(draws) > port_count_cap:
        raise PortCountExceeded(f"{len(draws)} powered tiles > {port_count_cap} ports")
    total = math.fsum(draws.values())
    if total > aggregate_cap_w:
        raise AggregateExceeded(f"total draw {total} W > aggregate cap {aggregate_cap_w} W")
    return PowerPlan(draws, port_cap_w, aggregate_cap_w, port_count_cap)


@dataclass(frozen=True)
class AdcSpec:
    sample_rate: float = 1.25e6
    bits: int = 16
    full_scale: float = 1.0
    channels: int = 192

    @property
    def lsb(self) -> float:
        return 2.0 * self.full_scale / 2**self.bits


def quantize_adc(samples, adc: AdcSpec = AdcSpec()) -> tuple[np.ndarray, np.ndarray]:
    """Ideal mid-rise quantizer over [-full_scale, +full_scale].

    Returns signed integer codes and a per-sample clipping flag.
    """
    x = np.asarray(samples, dtype=float)
    lo, hi = -(2 ** (adc.bits - 1)), 2 ** (adc.bits - 1) - 1
    codes = np.floor(x / adc.lsb)
    clipped = (x < -adc.full_scale) | (x > adc.full_scale)
    return np.clip(codes, lo, hi).astype(np.int64), clipped


def dequantize_adc(codes, adc: AdcSpec = AdcSpec()) -> np.ndarray:
    return (np.asarray(codes, dtype=float) + 0.5) * adc.lsb
