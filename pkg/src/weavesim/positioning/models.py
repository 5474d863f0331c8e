"""Beacons, observations and forward models (TOA and Lambertian RSS)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from weavesim.phy import C_LIGHT

C_SOUND = 343.0
ACOUSTIC_BAND_HZ = (20.0, 45_000.0)
TECHNOLOGIES = ("acoustic", "rf", "vlp")


def propagation_speed(technology: str) -> float:
    if technology == "acoustic":
        return C_SOUND
    if technology in ("rf", "vlp"):
        return C_LIGHT
    raise ValueError(f"unknown technology {technology!r}")


@dataclass(frozen=True)
class Beacon:
    id: str
    position: tuple[float, float, float]
    technology: str = "acoustic"
    # vlp only
    lambertian_order: float = 1.0
    power_w: float = 1.0
    normal: tuple[float, float, float] = (0.0, 0.0, -1.0)

    def __post_init__(self):
        if self.technology not in TECHNOLOGIES:
            raise ValueError(f"unknown technology {self.technology!r}")
        if self.lambertian_order < 1:
            raise ValueError("lambertian order must be >= 1")
        if len(self.position) != 3:
            raise ValueError("beacon position must be 3D")

    @property
    def xyz(self) -> np.ndarray:
        return np.asarray(self.position, float)


@dataclass(frozen=True)
class RangeObservation:
    beacon_id: str
    toa: float
    speed: float = C_SOUND
    noise_sigma: float = 0.0
    nlos_bias: float = 0.0  # hidden truth, metres

    def __post_init__(self):
        if self.nlos_bias < 0:
            raise ValueError("NLOS bias must be >= 0")

    @property
    def range(self) -> float:
        return self.toa * self.speed


@dataclass
class PositionEstimate:
    position: np.ndarray
    residual_rms: float
    iterations: int
    inliers: tuple[int, ...] = ()
    clock_bias: float | None = None
    extra: dict = field(default_factory=dict)


def simulate_toa(
    beacons: Sequence[Beacon],
    position,
    rng: np.random.Generator | None = None,
    clock_bias: float = 0.0,
    noise_sigma: float = 0.0,
    nlos: Mapping[str, float] | None = None,
) -> list[RangeObservation]:
    """Times of arrival at a device whose clock runs ``clock_bias`` seconds ahead.

    ``noise_sigma`` is a timing standard deviation in seconds. ``nlos`` maps
    beacon ids to a positive excess path length in metres.
    """
    if not beacons:
        raise ValueError("need at least one beacon")
    nlos = nlos or {}
    x = np.asarray(position, float)
    out = []
    for b in beacons:
        speed = propagation_speed(b.technology)
        bias_m = float(nlos.get(b.id, 0.0))
        toa = (float(np.linalg.norm(b.xyz - x)) + bias_m) / speed + clock_bias
        if noise_sigma > 0:
            toa += noise_sigma * float(rng.standard_normal())
        out.append(RangeObservation(b.id, toa, speed, noise_sigma, bias_m))
    return out


def observation_arrays(beacons: Sequence[Beacon], observations: Sequence[RangeObservation]):
    """(anchors n x 3, ranges n) aligned by beacon id."""
    by_id = {b.id: b for b in beacons}
    anchors = np.array([by_id[o.beacon_id].position for o in observations], float)
    ranges = np.array([o.range for o in observations], float)
    return anchors, ranges


def lambertian_order(half_power_angle: float) -> float:
    """Order m whose intensity falls to one half at ``half_power_angle`` (rad)."""
    return -math.log(2) / math.log(math.cos(half_power_angle))


def vlp_rss(led: Beacon, rx_position, rx_normal=(0.0, 0.0, 1.0), area: float = 1e-4) -> float:
    """Line-of-sight power (W) at a photodiode of ``area`` m^2."""
    if area <= 0:
        raise ValueError("receiver area must be > 0")
    v = np.asarray(rx_position, float) - led.xyz
    d = float(np.linalg.norm(v))
    if d == 0:
        raise ValueError("receiver coincides with LED")
    n_led = np.asarray(led.normal, float)
    n_rx = np.asarray(rx_normal, float)
    cos_emit = float(v @ n_led) / (d * np.linalg.norm(n_led))
    cos_inc = float(-v @ n_rx) / (d * np.linalg.norm(n_rx))
    if cos_emit <= 0 or cos_inc <= 0:
        return 0.0
    m = led.lambertian_order
    return led.power_w * (m + 1) * area / (2 * math.pi * d * d) * cos_emit**m * cos_inc
