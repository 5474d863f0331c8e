"""Monte Carlo evaluation of estimators over sets of device positions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from weavesim.positioning.models import Beacon, propagation_speed, simulate_toa
from weavesim.positioning.solvers import (
    PositioningError,
    RansacConfig,
    ransac_trilaterate,
    trilaterate_hybrid,
    trilaterate_ls,
    vlp_observe,
    vlp_position,
)
from weavesim.rng import generator

Estimator = Callable[[np.ndarray, np.random.Generator], np.ndarray]


@dataclass
class ErrorStats:
    errors: np.ndarray
    failures: int

    @property
    def median(self) -> float:
        return float(np.median(self.errors)) if self.errors.size else float("nan")

    @property
    def p95(self) -> float:
        return float(np.percentile(self.errors, 95)) if self.errors.size else float("nan")


def grid_points(x_max: float, y_max: float, z: float, spacing: float, margin: float = 0.0) -> np.ndarray:
    xs = np.arange(margin, x_max - margin + 1e-9, spacing)
    ys = np.arange(margin, y_max - margin + 1e-9, spacing)
    return np.array([(x, y, z) for x in xs for y in ys], float)


def toa_estimator(
    beacons: Sequence[Beacon],
    range_sigma: float,
    method: str = "ls",
    nlos: Mapping[str, float] | None = None,
    clock_bias: float = 0.0,
    ransac: RansacConfig | None = None,
) -> Estimator:
    """TOA observation plus estimation; ``range_sigma`` is in metres."""
    anchors = np.array([b.position for b in beacons], float)
    speeds = np.array([propagation_speed(b.technology) for b in beacons])
    if method not in ("ls", "ransac", "hybrid"):
        raise ValueError(f"unknown estimator {method!r}")
    if method != "hybrid" and clock_bias:
        raise ValueError("only the hybrid estimator handles a device clock bias")
    if method == "hybrid" and len(set(speeds)) > 1:
        raise ValueError("hybrid estimator needs a single technology")
    sigma_t = range_sigma / speeds[0] if len(set(speeds)) == 1 else None
    cfg = ransac or RansacConfig(noise_sigma=max(range_sigma, 1e-6))

    def run(point, rng):
        if sigma_t is None:
            obs = [simulate_toa([b], point, rng, 0.0, range_sigma / s, nlos)[0] for b, s in zip(beacons, speeds)]
        else:
            obs = simulate_toa(beacons, point, rng, clock_bias, sigma_t, nlos)
        toas = np.array([o.toa for o in obs])
        if method == "hybrid":
            return trilaterate_hybrid(anchors, toas, speeds[0]).position
        ranges = toas * speeds
        if method == "ransac":
            return ransac_trilaterate(anchors, ranges, cfg, rng).position
        return trilaterate_ls(anchors, ranges).position

    return run


def vlp_estimator(leds: Sequence[Beacon], rel_noise: float, rx_z: float = 0.0, area: float = 1e-4) -> Estimator:
    leds = list(leds)

    def run(point, rng):
        p = vlp_observe(leds, point, rng, rel_noise, area)
        return vlp_position(leds, p, rx_z, area).position

    return run


def evaluate_scenario(points, estimator: Estimator, seed: int, label: str = "positioning") -> ErrorStats:
    """Euclidean error at each point; each point draws from its own substream."""
    points = np.asarray(points, float)
    if len(points) == 0:
        raise ValueError("no evaluation points")
    errors, failures = [], 0
    for k, p in enumerate(points):
        rng = generator(seed, label, k)
        try:
            est = estimator(p, rng)
        except PositioningError:
            failures += 1
            continue
        errors.append(float(np.linalg.norm(np.asarray(est) - p)))
    return ErrorStats(np.array(errors), failures)
