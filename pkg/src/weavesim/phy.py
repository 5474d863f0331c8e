"""Narrowband physical layer: channels, RF-chain mismatch, reciprocity
calibration, uplink pilots, conjugate beamforming and energy harvesting.

Every link is a single complex coefficient at the carrier. Measurement
``Y[i, j]`` is what node ``j`` receives when node ``i`` transmits:
``r_j * h_ij * t_i`` with a reciprocal propagation term ``h_ij = h_ji``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Mapping

import numpy as np

from weavesim.errors import WeaveError

C_LIGHT = 2.99792458e8
CARRIER_MIN_HZ = 70e6
CARRIER_MAX_HZ = 6e9
WPT_ENERGY_TARGET_J = 362.45e-6

ComplexGain = complex


class PhyError(WeaveError):
    pass


class CoincidentPoints(PhyError):
    pass


class DimensionMismatch(PhyError):
    pass


class ZeroPower(PhyError):
    pass


class InsufficientMeasurements(PhyError):
    pass


class ZeroMeasurement(PhyError):
    pass


def dbm_to_w(dbm: float) -> float:
    return 10 ** (dbm / 10) / 1000


def wavelength(carrier_hz: float) -> float:
    return C_LIGHT / carrier_hz


@dataclass(frozen=True)
class RadioChain:
    tx_gain: complex = 1.0
    rx_gain: complex = 1.0
    carrier_hz: float = 3.8e9
    max_tx_power_dbm: float = 20.0

    def __post_init__(self):
        if not CARRIER_MIN_HZ <= self.carrier_hz <= CARRIER_MAX_HZ:
            raise ValueError(f"carrier {self.carrier_hz} Hz outside [70 MHz, 6 GHz]")
        for g in (self.tx_gain, self.rx_gain):
            if not (math.isfinite(g.real) and math.isfinite(g.imag)):
                raise ValueError("chain gains must be finite")

    @property
    def calibration(self) -> complex:
        return self.tx_gain / self.rx_gain


def random_chains(n: int, rng, magnitude_range=(0.5, 2.0), carrier_hz: float = 3.8e9) -> list[RadioChain]:
    """Chains with log-uniform magnitudes and uniform phases."""
    lo, hi = np.log(magnitude_range[0]), np.log(magnitude_range[1])
    mags = np.exp(rng.uniform(lo, hi, (n, 2)))
    phases = rng.uniform(-np.pi, np.pi, (n, 2))
    gains = mags * np.exp(1j * phases)
    return [RadioChain(complex(t), complex(r), carrier_hz) for t, r in gains]


@dataclass(frozen=True)
class ChannelModel:
    """Free space, or log-distance anchored to free space at ``reference_distance``."""

    kind: str = "free_space"
    carrier_hz: float = 3.8e9
    exponent: float = 2.0
    reference_distance: float = 1.0

    def __post_init__(self):
        if self.kind not in ("free_space", "log_distance"):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.exponent < 1:
            raise ValueError("path-loss exponent must be >= 1")
        if self.reference_distance <= 0:
            raise ValueError("reference distance must be > 0")


def _magnitude(d, model: ChannelModel):
    lam = wavelength(model.carrier_hz)
    if model.kind == "free_space":
        return lam / (4 * np.pi * d)
    d0 = model.reference_distance
    return lam / (4 * np.pi * d0) * (d0 / d) ** (model.exponent / 2)


def channel_gain(p_tx, p_rx, model: ChannelModel = ChannelModel()) -> complex:
    d = float(np.linalg.norm(np.asarray(p_rx, float) - np.asarray(p_tx, float)))
    if d == 0:
        raise CoincidentPoints(f"transmitter and receiver coincide at {list(p_tx)}")
    lam = wavelength(model.carrier_hz)
    phase = -2 * math.pi * math.fmod(d / lam, 1.0)
    return complex(_magnitude(d, model) * np.exp(1j * phase))


def channel_gains(tx_positions, p_rx, model: ChannelModel = ChannelModel()) -> np.ndarray:
    """Vectorised ``channel_gain`` from many transmitters to one receiver."""
    d = np.linalg.norm(np.asarray(tx_positions, float) - np.asarray(p_rx, float), axis=-1)
    if np.any(d == 0):
        raise CoincidentPoints("a transmitter coincides with the receiver")
    lam = wavelength(model.carrier_hz)
    return _magnitude(d, model) * np.exp(-2j * np.pi * np.fmod(d / lam, 1.0))


def phase_error_from_clock(tau, carrier_hz: float):
    """Carrier phase (rad, in (-pi, pi]) accumulated over a timing error of ``tau`` ps.

    Scalars are reduced exactly in rational arithmetic; arrays use floats.
    """
    if carrier_hz <= 0:
        raise ValueError("carrier must be > 0")
    if np.ndim(tau) == 0:
        cycles = Fraction(carrier_hz) * Fraction(tau) / 10**12
        frac = cycles - math.floor(cycles)
        if frac > Fraction(1, 2):
            frac -= 1
        return 2 * math.pi * float(frac)
    frac = np.mod(np.asarray(tau, float) * (carrier_hz * 1e-12), 1.0)
    frac = np.where(frac > 0.5, frac - 1.0, frac)
    return 2 * np.pi * frac


def reciprocity_calibrate(
    measurements: Mapping[tuple[Hashable, Hashable], complex], reference: Hashable
) -> dict[Hashable, complex]:
    """Recover ``c_i / c_ref`` with ``c_i = t_i / r_i`` from bidirectional pairs.

    A breadth-first spanning tree from ``reference`` gives an exact solution
    when measurements are noiseless. Redundant pairs are then folded in by
    least squares on log-magnitudes and on wrapped phase residuals.
    """
    nodes = sorted({n for pair in measurements for n in pair} | {reference})
    for pair, y in measurements.items():
        if y == 0 or not np.isfinite(y):
            raise ZeroMeasurement(f"measurement {pair} is {y}")
    ratios: dict[tuple, complex] = {}
    neighbours: dict[Hashable, list] = {n: [] for n in nodes}
    for (i, j), y in measurements.items():
        if (j, i) in measurements and (j, i) not in ratios:
            ratios[(i, j)] = complex(y) / complex(measurements[(j, i)])  # c_i / c_j
            neighbours[i].append(j)
            neighbours[j].append(i)

    tree = {reference: 1.0 + 0j}
    queue = deque([reference])
    while queue:
        i = queue.popleft()
        for j in sorted(neighbours[i]):
            if j not in tree:
                rho = ratios[(i, j)] if (i, j) in ratios else 1 / ratios[(j, i)]
                tree[j] = tree[i] / rho
                queue.append(j)
    missing = [n for n in nodes if n not in tree]
    if missing:
        raise InsufficientMeasurements(f"no bidirectional path from {reference!r} to {missing}")
    if len(ratios) <= len(nodes) - 1:
        return tree

    index = {n: k for k, n in enumerate(n for n in nodes if n != reference)}
    A = np.zeros((len(ratios), len(index)))
    log_mag = np.empty(len(ratios))
    phase_res = np.empty(len(ratios))
    for row, ((i, j), rho) in enumerate(ratios.items()):
        if i in index:
            A[row, index[i]] = 1.0
        if j in index:
            A[row, index[j]] = -1.0
        log_mag[row] = math.log(abs(rho))
        predicted = np.angle(tree[i]) - np.angle(tree[j])
        phase_res[row] = np.angle(np.exp(1j * (np.angle(rho) - predicted)))
    x = np.linalg.lstsq(A, log_mag, rcond=None)[0]
    delta = np.linalg.lstsq(A, phase_res, rcond=None)[0]
    out = {reference: 1.0 + 0j}
    for n, k in index.items():
        out[n] = complex(np.exp(x[k] + 1j * (np.angle(tree[n]) + delta[k])))
    return out


def uplink_pilot_estimate(device_tx_gain: complex, rx_gains, channels, noise_sigma: float = 0.0, rng=None) -> np.ndarray:
    """Per-tile estimates ``r_i * h_i * t_dev`` plus circular Gaussian noise of variance sigma^2."""
    rx_gains = np.asarray(rx_gains, complex)
    channels = np.asarray(channels, complex)
    if rx_gains.shape != channels.shape:
        raise DimensionMismatch(f"{rx_gains.shape} rx gains vs {channels.shape} channels")
    est = rx_gains * channels * device_tx_gain
    if noise_sigma > 0:
        rng = rng if rng is not None else np.random.default_rng()
        noise = rng.standard_normal(est.shape) + 1j * rng.standard_normal(est.shape)
        est = est + noise * (noise_sigma / math.sqrt(2))
    return est


def conjugate_weights(estimates, calibration=None) -> np.ndarray:
    """Unit-modulus conjugate precoder, optionally applying calibration coefficients."""
    est = np.asarray(estimates, complex)
    if calibration is not None:
        calibration = np.asarray(calibration, complex)
        if calibration.shape != est.shape:
            raise DimensionMismatch(f"{calibration.shape} calibration vs {est.shape} estimates")
        est = est * calibration
    return np.exp(-1j * np.angle(est))


def coherent_receive_power(weights, channels, phase_errors=None, h_single=None):
    """Received power relative to a single tile.

    ``phase_errors`` may carry leading batch dimensions (e.g. trials x N).
    The single-tile reference amplitude defaults to the mean channel
    magnitude, so perfectly aligned combining gives exactly N^2.
    """
    w = np.asarray(weights, complex)
    h = np.asarray(channels, complex)
    if w.shape != h.shape:
        raise DimensionMismatch(f"{w.shape} weights vs {h.shape} channels")
    if not np.allclose(np.abs(w), 1.0, rtol=1e-9):
        raise ValueError("weights must have unit modulus")
    terms = w * h
    if phase_errors is not None:
        phi = np.asarray(phase_errors, float)
        if phi.shape[-1:] != h.shape:
            raise DimensionMismatch(f"{phi.shape} phase errors vs {h.shape} channels")
        terms = terms * np.exp(1j * phi)
    ref = float(np.mean(np.abs(h))) if h_single is None else abs(h_single)
    power = np.abs(terms.sum(axis=-1)) ** 2 / ref**2
    return float(power) if np.ndim(power) == 0 else power


@dataclass(frozen=True)
class WptDevice:
    position: tuple[float, float, float] = (4.0, 2.0, 1.0)
    efficiency: float = 0.5
    energy_target_j: float = WPT_ENERGY_TARGET_J

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise ValueError("harvest efficiency must be in [0, 1]")


@dataclass(frozen=True)
class Harvest:
    energy_j: float
    time_to_target_s: float


def wpt_harvest(
    received_power_w: float, duration_s: float, efficiency: float, target_j: float = WPT_ENERGY_TARGET_J
) -> Harvest:
    if received_power_w < 0 or duration_s < 0 or target_j < 0:
        raise ValueError("power, duration and target must be >= 0")
    if not 0 <= efficiency <= 1:
        raise ValueError("efficiency must be in [0, 1]")
    harvested_w = efficiency * received_power_w
    energy = harvested_w * duration_s
    if target_j == 0:
        return Harvest(energy, 0.0)
    if harvested_w == 0:
        raise ZeroPower(f"no harvested power to reach {target_j} J")
    return Harvest(energy, target_j / harvested_w)
