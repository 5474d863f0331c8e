from __future__ import annotations

import math
from dataclasses import dataclass

from weavesim.netsim import MS, SimTime
from weavesim.timesync.clock import LocalClock


@dataclass(frozen=True)
class ServoConfig:
    """PI gains per sync interval.

    The proportional part steps the clock phase by ``-kp * offset``; the
    integral part changes its frequency by ``-ki * offset / interval``.
    With the default gains the closed-loop poles sit at radius sqrt(ki).
    """

    kp: float = 0.7
    ki: float = 0.3
    interval: SimTime = 125 * MS


def servo_step(clock: LocalClock, offset_estimate: float, config: ServoConfig, t: SimTime) -> LocalClock:
    if not math.isfinite(offset_estimate):
        raise ValueError(f"offset estimate must be finite, got {offset_estimate}")
    clock.step(t, -config.kp * offset_estimate)
    clock.adjust_frequency(t, -config.ki * offset_estimate / config.interval)
    return clock
