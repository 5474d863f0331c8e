from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from weavesim.netsim import S, SimTime


@dataclass
class LocalClock:
    """Affine clock with a random-walk frequency error.

    Readings follow ``(t - epoch) + offset + rate * (t - anchor)`` where
    ``rate = skew + freq_adj``. ``skew`` is the oscillator's own error and
    takes one random-walk step at every whole second after ``epoch``;
    ``freq_adj`` is whatever a servo has dialled in. Times are picoseconds.
    """

    offset: float = 0.0
    skew: float = 0.0
    drift_rw_sigma: float = 0.0
    ts_jitter_sigma: float = 0.0
    epoch: SimTime = 0
    freq_adj: float = 0.0
    rng: np.random.Generator | None = field(default=None, repr=False)
    walk_rng: np.random.Generator | None = field(default=None, repr=False)
    anchor: SimTime | None = None
    steps_total: float = 0.0

    def __post_init__(self):
        if not abs(self.skew) < 1e-3:
            raise ValueError(f"|skew| must be < 1e-3, got {self.skew}")
        if self.anchor is None:
            self.anchor = self.epoch
        if self.rng is None:
            self.rng = np.random.default_rng(0)
        if self.walk_rng is None:
            self.walk_rng = np.random.default_rng(1)

    @property
    def rate(self) -> float:
        return self.skew + self.freq_adj

    def advance(self, t: SimTime) -> None:
        """Fold elapsed time into ``offset`` and apply due random-walk steps."""
        if t <= self.anchor:
            return
        first = (self.anchor - self.epoch) // S + 1
        last = (t - self.epoch) // S
        if last < first or self.drift_rw_sigma == 0:
            self.offset += self.rate * (t - self.anchor)
            self.anchor = t
            return
        bounds = self.epoch + np.arange(first, last + 1, dtype=np.int64) * S
        steps = self.walk_rng.normal(0.0, self.drift_rw_sigma, len(bounds))
        skews = self.skew + np.concatenate(([0.0], np.cumsum(steps)))
        spans = np.diff(np.concatenate(([self.anchor], bounds, [t]))).astype(float)
        self.offset += float(np.dot(skews + self.freq_adj, spans))
        self.skew = float(skews[-1])
        self.anchor = t

    def error(self, t: SimTime) -> float:
        """Noise-free local reading minus true elapsed time, in ps."""
        self.advance(t)
        return self.offset + self.rate * (t - self.anchor)

    def step(self, t: SimTime, delta: float) -> None:
        self.advance(t)
        self.offset += delta
        self.steps_total += delta

    def adjust_frequency(self, t: SimTime, delta: float) -> None:
        self.advance(t)
        self.freq_adj += delta


def clock_read(clock: LocalClock, true_time: SimTime) -> float:
    """Timestamp ``true_time`` with ``clock``, including timestamping jitter."""
    if true_time < clock.epoch:
        raise ValueError("cannot read a clock before its epoch")
    local = (true_time - clock.epoch) + clock.error(true_time)
    if clock.ts_jitter_sigma:
        local += clock.ts_jitter_sigma * clock.rng.standard_normal()
    return local
