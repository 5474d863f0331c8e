"""Two-way time transfer algebra: sessions, transparent and boundary clocks,
syntonization and the dedicated 10 MHz / PPS reference."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from weavesim.errors import WeaveError
from weavesim.netsim import SimTime
from weavesim.timesync.clock import LocalClock


class TimesyncError(WeaveError):
    pass


class IncompleteSession(TimesyncError):
    pass


class MissingTimestamps(TimesyncError):
    pass


class NotSynchronized(TimesyncError):
    pass


class ZeroInterval(TimesyncError):
    pass


class SyncMode(str, enum.Enum):
    MESSAGE_SYNC = "message_sync"
    MESSAGE_SYNC_SYNTONIZED = "message_sync_syntonized"
    DEDICATED = "dedicated"
    FREE_RUNNING = "free_running"


@dataclass
class SyncSession:
    """One Sync / Delay_Req exchange between a master and a slave.

    t1: master sends Sync, t2: slave receives it, t3: slave sends
    Delay_Req, t4: master receives it. Corrections hold the residence time
    accumulated by transparent clocks in each direction.
    """

    master: str
    slave: str
    t1: float | None = None
    t2: float | None = None
    t3: float | None = None
    t4: float | None = None
    correction_fwd: float = 0.0
    correction_rev: float = 0.0
    interval: SimTime = 125_000_000_000

    @property
    def complete(self) -> bool:
        return None not in (self.t1, self.t2, self.t3, self.t4)


def two_way_exchange(session: SyncSession) -> tuple[float, float]:
    """Return (offset, mean path delay) of the slave relative to the master."""
    if not session.complete:
        missing = [n for n in ("t1", "t2", "t3", "t4") if getattr(session, n) is None]
        raise IncompleteSession(f"{session.master}->{session.slave}: missing {missing}")
    ms = (session.t2 - session.t1) - session.correction_fwd
    sm = (session.t4 - session.t3) - session.correction_rev
    return (ms - sm) / 2, (ms + sm) / 2


def transparent_correction(session: SyncSession, hops, direction: str = "fwd") -> SyncSession:
    """Accumulate residence times of transparent-clock hops into the session."""
    total = 0.0
    for hop in hops:
        if not hop.transparent:
            continue
        if hop.ingress is None or hop.egress is None:
            raise MissingTimestamps(f"transparent hop {hop.node} lacks ingress/egress")
        total += hop.egress - hop.ingress
    if direction == "fwd":
        session.correction_fwd += total
    elif direction == "rev":
        session.correction_rev += total
    else:
        raise ValueError(f"direction must be 'fwd' or 'rev', got {direction!r}")
    return session


def boundary_relay(upstream: SyncSession, downstream: str) -> SyncSession:
    """Open a session where the upstream slave serves as master for ``downstream``."""
    if not upstream.complete:
        raise NotSynchronized(
            f"boundary {upstream.slave} has not completed its exchange with {upstream.master}"
        )
    return SyncSession(master=upstream.slave, slave=downstream, interval=upstream.interval)


def estimate_skew(t1: float, t2: float, t1_next: float, t2_next: float) -> float:
    """Slave rate error relative to the master from two successive Sync receipts."""
    master_span = t1_next - t1
    if master_span <= 0:
        raise ZeroInterval(f"Sync origin timestamps do not advance ({t1} -> {t1_next})")
    return ((t2_next - t2) - master_span) / master_span


def asymmetry_correct(offset_estimate: float, known_asymmetry: float) -> float:
    """Remove the half-asymmetry bias (forward minus reverse delay)."""
    return offset_estimate - known_asymmetry / 2


def dedicated_reference(
    clock: LocalClock, mode: SyncMode, t: SimTime, error_sigma: float = 0.0, rng=None
) -> LocalClock:
    """Pin ``clock`` to truth at a PPS edge, leaving only the configured error.

    Any mode other than ``dedicated`` leaves the clock untouched.
    """
    if SyncMode(mode) is not SyncMode.DEDICATED:
        return clock
    clock.advance(t)
    residual = 0.0
    if error_sigma:
        rng = rng if rng is not None else np.random.default_rng()
        residual = error_sigma * rng.standard_normal()
    clock.offset = residual
    clock.freq_adj = -clock.skew
    return clock


