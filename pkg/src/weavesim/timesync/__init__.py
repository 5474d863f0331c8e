"""Clock models and the three synchronization tiers."""

from weavesim.timesync.clock import LocalClock, clock_read
from weavesim.timesync.protocol import (
    IncompleteSession,
    MissingTimestamps,
    NotSynchronized,
    SyncMode,
    SyncSession,
    TimesyncError,
    ZeroInterval,
    asymmetry_correct,
    boundary_relay,
    dedicated_reference,
    estimate_skew,
    transparent_correction,
    two_way_exchange,
)
from weavesim.timesync.servo import ServoConfig, servo_step
from weavesim.timesync.simulation import SyncConfig, SyncResult, simulate_sync, sync_hierarchy

__all__ = [
    "IncompleteSession",
    "LocalClock",
    "MissingTimestamps",
    "NotSynchronized",
    "ServoConfig",
    "SyncConfig",
    "SyncMode",
    "SyncResult",
    "SyncSession",
    "TimesyncError",
    "ZeroInterval",
    "asymmetry_correct",
    "boundary_relay",
    "clock_read",
    "dedicated_reference",
    "estimate_skew",
    "servo_step",
    "simulate_sync",
    "sync_hierarchy",
    "transparent_correction",
    "two_way_exchange",
]
