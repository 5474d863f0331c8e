"""Acoustic, hybrid RF-acoustic and visible-light positioning."""

from weavesim.positioning.evaluate import ErrorStats, evaluate_scenario, grid_points, toa_estimator, vlp_estimator
from weavesim.positioning.models import (
    ACOUSTIC_BAND_HZ,
    C_SOUND,
    Beacon,
    PositionEstimate,
    RangeObservation,
    lambertian_order,
    observation_arrays,
    propagation_speed,
    simulate_toa,
    vlp_rss,
)
from weavesim.positioning.solvers import (
    DegenerateGeometry,
    NegativePower,
    NoConsensus,
    NoConvergence,
    PositioningError,
    RansacConfig,
    UnobservableBias,
    linear_position,
    ransac_trilaterate,
    trilaterate_hybrid,
    trilaterate_ls,
    vlp_observe,
    vlp_position,
)

__all__ = [
    "ACOUSTIC_BAND_HZ",
    "C_SOUND",
    "Beacon",
    "DegenerateGeometry",
    "ErrorStats",
    "NegativePower",
    "NoConsensus",
    "NoConvergence",
    "PositionEstimate",
    "PositioningError",
    "RangeObservation",
    "RansacConfig",
    "UnobservableBias",
    "evaluate_scenario",
    "grid_points",
    "lambertian_order",
    "linear_position",
    "observation_arrays",
    "propagation_speed",
    "ransac_trilaterate",
    "simulate_toa",
    "toa_estimator",
    "trilaterate_hybrid",
    "trilaterate_ls",
    "vlp_estimator",
    "vlp_observe",
    "vlp_position",
    "vlp_rss",
]
