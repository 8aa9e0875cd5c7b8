"""Numerical reachability: steering searches and empirical verification."""

from .steering import SteeringResult, barrier_certificate, cone_barriers, steer
from .verify import (
    DEFAULT_VIEWPORT,
    DecayReport,
    EscapeReport,
    PointCloud,
    VerificationReport,
    barrier_check,
    decay_to_cone_check,
    escape_check,
    reach_sample,
    thread_count,
    verify_control_set,
)

__all__ = [
    "SteeringResult",
    "steer",
    "barrier_certificate",
    "cone_barriers",
    "DEFAULT_VIEWPORT",
    "PointCloud",
    "VerificationReport",
    "EscapeReport",
    "DecayReport",
    "reach_sample",
    "verify_control_set",
    "escape_check",
    "decay_to_cone_check",
    "barrier_check",
    "thread_count",
]
