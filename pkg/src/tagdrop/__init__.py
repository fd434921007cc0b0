"""Reliability toolkit for unslotted backscatter tag networks.

Models, simulates, calibrates and plans networks of receiver-less
backscatter tags sharing a channel through unslotted random access: exact
and approximate tag drop rate formulas, a seeded Monte Carlo engine,
collision-zone-parameter fitting against measured data, trace-based TDR
measurement, and a design sweep that turns a reliability requirement into
packet and cycle parameters.
"""

__version__ = "0.1.0"

from .calibration import AlphaFit, MeasuredPoint, fit_alpha, rmse
from .model import (
    ChannelModel,
    NetworkConfig,
    OccupancyMetrics,
    PacketSpec,
    approximation_valid,
    bit_erasure_failure,
    bit_majority_failure,
    config_from_occupancy,
    occupancies,
    occupied_bandwidth,
    optimal_cycles,
    packet_duration,
    packet_error_rate,
    tdr_approx_cycle,
    tdr_approx_slot,
    tdr_exact,
)
from .planner import (
    DesignCandidate,
    DesignRequirement,
    max_tolerable_ber,
    recommend,
    sweep,
)
from .simulator import (
    SimOptions,
    TdrEstimate,
    estimate_tdr,
    overlap_fraction,
    simulate_inventory,
)
from .traces import ReceptionRecord, TraceTdrReport, parse_trace, window_tdr

__all__ = [
    "__version__",
    "AlphaFit",
    "MeasuredPoint",
    "fit_alpha",
    "rmse",
    "ChannelModel",
    "NetworkConfig",
    "OccupancyMetrics",
    "PacketSpec",
    "approximation_valid",
    "bit_erasure_failure",
    "bit_majority_failure",
    "config_from_occupancy",
    "occupancies",
    "occupied_bandwidth",
    "optimal_cycles",
    "packet_duration",
    "packet_error_rate",
    "tdr_approx_cycle",
    "tdr_approx_slot",
    "tdr_exact",
    "DesignCandidate",
    "DesignRequirement",
    "max_tolerable_ber",
    "recommend",
    "sweep",
    "SimOptions",
    "TdrEstimate",
    "estimate_tdr",
    "overlap_fraction",
    "simulate_inventory",
    "ReceptionRecord",
    "TraceTdrReport",
    "parse_trace",
    "window_tdr",
]
