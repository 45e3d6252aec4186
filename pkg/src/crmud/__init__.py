"""Multiuser diversity in interweaved cognitive radio.

Monte Carlo estimates of the secondary network's average capacity under
QoS-constrained power control, the asymptotic lower/upper capacity bounds,
and their ``k log2(ln N)`` scaling constants.
"""

from .closedform import (
    asymptotic_k_lower,
    asymptotic_k_upper,
    lower_bound_capacity,
    upper_bound_capacity,
)
from .model import ChannelDraw, InvalidParameters, SystemParams, reference_params, sample_channels
from .montecarlo import (
    CapacityEstimate,
    OccupancyMode,
    estimate_capacity,
    estimate_departure_rate,
    run_trials,
    simulate_queue,
)
from .sched import Scheduler, ScheduleDecision, genie_upper_snr, schedule_max_snr, schedule_two_stage

__version__ = "0.1.0"
