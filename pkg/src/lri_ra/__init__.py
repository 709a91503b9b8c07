"""Slotted random access for correlated machine-type traffic, with
linear reward-inaction slot learning and S-ALOHA / MMPC-style baselines."""

from .config import SimConfig, load_config
from .engine import BufferPolicy, Trace, resolve_slots, step_frame, success_probability, transition
from .metrics import (MetricsReport, UndefinedMetricError, packet_transmission_time,
                      system_throughput, throughput_gain, windowed_throughput)
from .runner import run_experiment, run_replication, run_simulation, sweep
from .strategy import init_uniform, is_pure, lri_update, pure_assignment, sample_slot

__version__ = "0.1.0"
