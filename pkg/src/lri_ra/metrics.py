"""Delay, throughput and throughput-gain estimators over simulation traces."""

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats


class UndefinedMetricError(ValueError):
    """Raised when a metric has no valid value on the given trace."""


@dataclass
class MetricsReport:
    L: float | None
    T: float | None
    per_device_success_rate: list
    excluded_devices: int = 0
    frames: int = 0
    learning_curve: list = field(default_factory=list)
    gain_series: list = field(default_factory=list)
    undefined: str | None = None

    def to_dict(self):
        return asdict(self)


def _delivery_stats(trace):
    z = trace.rewards.astype(bool)
    deliveries = z.sum(axis=0)
    attempts = np.where(z, trace.states, 0).sum(axis=0, dtype=np.int64)
    return deliveries, attempts


def packet_transmission_time(trace):
    """Mean attempt index of delivered packets, averaged over devices.

    Devices that never delivered are left out of the device average.
    """
    if trace.n_rows == 0:
        raise UndefinedMetricError("no packet was transmitted")
    deliveries, attempts = _delivery_stats(trace)
    ok = deliveries > 0
    if not ok.any():
        raise UndefinedMetricError("no packet was delivered")
    per_device = attempts[ok] / deliveries[ok]
    return float(per_device.sum() / ok.sum())


def devices_without_delivery(trace):
    return int((trace.rewards.sum(axis=0) == 0).sum())


def success_rates(trace):
    """Empirical utility of each device: successes per simulated frame."""
    if trace.n_frames == 0:
        return np.zeros(trace.n_devices)
    return trace.rewards.sum(axis=0) / trace.n_frames


def system_throughput(trace):
    L = packet_transmission_time(trace)
    return float(success_rates(trace).sum() / L)


def windowed_throughput(trace, window, unit="frame"):
    """Throughput over consecutive non-overlapping blocks of ``window``
    frames, or of ``window`` episodes with ``unit="episode"``.

    Returns ``[(end, T), ...]`` where ``end`` counts frames (episodes) from
    the start of the trace. Blocks without a delivery give ``nan``; a
    trailing partial block is dropped unless it is the only one.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if unit == "frame":
        total, cut = trace.n_frames, trace.window
    elif unit == "episode":
        total, cut = trace.total_episodes, trace.episode_window
    else:
        raise ValueError(f"unknown unit {unit!r}")
    if window >= total:
        bounds = [(0, total)]
    else:
        bounds = [(lo, lo + window) for lo in range(0, total - window + 1, window)]
    series = []
    for lo, hi in bounds:
        try:
            value = system_throughput(cut(lo, hi))
        except UndefinedMetricError:
            value = math.nan
        series.append((hi, value))
    return series


def throughput_gain(t_series, t_saloha, t_lri_converged, tol=1e-9):
    """Affine map sending the S-ALOHA level to 0 and converged LRI to 1.

    ``t_saloha`` may be a scalar or a series aligned with ``t_series``.
    """
    den = np.asarray(t_lri_converged, dtype=float) - np.asarray(t_saloha, dtype=float)
    if np.any(np.abs(den) < tol):
        raise UndefinedMetricError("LRI and S-ALOHA throughputs coincide")
    return (np.asarray(t_series, dtype=float) - t_saloha) / den


def mean_ci(values, level=0.95):
    """Mean and t-interval half-width, ignoring ``None``/``nan`` entries."""
    arr = np.array([v for v in values if v is not None], dtype=float)
    arr = arr[~np.isnan(arr)]
    if arr.size == 0:
        return math.nan, math.nan, 0
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, math.nan, 1
    half = stats.t.ppf(0.5 + level / 2, arr.size - 1) * arr.std(ddof=1) / math.sqrt(arr.size)
    return mean, float(half), int(arr.size)


def report_from_traces(measure, learning=None, window=None):
    """Build a ``MetricsReport`` from a measurement trace and an optional
    learning-phase trace. Episodic learning curves are windowed by episode,
    since each episode is one round of learning."""
    rates = success_rates(measure)
    try:
        L = packet_transmission_time(measure)
        T = float(rates.sum() / L)
        undefined = None
    except UndefinedMetricError as exc:
        L = T = None
        undefined = str(exc)
    curve = []
    if learning is not None and window:
        unit = "frame" if learning.total_episodes is None else "episode"
        curve = windowed_throughput(learning, window, unit)
    return MetricsReport(L=L, T=T, per_device_success_rate=rates.tolist(),
                         excluded_devices=devices_without_delivery(measure),
                         frames=measure.n_frames, learning_curve=curve,
                         undefined=undefined)
