"""Replications, experiments and parameter sweeps.

Every replication owns five independent RNG streams spawned from
``SeedSequence(base_seed + index)``: device placement, learning-phase
traffic, measurement traffic, MMPC warm-up traffic and slot sampling.
Schemes run with the same seed therefore see the same devices and the same
packet arrivals, which is what makes paired comparisons meaningful.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import baselines, metrics, traffic
from .engine import Trace, play_episodes, play_frames
from .strategy import init_population, is_pure

log = logging.getLogger(__name__)

SWEEPABLE = {"lambda": "lam", "mu": "mu", "alpha": "alpha", "beta": "beta",
             "n_devices": "n_devices", "k_slots": "k_slots"}
METRICS = ("L", "T", "excluded_devices", "frames")

_POSITIONS, _LEARN, _MEASURE, _WARMUP, _POLICY = range(5)


def streams(seed):
    if isinstance(seed, np.random.Generator):
        return seed.spawn(5)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(5)]


@dataclass
class ReplicationResult:
    index: int
    report: metrics.MetricsReport
    strategies: np.ndarray
    snapshots: list = field(default_factory=list)
    assignment: np.ndarray | None = None
    learn_trace: Trace | None = None
    measure_trace: Trace | None = None
    learn_traffic: traffic.ActivationBatch | None = None
    learned_frames: int = 0


@dataclass
class ExperimentResult:
    config: object
    reports: list
    aggregate: dict
    gain_curve: list = field(default_factory=list)
    saloha_reports: list = field(default_factory=list)
    strategies: np.ndarray | None = None
    snapshots: list = field(default_factory=list)
    assignment: np.ndarray | None = None

    def values(self, metric):
        return [getattr(r, metric) for r in self.reports]


def _activations(config, arena, n_frames, rng, episodic):
    if config.traffic == "saturated":
        n = config.n_devices
        return traffic.ActivationBatch(np.ones(n_frames, dtype=bool),
                                       np.zeros(n_frames, dtype=np.int64),
                                       np.ones((n_frames, n), dtype=bool))
    mu = None if episodic else config.mu
    return traffic.sample_activations(arena, config.lam, mu, n_frames, rng)


def initial_strategies(config, arena, warmup_rng):
    """Strategies, learning flag and (MMPC only) slot assignment for a scheme."""
    n, k, beta = config.n_devices, config.k_slots, config.beta
    if config.scheme == "LRI":
        return init_population(n, k, beta), True, None
    if config.scheme == "SALOHA":
        return baselines.saloha_population(n, k, beta), False, None
    warm = _activations(config, arena, config.warmup_active_frames, warmup_rng, episodic=True)
    corr = baselines.estimate_correlation(warm.y)
    slots = baselines.mmpc_assign(corr, k)
    return baselines.assignment_strategies(slots, k), False, slots


def _learning_phase(config, strategies, learning, batch, policy_rng, stop_when_pure):
    """Run the learning phase in chunks so purity and snapshots can be
    checked between chunks. Returns ``(trace, snapshots, units_played)``."""
    episodic = config.episodic and config.traffic == "spatial"
    total = batch.y.shape[0]
    chunk = config.purity_check_every
    parts, snapshots = [], []
    x = None
    frame = 0
    done = 0
    next_snap = config.snapshot_every
    while done < total:
        hi = min(done + chunk, total)
        if episodic:
            part = play_episodes(strategies, batch.y[done:hi], policy_rng, alpha=config.alpha,
                                 beta=config.beta, learning=learning, frame_offset=frame,
                                 episode_offset=done)
        else:
            part, x = play_frames(strategies, batch.y[done:hi], policy_rng, alpha=config.alpha,
                                  beta=config.beta, learning=learning,
                                  policy=config.buffer_policy, x0=x, frame_offset=frame)
        parts.append(part)
        frame += part.n_frames
        done = hi
        if config.snapshot_every and done >= next_snap:
            snapshots.append((frame, strategies.copy()))
            next_snap = (done // config.snapshot_every + 1) * config.snapshot_every
        if stop_when_pure and learning and is_pure(strategies, config.purity_epsilon):
            log.debug("pure after %d units", done)
            break
    return Trace.concat(parts), snapshots, done


def _measurement_phase(config, strategies, learning, rng_traffic, rng_policy, arena):
    if config.episodic:
        batch = _activations(config, arena, config.measure_episodes, rng_traffic, episodic=True)
        return play_episodes(strategies, batch.y, rng_policy, alpha=config.alpha,
                             beta=config.beta, learning=learning)
    batch = _activations(config, arena, config.measure_frames, rng_traffic, episodic=False)
    trace, _ = play_frames(strategies, batch.y, rng_policy, alpha=config.alpha,
                           beta=config.beta, learning=learning, policy=config.buffer_policy)
    return trace


def run_simulation(config, seed=0):
    """Learning-phase run only: traffic drawn for ``config.frames`` frames
    (or ``config.episodes`` episodes when ``mu == 0``) and played out with
    the configured scheme. Returns the trace; final strategies are on
    ``trace.strategies``."""
    config.validate()
    rngs = streams(seed)
    arena = traffic.place_devices(config.side, config.n_devices, rngs[_POSITIONS], config.radius)
    strategies, learning, _ = initial_strategies(config, arena, rngs[_WARMUP])
    units = config.episodes if config.episodic else config.frames
    batch = _activations(config, arena, units, rngs[_LEARN], config.episodic)
    trace, _, _ = _learning_phase(config, strategies, learning, batch, rngs[_POLICY],
                                  stop_when_pure=False)
    trace.strategies = strategies
    return trace


def run_replication(config, index, keep_traces=False):
    config.validate()
    rngs = streams(config.base_seed + index)
    arena = traffic.place_devices(config.side, config.n_devices, rngs[_POSITIONS], config.radius)
    strategies, learning, slots = initial_strategies(config, arena, rngs[_WARMUP])
    units = config.episodes if config.episodic else config.frames
    batch = _activations(config, arena, units, rngs[_LEARN], config.episodic)
    learn, snapshots, played = _learning_phase(
        config, strategies, learning, batch, rngs[_POLICY],
        stop_when_pure=config.learning_frozen_after_purity)
    measure_learning = learning and config.learn_during_measurement
    measure = _measurement_phase(config, strategies, measure_learning, rngs[_MEASURE],
                                 rngs[_POLICY], arena)
    report = metrics.report_from_traces(measure, learn, config.gain_window)
    result = ReplicationResult(index, report, strategies, snapshots, slots,
                               learned_frames=learn.n_frames)
    if keep_traces:
        result.learn_trace = learn
        result.measure_trace = measure
        result.learn_traffic = batch
    return result


def _run_one(args):
    config, index = args
    return run_replication(config, index)


def _map_replications(config, jobs):
    tasks = [(config, i) for i in range(config.replications)]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    return sorted(results, key=lambda r: r.index)


def aggregate(reports):
    out = {}
    for name in METRICS:
        mean, half, n = metrics.mean_ci([getattr(r, name) for r in reports])
        out[name] = {"mean": mean, "ci95": half, "n": n}
    return out


def _curve_values(report):
    return np.array([v for _, v in report.learning_curve], dtype=float)


def gain_curves(lri_reports, saloha_reports):
    """Per-replication and replication-mean throughput-gain series.

    The S-ALOHA reference for window ``t`` is the S-ALOHA throughput on the
    same traffic window when the windows line up (same frame count, as with
    a single transmission attempt); otherwise its measured throughput.
    """
    length = min(len(r.learning_curve) for r in lri_reports + saloha_reports)
    if length == 0:
        return []
    frames = [f for f, _ in lri_reports[0].learning_curve[:length]]
    aligned = all(r.learning_curve[:length] and
                  [f for f, _ in r.learning_curve[:length]] == [f for f, _ in s.learning_curve[:length]]
                  for r, s in zip(lri_reports, saloha_reports))
    lri_t = np.array([_curve_values(r)[:length] for r in lri_reports])
    if aligned:
        ref_t = np.array([_curve_values(s)[:length] for s in saloha_reports])
    else:
        ref_t = np.array([[s.T if s.T is not None else math.nan] * length for s in saloha_reports])
    lri_final = np.array([r.T if r.T is not None else math.nan for r in lri_reports])
    sal_final = np.array([s.T if s.T is not None else math.nan for s in saloha_reports])
    for r, cur, ref, tl, ts in zip(lri_reports, lri_t, ref_t, lri_final, sal_final):
        # paired numerator against the S-ALOHA window, converged-gap denominator
        try:
            g = metrics.throughput_gain(cur - ref, 0.0, tl - ts)
        except metrics.UndefinedMetricError:
            continue
        r.gain_series = [(f, float(v)) for f, v in zip(frames, g)]
    try:
        g = metrics.throughput_gain(np.nanmean(lri_t, axis=0) - np.nanmean(ref_t, axis=0), 0.0,
                                    np.nanmean(lri_final) - np.nanmean(sal_final))
    except metrics.UndefinedMetricError:
        return []
    return [(f, float(v)) for f, v in zip(frames, g)]


def run_experiment(config, jobs=1):
    config.validate()
    results = _map_replications(config, jobs)
    reports = [r.report for r in results]
    out = ExperimentResult(config, reports, aggregate(reports), strategies=results[0].strategies,
                           snapshots=results[0].snapshots, assignment=results[0].assignment)
    if config.track_gain and config.scheme == "LRI":
        saloha = _map_replications(config.replace(scheme="SALOHA"), jobs)
        out.saloha_reports = [r.report for r in saloha]
        out.gain_curve = gain_curves(reports, out.saloha_reports)
    return out


def sweep(config, parameter, values, schemes=None, jobs=1):
    """One experiment per (value, scheme); all share ``config.base_seed``."""
    if parameter not in SWEEPABLE:
        raise ValueError(f"cannot sweep {parameter!r}; choose from {', '.join(SWEEPABLE)}")
    schemes = schemes or [config.scheme]
    results = []
    for value in values:
        for scheme in schemes:
            cfg = config.replace(**{SWEEPABLE[parameter]: value, "scheme": scheme})
            log.info("%s=%s scheme=%s", parameter, value, scheme)
            results.append(run_experiment(cfg, jobs))
    return results


def paired_difference(a, b, metric="T"):
    """Mean and 95% half-width of per-replication ``a - b`` differences."""
    diffs = []
    for ra, rb in zip(a.reports, b.reports):
        va, vb = getattr(ra, metric), getattr(rb, metric)
        if va is not None and vb is not None:
            diffs.append(va - vb)
    return metrics.mean_ci(diffs)
