"""Reference policies: slotted ALOHA and an MMPC-style grouping assignment.

The MMPC-style scheme is a reconstruction, not the published algorithm:
devices are placed one at a time, highest total correlation first, into
the slot whose current members they are least correlated with.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .strategy import init_population, init_uniform


@dataclass
class CorrelationEstimate:
    matrix: np.ndarray
    sample_count: int


def saloha_strategy(k, beta):
    return init_uniform(k, beta)


def estimate_correlation(activations, active=None):
    """Pearson correlation of device activation indicators.

    ``activations`` is ``(F, N)``; when ``active`` is given only those
    frames are used. Devices that never activate get an all-zero row and
    column (diagonal included); constant devices are uncorrelated with the
    rest.
    """
    y = np.asarray(activations, dtype=float)
    if active is not None:
        y = y[np.asarray(active, dtype=bool)]
    if y.shape[0] < 2:
        raise ValueError(f"need at least 2 active frames, got {y.shape[0]}")
    centred = y - y.mean(axis=0)
    cov = centred.T @ centred / y.shape[0]
    sd = np.sqrt(np.diag(cov))
    varying = sd > 0
    corr = np.zeros_like(cov)
    idx = np.flatnonzero(varying)
    corr[np.ix_(idx, idx)] = cov[np.ix_(idx, idx)] / np.outer(sd[idx], sd[idx])
    corr = np.clip(corr, -1.0, 1.0)
    ever = y.sum(axis=0) > 0
    np.fill_diagonal(corr, ever.astype(float))
    return CorrelationEstimate(corr, y.shape[0])


def mmpc_assign(correlation, k):
    """Greedy anti-affinity slot assignment; returns 1-based slots.

    Ties on correlation cost go to the smaller group, then the lower slot.
    """
    rho = np.asarray(getattr(correlation, "matrix", correlation), dtype=float)
    n = rho.shape[0]
    off = rho - np.diag(np.diag(rho))
    mass = off.sum(axis=1)
    order = sorted(range(n), key=lambda i: (-mass[i], i))
    members = [[] for _ in range(k)]
    slots = np.zeros(n, dtype=np.int64)
    for dev in order:
        best = min(range(k), key=lambda s: (off[dev, members[s]].sum(), len(members[s]), s))
        members[best].append(dev)
        slots[dev] = best + 1
    return slots


def assignment_strategies(slots, k):
    """Deterministic single-attempt strategies for a slot assignment."""
    slots = np.asarray(slots)
    pop = np.zeros((slots.size, 1, k))
    pop[np.arange(slots.size), 0, slots - 1] = 1.0
    return pop


def saloha_population(n, k, beta):
    return init_population(n, k, beta)


def write_assignment(path, slots):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["device_id", "slot"])
        for i, s in enumerate(slots):
            writer.writerow([i + 1, int(s)])
