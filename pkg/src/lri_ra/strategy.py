"""Slot-selection strategies and the linear reward-inaction update.

A device strategy is a ``(beta, K)`` float array: row ``i - 1`` is the slot
PDF used on transmission attempt ``i``. Slots and attempts are 1-based at
this API, matching the values stored in traces.
"""

import csv
from dataclasses import dataclass

import numpy as np

from ._kernels import lri_row_update, pick_slot

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class LearningParams:
    alpha: float = 0.01
    purity_epsilon: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.purity_epsilon < 0.5:
            raise ValueError(
                f"purity_epsilon must lie in (0, 0.5), got {self.purity_epsilon}")


def init_uniform(k, beta):
    if k < 1 or beta < 1:
        raise ValueError(f"need k >= 1 and beta >= 1, got k={k}, beta={beta}")
    return np.full((beta, k), 1.0 / k)


def init_population(n, k, beta):
    """Uniform strategies for ``n`` devices, shape ``(n, beta, k)``."""
    return np.broadcast_to(init_uniform(k, beta), (n, beta, k)).copy()


def validate(strategy, tol=ROW_SUM_TOL):
    strategy = np.asarray(strategy, dtype=float)
    if strategy.ndim != 2:
        raise ValueError(f"strategy must be 2-D (beta, K), got shape {strategy.shape}")
    if np.any(strategy < 0.0) or np.any(strategy > 1.0):
        raise ValueError("strategy entries must lie in [0, 1]")
    dev = np.abs(strategy.sum(axis=1) - 1.0)
    if np.any(dev > tol):
        raise ValueError(f"strategy rows must sum to 1 (max deviation {dev.max():.3g})")
    return strategy


def _check_attempt(strategy, attempt):
    beta = strategy.shape[0]
    if not 1 <= attempt <= beta:
        raise IndexError(f"attempt {attempt} outside 1..{beta}")


def sample_slot(strategy, attempt, rng):
    """Draw a 1-based slot from the PDF of ``attempt``."""
    strategy = np.asarray(strategy, dtype=float)
    _check_attempt(strategy, attempt)
    return int(pick_slot(strategy[attempt - 1], rng.random())) + 1


def lri_update(strategy, attempt, chosen_slot, reward, alpha):
    """Return the strategy after one linear reward-inaction step.

    On ``reward == 0`` the input is returned unchanged (as a copy). On a
    reward only the row of ``attempt`` moves: the chosen slot gains
    ``alpha * (1 - p)`` and every other slot loses ``alpha * p``, after
    which the row is renormalised to absorb rounding drift.
    """
    out = np.array(strategy, dtype=float)
    _check_attempt(out, attempt)
    k = out.shape[1]
    if not 1 <= chosen_slot <= k:
        raise IndexError(f"slot {chosen_slot} outside 1..{k}")
    if reward not in (0, 1):
        raise ValueError(f"reward must be 0 or 1, got {reward}")
    if reward:
        lri_row_update(out[attempt - 1], chosen_slot - 1, float(alpha))
    return out


def is_pure(strategy, purity_epsilon=0.01):
    """True when every row puts at least ``1 - purity_epsilon`` on one slot.

    Accepts a single ``(beta, K)`` matrix or a stacked population.
    """
    strategy = np.asarray(strategy)
    return bool(np.all(strategy.max(axis=-1) >= 1.0 - purity_epsilon))


def pure_assignment(strategy):
    # np.argmax returns the first maximum, i.e. the lowest slot on ties.
    return [int(j) + 1 for j in np.argmax(np.asarray(strategy), axis=-1)]


def write_snapshots(path, snapshots):
    """Write ``[(frame, population), ...]`` as one row per (device, attempt)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        k = snapshots[0][1].shape[2] if snapshots else 0
        writer.writerow(["frame", "device_id", "attempt"] + [f"p_{j + 1}" for j in range(k)])
        for frame, population in snapshots:
            for n, matrix in enumerate(population):
                for i, row in enumerate(matrix):
                    writer.writerow([frame, n + 1, i + 1] + [repr(float(p)) for p in row])
