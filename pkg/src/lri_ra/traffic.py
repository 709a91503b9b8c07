"""Correlated packet generation from a space-time Poisson event process.

Frames are active with probability ``1 - exp(-mu)``. In an active frame a
Poisson(lambda * side**2) number of events lands uniformly in the square
and every device within ``activation_radius`` of an event generates a
packet, which is what correlates neighbouring devices.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from ._kernels import mark_activations


@dataclass(frozen=True)
class Arena:
    side_length: float
    activation_radius: float
    device_positions: np.ndarray

    def __post_init__(self):
        if self.side_length <= 0:
            raise ValueError("side_length must be positive")
        if self.activation_radius <= 0:
            raise ValueError("activation_radius must be positive")
        pos = np.asarray(self.device_positions, dtype=float).reshape(-1, 2)
        if np.any(pos < 0) or np.any(pos > self.side_length):
            raise ValueError("device positions must lie inside the square")
        object.__setattr__(self, "device_positions", pos)

    @property
    def n_devices(self):
        return self.device_positions.shape[0]


@dataclass
class ActivationBatch:
    """Activations for a block of consecutive frames."""
    active: np.ndarray        # (F,) bool
    event_count: np.ndarray   # (F,) int
    y: np.ndarray             # (F, N) bool


def place_devices(side, n, rng, radius=1.25):
    positions = rng.random((n, 2)) * side
    return Arena(side, radius, positions)


def sample_frame_active(mu, rng):
    return bool(rng.random() < -math.expm1(-mu))


def sample_events(lam, arena, rng):
    side = arena.side_length
    count = rng.poisson(lam * side * side)
    return rng.random((count, 2)) * side


def _covered(positions, events, radius):
    dx = events[:, 0, None] - positions[None, :, 0]
    dy = events[:, 1, None] - positions[None, :, 1]
    return dx * dx + dy * dy <= radius * radius


def activations_from_events(arena, events):
    events = np.asarray(events, dtype=float).reshape(-1, 2)
    if events.shape[0] == 0:
        return np.zeros(arena.n_devices, dtype=bool)
    return _covered(arena.device_positions, events, arena.activation_radius).any(axis=0)


def sample_activations(arena, lam, mu, n_frames, rng, first_active=True):
    """Vectorised equivalent of sampling ``n_frames`` frames one at a time.

    ``mu=None`` marks every frame active (episodic use, where each episode
    starts with one event frame).
    """
    if mu is None:
        active = np.ones(n_frames, dtype=bool)
    else:
        active = rng.random(n_frames) < -math.expm1(-mu)
    if first_active and n_frames:
        active[0] = True
    side = arena.side_length
    counts = np.zeros(n_frames, dtype=np.int64)
    counts[active] = rng.poisson(lam * side * side, int(active.sum()))
    events = rng.random((int(counts.sum()), 2)) * side
    frame_of_event = np.repeat(np.arange(n_frames), counts)
    y = np.zeros((n_frames, arena.n_devices), dtype=bool)
    mark_activations(events, frame_of_event, arena.device_positions,
                     float(arena.activation_radius), y)
    return ActivationBatch(active, counts, y)


def clipped_disc_area(position, radius, side, grid=1000):
    """Area of the disc around ``position`` that lies inside the square.

    Midpoint rule on a ``grid x grid`` lattice over the disc's bounding box.
    """
    x0, y0 = position
    h = 2.0 * radius / grid
    offs = -radius + h * (np.arange(grid) + 0.5)
    xs = x0 + offs
    ys = y0 + offs
    in_x = (xs >= 0) & (xs <= side)
    in_y = (ys >= 0) & (ys <= side)
    ox = offs[in_x]
    oy = offs[in_y]
    inside = (ox[:, None] ** 2 + oy[None, :] ** 2) <= radius * radius
    return float(inside.sum()) * h * h


def marginal_activation_prob(position, lam, arena):
    area = clipped_disc_area(position, arena.activation_radius, arena.side_length)
    return -math.expm1(-lam * area)


def write_traffic_trace(path, batch):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        n = batch.y.shape[1]
        writer.writerow(["frame_index", "active_flag", "event_count"]
                        + [f"y_{i + 1}" for i in range(n)])
        for t in range(batch.y.shape[0]):
            writer.writerow([t, int(batch.active[t]), int(batch.event_count[t])]
                            + batch.y[t].astype(int).tolist())
