"""Compiled inner loops.

Both frame loops consume one pre-drawn uniform per device per recorded
frame, so a run is reproducible from the numpy ``Generator`` that produced
the uniforms and matches the pure-Python ``engine.step_frame`` path
bit for bit.
"""

import numpy as np
from numba import njit

DROP_NEW = 0
DROP_OLD_RESTART = 1


@njit(cache=True)
def lri_row_update(row, slot, alpha):
    """In-place reward update of one PDF row towards ``slot`` (0-based)."""
    k = row.shape[0]
    for j in range(k):
        p = row[j]
        if j == slot:
            row[j] = p + alpha * (1.0 - p)
        else:
            row[j] = p - alpha * p
    total = 0.0
    for j in range(k):
        total += row[j]
    for j in range(k):
        row[j] = row[j] / total


@njit(cache=True)
def pick_slot(row, u):
    """Inverse-CDF draw; returns a 0-based slot index."""
    k = row.shape[0]
    acc = 0.0
    for j in range(k):
        acc += row[j]
        if u < acc:
            return j
    return k - 1


@njit(cache=True)
def next_state(x, reward, arrival, beta, policy):
    if x == 0:
        return 1 if arrival else 0
    if x >= beta or reward:
        return 1 if arrival else 0
    if arrival and policy == DROP_OLD_RESTART:
        return 1
    return x + 1


@njit(cache=True)
def _play(x, strategies, u, learning, alpha, a_out, z_out, occupancy):
    n, _, k = strategies.shape
    for s in range(k):
        occupancy[s] = 0
    for i in range(n):
        if x[i] > 0:
            slot = pick_slot(strategies[i, x[i] - 1], u[i])
            a_out[i] = slot + 1
            occupancy[slot] += 1
        else:
            a_out[i] = 0
    for i in range(n):
        z_out[i] = a_out[i] > 0 and occupancy[a_out[i] - 1] == 1
    if learning:
        for i in range(n):
            if z_out[i]:
                lri_row_update(strategies[i, x[i] - 1], a_out[i] - 1, alpha)


@njit(cache=True)
def run_frames(x, strategies, arrivals, uniforms, learning, alpha, beta,
               policy, xs, actions, rewards, frame_of):
    """Continuous-time loop over ``arrivals.shape[0]`` frames.

    ``x`` and ``strategies`` are updated in place. Frames in which no
    device holds a packet and none arrives change nothing and are skipped;
    every other frame takes the next row of ``uniforms`` and writes the
    next row of the outputs (start-of-frame states, actions, rewards).
    Returns the number of rows written.
    """
    f, n = arrivals.shape
    k = strategies.shape[2]
    occupancy = np.zeros(k, dtype=np.int64)
    r = 0
    for t in range(f):
        busy = False
        for i in range(n):
            if x[i] > 0 or arrivals[t, i]:
                busy = True
                break
        if not busy:
            continue
        for i in range(n):
            xs[r, i] = x[i]
        _play(x, strategies, uniforms[r], learning, alpha, actions[r],
              rewards[r], occupancy)
        for i in range(n):
            x[i] = next_state(x[i], rewards[r, i], arrivals[t, i], beta,
                              policy)
        frame_of[r] = t
        r += 1
    return r


@njit(cache=True)
def run_episodes(strategies, packets, uniforms, learning, alpha, beta,
                 xs, actions, rewards, episode_of):
    """Episodic loop: each episode starts from ``packets[e]`` and runs
    until every device is idle. Returns the number of frames written."""
    e_count, n = packets.shape
    k = strategies.shape[2]
    occupancy = np.zeros(k, dtype=np.int64)
    x = np.zeros(n, dtype=np.int64)
    t = 0
    for e in range(e_count):
        busy = 0
        for i in range(n):
            x[i] = 1 if packets[e, i] else 0
            busy += x[i]
        while busy > 0:
            for i in range(n):
                xs[t, i] = x[i]
            _play(x, strategies, uniforms[t], learning, alpha, actions[t],
                  rewards[t], occupancy)
            episode_of[t] = e
            busy = 0
            for i in range(n):
                x[i] = next_state(x[i], rewards[t, i], False, beta, 0)
                busy += x[i]
            t += 1
    return t


@njit(cache=True)
def mark_activations(events, frame_of_event, positions, radius, y):
    """Set ``y[frame, n]`` for every device within ``radius`` of an event."""
    r2 = radius * radius
    n = positions.shape[0]
    for e in range(events.shape[0]):
        ex = events[e, 0]
        ey = events[e, 1]
        t = frame_of_event[e]
        for i in range(n):
            dx = ex - positions[i, 0]
            dy = ey - positions[i, 1]
            if dx * dx + dy * dy <= r2:
                y[t, i] = True
