"""Frame-level game rounds: slot choice, collisions, ACKs and state updates.

Within a frame the order is fixed: devices transmit using their
start-of-frame attempt counters, the base station resolves collisions and
acknowledges lone transmissions, rewarded devices apply the LRI update,
packets generated at the end of the frame are sampled, and finally every
device moves to its next attempt counter.
"""

import csv
import enum
import gzip
import io
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .strategy import lri_update, sample_slot


class BufferPolicy(enum.Enum):
    DROP_NEW = "DropNew"
    DROP_OLD_RESTART = "DropOldRestart"

    @property
    def code(self):
        return _kernels.DROP_NEW if self is BufferPolicy.DROP_NEW else _kernels.DROP_OLD_RESTART

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        for member in cls:
            if value.lower() in (member.value.lower(), member.name.lower()):
                return member
        raise ValueError(f"unknown buffer policy {value!r}")


@dataclass
class DeviceState:
    x: int = 0

    @property
    def has_packet(self):
        return self.x > 0


@dataclass
class FrameRecord:
    frame_index: int
    activations: np.ndarray   # packets generated at the end of the frame
    states: np.ndarray        # start-of-frame attempt counters
    actions: np.ndarray       # 1-based slot, 0 = silent
    rewards: np.ndarray
    slot_occupancy: np.ndarray


def resolve_slots(actions, k=None):
    """Erasure collision model. Returns ``(rewards, slot_occupancy)``."""
    actions = np.asarray(actions, dtype=np.int64)
    if k is None:
        k = int(actions.max(initial=0))
    occupancy = np.bincount(actions[actions > 0] - 1, minlength=k)
    rewards = np.zeros(actions.shape, dtype=bool)
    sent = actions > 0
    rewards[sent] = occupancy[actions[sent] - 1] == 1
    return rewards, occupancy


def transition(state, reward, new_arrival, beta, policy=BufferPolicy.DROP_OLD_RESTART):
    x = state.x if isinstance(state, DeviceState) else int(state)
    if not 0 <= x <= beta:
        raise ValueError(f"state {x} outside 0..{beta}")
    nxt = _kernels.next_state(x, bool(reward), bool(new_arrival), beta,
                              BufferPolicy.parse(policy).code)
    return DeviceState(int(nxt))


def step_frame(states, strategies, activations, rng, *, alpha=0.01, beta=None,
               policy=BufferPolicy.DROP_OLD_RESTART, learning=True, frame_index=0,
               uniforms=None):
    """Play one round for all devices.

    ``strategies`` is an ``(N, beta, K)`` array and is not modified; the
    updated copy is returned together with the record and next states.
    One uniform per device is drawn from ``rng`` (or taken from
    ``uniforms``) whether or not the device transmits.
    """
    states = np.asarray(states, dtype=np.int64)
    strategies = np.asarray(strategies, dtype=float)
    n, b, k = strategies.shape
    beta = b if beta is None else beta
    policy = BufferPolicy.parse(policy)
    u = rng.random(n) if uniforms is None else np.asarray(uniforms)

    actions = np.zeros(n, dtype=np.int64)
    for i in range(n):
        if states[i] > 0:
            actions[i] = sample_slot(strategies[i], int(states[i]), _Fixed(u[i]))
    rewards, occupancy = resolve_slots(actions, k)

    updated = strategies.copy()
    if learning:
        for i in np.flatnonzero(rewards):
            updated[i] = lri_update(updated[i], int(states[i]), int(actions[i]), 1, alpha)

    arrivals = np.asarray(activations, dtype=bool)
    nxt = np.array([transition(int(states[i]), rewards[i], arrivals[i], beta, policy).x
                    for i in range(n)], dtype=np.int64)
    record = FrameRecord(frame_index, arrivals.copy(), states.copy(), actions, rewards, occupancy)
    return record, nxt, updated


class _Fixed:
    """Stand-in generator that hands out one pre-drawn uniform."""

    def __init__(self, u):
        self._u = float(u)

    def random(self):
        return self._u


def success_probability(slot, device, state_probs, strategies):
    """Closed-form probability that ``device`` succeeds when sending in ``slot``.

    ``state_probs[m, i - 1]`` is the probability that device ``m`` is on
    attempt ``i``; a 1-D vector is read as attempt-1 probabilities. Devices
    are assumed independent.
    """
    strategies = np.asarray(strategies, dtype=float)
    probs = np.asarray(state_probs, dtype=float)
    if probs.ndim == 1:
        probs = probs[:, None]
    n, beta, _ = strategies.shape
    full = np.zeros((n, beta))
    full[:, :probs.shape[1]] = probs
    q = 1.0
    for m in range(n):
        if m == device:
            continue
        q *= 1.0 - float(full[m] @ strategies[m, :, slot - 1])
    return q


class Trace:
    """Columnar record of a run; iterating yields ``FrameRecord`` objects.

    Rows exist only for frames in which some device held or received a
    packet; ``frame`` maps rows to frame indices and ``total_frames`` counts
    every simulated frame, idle ones included.
    """

    def __init__(self, states, actions, rewards, k, arrivals=None, episode=None,
                 frame=None, total_frames=None, start_frame=0, total_episodes=None,
                 start_episode=0):
        self.states = states
        self.actions = actions
        self.rewards = rewards
        self.k = k
        f, n = states.shape
        self.arrivals = np.zeros((f, n), dtype=bool) if arrivals is None else arrivals
        self.episode = episode
        self.frame = np.arange(start_frame, start_frame + f) if frame is None else frame
        self.start_frame = start_frame
        self.total_frames = f if total_frames is None else total_frames
        self.start_episode = start_episode
        self.total_episodes = total_episodes

    @property
    def n_frames(self):
        return self.total_frames

    @property
    def n_rows(self):
        return self.states.shape[0]

    @property
    def n_devices(self):
        return self.states.shape[1]

    def __len__(self):
        return self.n_rows

    def __getitem__(self, t):
        occupancy = np.bincount(self.actions[t][self.actions[t] > 0] - 1, minlength=self.k)
        return FrameRecord(int(self.frame[t]), self.arrivals[t], self.states[t].astype(np.int64),
                           self.actions[t].astype(np.int64), self.rewards[t], occupancy)

    def __iter__(self):
        for t in range(self.n_rows):
            yield self[t]

    def window(self, lo, hi):
        """Sub-trace covering frames ``start_frame + lo`` up to (excluding)
        ``start_frame + hi``."""
        a, b = np.searchsorted(self.frame, [self.start_frame + lo, self.start_frame + hi])
        ep = None if self.episode is None else self.episode[a:b]
        return Trace(self.states[a:b], self.actions[a:b], self.rewards[a:b], self.k,
                     self.arrivals[a:b], ep, self.frame[a:b], hi - lo, self.start_frame + lo)

    def episode_window(self, lo, hi):
        """Sub-trace of episodes ``start_episode + lo`` up to ``start_episode + hi``."""
        a, b = np.searchsorted(self.episode, [self.start_episode + lo, self.start_episode + hi])
        first = int(self.frame[a]) if a < self.n_rows else self.start_frame + self.n_rows
        return Trace(self.states[a:b], self.actions[a:b], self.rewards[a:b], self.k,
                     self.arrivals[a:b], self.episode[a:b], self.frame[a:b], b - a, first,
                     hi - lo, self.start_episode + lo)

    @classmethod
    def concat(cls, parts):
        """Join consecutive traces (as produced by chunked runs)."""
        parts = list(parts)
        if not parts:
            raise ValueError("nothing to concatenate")
        ep = episodes = None
        if all(p.episode is not None for p in parts):
            ep = np.concatenate([p.episode for p in parts])
            episodes = sum(p.total_episodes for p in parts)
        return cls(np.concatenate([p.states for p in parts]),
                   np.concatenate([p.actions for p in parts]),
                   np.concatenate([p.rewards for p in parts]), parts[0].k,
                   np.concatenate([p.arrivals for p in parts]), ep,
                   np.concatenate([p.frame for p in parts]),
                   sum(p.total_frames for p in parts), parts[0].start_frame,
                   episodes, parts[0].start_episode)

    def write_csv(self, path):
        if str(path).endswith(".gz"):
            # mtime=0 keeps the archive byte-identical across reruns
            text = io.TextIOWrapper(gzip.GzipFile(path, "wb", mtime=0), newline="")
        else:
            text = open(path, "w", newline="")
        with text:
            writer = csv.writer(text)
            writer.writerow(["frame", "device", "x", "a", "z"])
            for t in range(self.n_rows):
                for n in range(self.n_devices):
                    writer.writerow([int(self.frame[t]), n + 1, int(self.states[t, n]),
                                     int(self.actions[t, n]), int(self.rewards[t, n])])


def _alloc(f, n):
    return (np.zeros((f, n), dtype=np.int8), np.zeros((f, n), dtype=np.int8),
            np.zeros((f, n), dtype=np.bool_))


def _row_bound(arrivals, beta, carried):
    """Upper bound on rows the continuous loop can write: a frame is busy
    only if a packet arrived within the previous ``beta`` frames (or was
    carried in from a previous chunk)."""
    hit = arrivals.any(axis=1).astype(np.int64)
    recent = np.convolve(hit, np.ones(beta + 1, dtype=np.int64))[:hit.size] > 0
    if carried:
        recent[:beta] = True
    return int(recent.sum())


def play_frames(strategies, arrivals, rng, *, alpha=0.01, beta=None, learning=True,
                policy=BufferPolicy.DROP_OLD_RESTART, x0=None, frame_offset=0):
    """Continuous loop over the rows of ``arrivals`` (packets generated at
    the end of each frame). ``strategies`` is updated in place.

    Returns ``(trace, end_states)``.
    """
    arrivals = np.ascontiguousarray(arrivals, dtype=np.bool_)
    f, n = arrivals.shape
    beta = strategies.shape[1] if beta is None else beta
    x = np.zeros(n, dtype=np.int64) if x0 is None else np.array(x0, dtype=np.int64)
    cap = _row_bound(arrivals, beta, bool(x.any()))
    uniforms = rng.random((cap, n))
    xs, acts, rews = _alloc(cap, n)
    frame_of = np.zeros(cap, dtype=np.int64)
    used = _kernels.run_frames(x, strategies, arrivals, uniforms, bool(learning), float(alpha),
                               int(beta), BufferPolicy.parse(policy).code, xs, acts, rews,
                               frame_of)
    rows = frame_of[:used]
    trace = Trace(xs[:used], acts[:used], rews[:used], strategies.shape[2], arrivals[rows],
                  frame=rows + frame_offset, total_frames=f, start_frame=frame_offset)
    return trace, x


def play_episodes(strategies, packets, rng, *, alpha=0.01, beta=None, learning=True,
                  frame_offset=0, episode_offset=0):
    """Episodic loop: row ``e`` of ``packets`` is the set of devices holding
    a fresh packet when episode ``e`` starts; no packets arrive until all
    devices are idle again. ``strategies`` is updated in place.
    """
    packets = np.ascontiguousarray(packets, dtype=np.bool_)
    e, n = packets.shape
    beta = strategies.shape[1] if beta is None else beta
    cap = int(packets.any(axis=1).sum()) * beta
    uniforms = rng.random((cap, n))
    xs, acts, rews = _alloc(cap, n)
    episode_of = np.zeros(cap, dtype=np.int64)
    used = _kernels.run_episodes(strategies, packets, uniforms, bool(learning), float(alpha),
                                 int(beta), xs, acts, rews, episode_of)
    return Trace(xs[:used], acts[:used], rews[:used], strategies.shape[2],
                 episode=episode_of[:used] + episode_offset, start_frame=frame_offset,
                 total_episodes=e, start_episode=episode_offset)
