"""Acceptance suite. Each test checks one numbered criterion and records a
pass/fail line that is printed in the terminal summary.

Heavy criteria (4, 6-9) run the shipped scenario files in ``configs/`` at
full replication counts; expect roughly half an hour on one core.
"""

import itertools
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from lri_ra import cli, runner
from lri_ra.baselines import saloha_population
from lri_ra.config import load_config
from lri_ra.engine import play_frames, success_probability
from lri_ra.metrics import packet_transmission_time
from lri_ra.strategy import is_pure, lri_update

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _ci(mean, half):
    return f"{mean:+.5f} +/- {half:.5f}"


# 1. simplex preservation

def test_criterion_01_simplex_preservation(criterion):
    with criterion(1, "1e6 LRI updates keep every row a PDF within 1e-12") as line:
        rng = np.random.default_rng(101)
        worst_sum = 0.0
        lowest = 1.0
        updates = 0
        for _ in range(1000):
            beta, k = int(rng.integers(1, 6)), int(rng.integers(2, 9))
            s = rng.dirichlet(np.full(k, 0.5), size=beta)
            alpha = float(rng.choice([rng.uniform(1e-4, 0.1), rng.uniform(0.1, 0.999)]))
            attempts = rng.integers(1, beta + 1, 1000)
            slots = rng.integers(1, k + 1, 1000)
            rewards = rng.random(1000) < 0.7
            for i in range(1000):
                s = lri_update(s, int(attempts[i]), int(slots[i]), int(rewards[i]), alpha)
                worst_sum = max(worst_sum, float(np.abs(s.sum(axis=-1) - 1.0).max()))
                lowest = min(lowest, float(s.min()))
                updates += 1
        line.detail = f"{updates} updates, max |row sum - 1| = {worst_sum:.2e}, min p = {lowest:.2e}"
        assert updates == 10 ** 6
        assert worst_sum <= 1e-12
        assert lowest >= 0.0 and s.max() <= 1.0


# 2. S-ALOHA analytic oracle

def test_criterion_02_saloha_oracle(criterion):
    with criterion(2, "S-ALOHA per-device success within 3 sigma of (1-1/K)^(N-1)") as line:
        k, frames = 4, 100_000
        worst = 0.0
        for n in (2, 5, 10):
            # frame 0 is silent (packets appear at the end of a frame), so play one extra
            trace, _ = play_frames(saloha_population(n, k, 1), np.ones((frames + 1, n), bool),
                                   np.random.default_rng(200 + n), beta=1, learning=False)
            sent = (trace.states > 0).sum(axis=0)
            assert np.all(sent == frames)
            p = (1 - 1 / k) ** (n - 1)
            sigma = math.sqrt(p * (1 - p) / frames)
            z = np.abs(trace.rewards.sum(axis=0) / sent - p) / sigma
            worst = max(worst, float(z.max()))
        line.detail = f"N in (2, 5, 10), largest deviation {worst:.2f} sigma"
        assert worst <= 3.0


# 3. success-probability oracle

def _enumerate(strategies, active):
    """Per-device success probability and per-(device, slot) success
    probability given that slot, by summing every activity pattern and all
    K**N joint slot choices."""
    n, _, k = strategies.shape
    p_dev = np.zeros(n)
    p_joint = np.zeros((n, k))
    for acts in itertools.product([0, 1], repeat=n):
        pa = math.prod(active[m] if a else 1 - active[m] for m, a in enumerate(acts))
        if pa == 0:
            continue
        for choice in itertools.product(range(k), repeat=n):
            pc = pa * math.prod(strategies[m, 0, c] if acts[m] else 1.0 / k
                                for m, c in enumerate(choice))
            for m in range(n):
                if acts[m] and all(not acts[o] or choice[o] != choice[m]
                                   for o in range(n) if o != m):
                    p_dev[m] += pc
                    p_joint[m, choice[m]] += pc
    # condition on the device sending in that slot
    p_slot = p_joint / (np.asarray(active)[:, None] * strategies[:, 0, :])
    return p_dev, p_slot


def test_criterion_03_success_probability_oracle(criterion):
    with criterion(3, "frozen N=3, K=3 success frequencies vs closed form and enumeration") as line:
        rng = np.random.default_rng(303)
        n, k, frames = 3, 3, 100_000
        strategies = rng.dirichlet(np.ones(k), size=(n, 1))
        worst = 0.0
        max_gap = 0.0
        for active in ([1.0, 1.0, 1.0], [0.9, 0.5, 0.3]):
            closed = np.array([[success_probability(s + 1, m, active, strategies)
                                for s in range(k)] for m in range(n)])
            p_dev, p_slot = _enumerate(strategies, active)
            # closed form and enumeration must agree exactly
            max_gap = max(max_gap, float(np.abs(closed - p_slot).max()),
                          float(np.abs((closed * strategies[:, 0]).sum(axis=1) * active
                                       - p_dev).max()))
            # with one attempt, the senders of frame t+1 are the devices activated in frame t
            arrivals = rng.random((frames + 1, n)) < np.asarray(active)
            trace, _ = play_frames(strategies.copy(), arrivals, rng, beta=1, learning=False)
            sent = trace.actions.astype(int)
            won = trace.rewards.astype(bool)
            for m in range(n):
                for s in range(k):
                    mask = sent[:, m] == s + 1
                    cnt = int(mask.sum())
                    p = closed[m, s]
                    z = abs(won[mask, m].mean() - p) / math.sqrt(p * (1 - p) / cnt)
                    worst = max(worst, z)
                p = p_dev[m]
                z = abs(won[:, m].sum() / frames - p) / math.sqrt(p * (1 - p) / frames)
                worst = max(worst, z)
        line.detail = (f"largest deviation {worst:.2f} sigma, "
                       f"closed form vs enumeration gap {max_gap:.1e}")
        assert max_gap < 1e-12
        assert worst <= 3.0


# 4. pure Nash convergence

@pytest.mark.slow
def test_criterion_04_pure_nash_convergence(criterion):
    with criterion(4, ">= 95/100 runs reach a pure collision-free assignment in 5e4 frames") as line:
        cfg = load_config(CONFIGS / "nash_small.cfg")
        assert (cfg.n_devices, cfg.k_slots, cfg.beta, cfg.alpha, cfg.frames) == (4, 4, 1, 0.01, 50_000)
        good = 0
        frames_used = []
        for i in range(cfg.replications):
            rep = runner.run_replication(cfg, i)
            slots = rep.strategies[:, 0].argmax(axis=-1)
            if (is_pure(rep.strategies, 0.01) and len(set(slots.tolist())) == cfg.n_devices
                    and rep.learned_frames <= 50_000):
                good += 1
                frames_used.append(rep.learned_frames)
        line.detail = (f"{good}/{cfg.replications} converged, median {np.median(frames_used):.0f} "
                       f"frames, max {max(frames_used)}")
        assert good >= 95


# 5. delay identity with a single attempt

@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 8), k=st.integers(1, 4), q=st.floats(0.01, 1.0),
       seed=st.integers(0, 2 ** 32 - 1))
def _check_single_attempt_delay(n, k, q, seed):
    rng = np.random.default_rng(seed)
    arrivals = rng.random((300, n)) < q
    trace, _ = play_frames(np.full((n, 1, k), 1.0 / k), arrivals, rng, alpha=0.1, beta=1)
    if trace.rewards.any():
        assert packet_transmission_time(trace) == 1.0


def test_criterion_05_single_attempt_delay(criterion):
    with criterion(5, "beta=1 traces give L == 1 exactly") as line:
        _check_single_attempt_delay()
        cfg = load_config(CONFIGS / "single_transmission.cfg").replace(
            episodes=5000, measure_episodes=2000, replications=20)
        values = [r.L for r in runner.run_experiment(cfg).reports]
        line.detail = f"200 random traces and 20 scenario replications, L values {sorted(set(values))}"
        assert values and all(v == 1.0 for v in values)


# 6. gain curve endpoints and ordering

def _first_crossing(series, level=0.9, smooth=1):
    ends = np.array([e for e, _ in series])
    g = np.array([v for _, v in series])
    if smooth > 1:
        g = np.convolve(g, np.ones(smooth) / smooth, mode="valid")
        ends = ends[smooth - 1:]
    hit = np.flatnonzero(g >= level)
    return float(ends[hit[0]]) if hit.size else math.inf


@pytest.mark.slow
def test_criterion_06_gain_curve(criterion):
    with criterion(6, "gain starts at 0 +/- 0.05, reaches >= 0.95, faster at lambda=0.08") as line:
        cfg = load_config(CONFIGS / "convergence.cfg")
        assert cfg.replications == 100 and cfg.beta == 1 and cfg.track_gain
        curves, per_seed, parts = {}, {}, []
        for lam in (0.01, 0.04, 0.08):
            res = runner.run_experiment(cfg.replace(lam=lam))
            g = np.array([v for _, v in res.gain_curve])
            curves[lam] = res.gain_curve
            per_seed[lam] = [_first_crossing(r.gain_series, smooth=10) for r in res.reports]
            start, tail = g[0], g[-20:].mean()
            parts.append(f"lambda={lam}: G0={start:+.3f} Gend={tail:.3f} "
                         f"cross={_first_crossing(res.gain_curve):.0f}")
            assert abs(start) <= 0.05, parts[-1]
            assert tail >= 0.95, parts[-1]
        fast, slow = per_seed[0.08], per_seed[0.01]
        wins = sum(a < b for a, b in zip(fast, slow))
        losses = sum(a > b for a, b in zip(fast, slow))
        p = stats.binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue
        line.detail = "; ".join(parts) + f"; paired seeds faster at 0.08: {wins}/{wins + losses} (p={p:.1e})"
        assert _first_crossing(curves[0.08]) < _first_crossing(curves[0.01])
        assert p < 0.05


# 7. low-traffic lambda sweep

@pytest.mark.slow
def test_criterion_07_lambda_sweep(criterion):
    with criterion(7, "mu=0, beta=5: LRI above S-ALOHA at lambda=0.02, gap shrinks") as line:
        cfg = load_config(CONFIGS / "low_traffic.cfg")
        assert cfg.replications == 100 and cfg.mu == 0 and cfg.beta == 5
        lams = (0.02, 0.05, 0.08, 0.12)
        results = runner.sweep(cfg, "lambda", lams, schemes=["LRI", "SALOHA"])
        diffs, parts = [], []
        for i, lam in enumerate(lams):
            lri, sal = results[2 * i], results[2 * i + 1]
            d = runner.paired_difference(lri, sal)
            diffs.append(d[0])
            parts.append(f"lambda={lam}: diff {_ci(d[0], d[1])}")
        lri, sal = results[0].aggregate["T"], results[1].aggregate["T"]
        line.detail = (f"lambda=0.02 LRI {lri['mean']:.4f} +/- {lri['ci95']:.4f} vs "
                       f"S-ALOHA {sal['mean']:.4f} +/- {sal['ci95']:.4f}; " + "; ".join(parts))
        assert lri["n"] == sal["n"] == 100
        assert lri["mean"] - lri["ci95"] > sal["mean"] + sal["ci95"]
        assert diffs[-1] < diffs[0] or min(diffs) <= 0


# 8. gap as a function of mu

@pytest.mark.slow
def test_criterion_08_mu_sweep(criterion):
    with criterion(8, "lambda=0.05: gap > 0 at mu=0.01, CI contains 0 at top mu") as line:
        cfg = load_config(CONFIGS / "traffic_intensity.cfg")
        assert cfg.replications == 100 and cfg.lam == 0.05 and cfg.beta == 5
        mus = (0.01, 0.1, 1.0, 10.0)
        gaps, parts = [], []
        for mu in mus:
            # same expected number of event frames at every mu
            p = -math.expm1(-mu)
            c = cfg.replace(mu=mu, frames=math.ceil(20_000 / p), measure_frames=math.ceil(10_000 / p))
            lri = runner.run_experiment(c)
            sal = runner.run_experiment(c.replace(scheme="SALOHA"))
            gaps.append(runner.paired_difference(lri, sal))
            parts.append(f"mu={mu}: {_ci(*gaps[-1][:2])}")
        line.detail = "; ".join(parts)
        low, top = gaps[0], gaps[-1]
        assert low[2] == top[2] == 100
        assert low[0] - low[1] > 0
        assert abs(top[0]) <= top[1]


# 9. MMPC-style comparison

@pytest.mark.slow
def test_criterion_09_mmpc_comparison(criterion):
    with criterion(9, "beta=1, lambda=0.02: LRI >= MMPC-style over paired seeds") as line:
        cfg = load_config(CONFIGS / "single_transmission.cfg")
        assert cfg.replications == 100 and cfg.beta == 1 and cfg.lam == 0.02
        lri = runner.run_experiment(cfg)
        mmpc = runner.run_experiment(cfg.replace(scheme="MMPC"))
        mean, half, n = runner.paired_difference(lri, mmpc)
        line.detail = (f"LRI {lri.aggregate['T']['mean']:.4f}, MMPC-style "
                       f"{mmpc.aggregate['T']['mean']:.4f}, paired diff {_ci(mean, half)} (n={n})")
        assert n == 100
        assert mean >= 0


# 10. determinism

def _snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


SCALED = ["--set", "replications=2", "--set", "episodes=2000", "--set", "measure_episodes=500",
          "--set", "frames=20000", "--set", "measure_frames=5000",
          "--set", "warmup_active_frames=1000"]


def test_criterion_10_determinism(criterion, tmp_path):
    with criterion(10, "same config and seed give byte-identical outputs") as line:
        checked = 0
        for cfg in sorted(CONFIGS.glob("*.cfg")):
            runs = []
            for rerun in ("a", "b"):
                out = tmp_path / cfg.stem / rerun
                args = ["run", "--config", str(cfg), "--out", str(out)] + SCALED
                assert cli.main(args) == 0
                runs.append(_snapshot(out))
            assert runs[0] == runs[1], cfg.name
            checked += len(runs[0])
        for rerun in ("a", "b"):
            assert cli.main(["sweep", "--config", str(CONFIGS / "low_traffic.cfg"),
                             "--param", "lambda", "--values", "0.02,0.12", "--schemes",
                             "LRI,SALOHA", "--out", str(tmp_path / "sweep" / rerun)] + SCALED) == 0
            assert cli.main(["trace", "--config", str(CONFIGS / "scenario_defaults.cfg"),
                             "--out", str(tmp_path / "trace" / rerun)] + SCALED) == 0
        for kind in ("sweep", "trace"):
            a, b = (_snapshot(tmp_path / kind / r) for r in ("a", "b"))
            assert a == b, kind
            checked += len(a)
        line.detail = f"{checked} files from every shipped config, a sweep and a trace compared byte for byte"
