"""Desk-scale agent simulation of the density-classification scenario.

Two-colored agents encounter each other one pair per round; the observer
perceives the partner's color with a configurable recognition rate, and
after five stored observations adopts the majority color (five is odd, so
there are no ties) and clears its memory. Color changes are logged as
revisions at the pre-revision consensus state, binned into time windows,
which is exactly the raw material the estimation pipeline consumes.

Consensus here is the fraction of tracked-color agents; r_b counts
revisions toward the tracked color, r_r away from it. Full consensus is
absorbing: every stored observation then matches the majority, so no
revision can occur.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .urn import RevisionLog, stream

__all__ = ["ScenarioConfig", "ScenarioResult", "dc_step", "dc_run"]

_MEMORY = 5  # observations per revision decision


@dataclass(frozen=True)
class ScenarioConfig:
    """Density-classification run setup.

    ``misread=False`` drops failed recognitions; ``True`` stores the
    wrong color instead (the two readings of recognition noise).
    ``mixing`` is 'well-mixed' (uniform partner) or 'grid' (torus random
    walk, partner within Chebyshev ``vision``).
    """

    agents: int
    steps: int
    seed: int
    recognition: float = 0.8
    initial_fraction: float = 0.5
    window: int = 0  # 0: single window over the whole run
    mixing: str = "well-mixed"
    grid_shape: tuple = (16, 16)
    vision: int = 1
    misread: bool = False

    def __post_init__(self):
        if self.agents < 2:
            raise ValueError("need at least two agents")
        if not 0.0 <= self.recognition <= 1.0:
            raise ValueError("recognition rate must be in [0,1]")
        if not 0.0 <= self.initial_fraction <= 1.0:
            raise ValueError("initial fraction must be in [0,1]")
        if self.steps < 0 or self.window < 0:
            raise ValueError("steps and window must be nonnegative")
        if self.mixing not in ("well-mixed", "grid"):
            raise ValueError("mixing must be 'well-mixed' or 'grid'")


@dataclass
class ScenarioState:
    colors: np.ndarray
    obs_count: np.ndarray
    obs_tracked: np.ndarray
    tracked_total: int
    px: np.ndarray = None
    py: np.ndarray = None


@dataclass(frozen=True)
class ScenarioResult:
    """Trajectory of tracked-color counts plus per-window revision logs."""

    agents: int
    counts: np.ndarray
    window_ends: np.ndarray
    logs: list

    @property
    def fractions(self):
        return self.counts / self.agents


def _initial_state(config, rng):
    n = config.agents
    tracked = int(round(config.initial_fraction * n))
    colors = np.zeros(n, dtype=np.int64)
    colors[rng.permutation(n)[:tracked]] = 1
    state = ScenarioState(
        colors=colors,
        obs_count=np.zeros(n, dtype=np.int64),
        obs_tracked=np.zeros(n, dtype=np.int64),
        tracked_total=tracked,
    )
    if config.mixing == "grid":
        w, h = config.grid_shape
        state.px = rng.integers(0, w, n)
        state.py = rng.integers(0, h, n)
    return state


def dc_step(state, config, rng, log=None):
    """One encounter round; mutates ``state`` and the optional log."""
    n = config.agents
    if config.mixing == "grid":
        w, h = config.grid_shape
        axis = rng.integers(0, 2, n)
        move = rng.integers(0, 2, n) * 2 - 1
        state.px = (state.px + np.where(axis == 0, move, 0)) % w
        state.py = (state.py + np.where(axis == 1, move, 0)) % h
    if log is not None:
        log.visits[state.tracked_total] += 1
    observer = int(rng.integers(n))
    if config.mixing == "grid":
        dx = np.abs(state.px - state.px[observer])
        dy = np.abs(state.py - state.py[observer])
        w, h = config.grid_shape
        near = (np.minimum(dx, w - dx) <= config.vision) & (
            np.minimum(dy, h - dy) <= config.vision
        )
        near[observer] = False
        candidates = np.nonzero(near)[0]
        if candidates.size == 0:
            return
        partner = int(candidates[rng.integers(candidates.size)])
    else:
        partner = int(rng.integers(n - 1))
        if partner >= observer:
            partner += 1
    recognized = rng.random() < config.recognition
    if not recognized and not config.misread:
        return
    observed = int(state.colors[partner])
    if not recognized:
        observed = 1 - observed
    state.obs_count[observer] += 1
    state.obs_tracked[observer] += observed
    if state.obs_count[observer] < _MEMORY:
        return
    adopted = 1 if state.obs_tracked[observer] * 2 > _MEMORY else 0
    state.obs_count[observer] = 0
    state.obs_tracked[observer] = 0
    if adopted == state.colors[observer]:
        return
    pre = state.tracked_total
    state.colors[observer] = adopted
    state.tracked_total += 1 if adopted else -1
    if log is not None:
        if adopted:
            log.r_b[pre] += 1
        else:
            log.r_r[pre] += 1


def dc_run(config):
    """Run the scenario; returns counts(t) and windowed revision logs.

    Windows of length ``config.window`` partition [0, steps] (the last
    window absorbs any remainder); window 0 covers the earliest steps.
    Deterministic for a given config (single PCG64 stream, key ()).
    """
    rng = stream(config.seed)
    state = _initial_state(config, rng)
    n = config.agents
    steps = config.steps
    window = config.window if config.window > 0 else max(steps, 1)
    n_windows = max(1, -(-steps // window))
    logs = [RevisionLog(n) for _ in range(n_windows)]
    ends = np.array([min((i + 1) * window, steps) for i in range(n_windows)], dtype=float)
    counts = np.empty(steps + 1, dtype=np.int64)
    counts[0] = state.tracked_total
    if config.mixing == "well-mixed":
        # chunked-draw fast path; event semantics identical to dc_step but
        # the uniform stream is laid out per chunk, not per event
        _run_well_mixed(state, config, rng, counts, logs, window)
    else:
        for t in range(steps):
            dc_step(state, config, rng, logs[min(t // window, n_windows - 1)])
            counts[t + 1] = state.tracked_total
    return ScenarioResult(n, counts, ends, logs)


def _run_well_mixed(state, config, rng, counts, logs, window):
    # tight loop with chunked draws; identical event semantics to dc_step
    n = config.agents
    steps = len(counts) - 1
    n_windows = len(logs)
    colors = state.colors
    obs_count = state.obs_count
    obs_tracked = state.obs_tracked
    total = state.tracked_total
    rate = config.recognition
    misread = config.misread
    chunk = 1 << 14
    t = 0
    while t < steps:
        m = min(chunk, steps - t)
        observers = rng.integers(0, n, m).tolist()
        partners = rng.integers(0, n - 1, m).tolist()
        recs = (rng.random(m) < rate).tolist()
        for j in range(m):
            w_idx = min(t // window, n_windows - 1)
            log = logs[w_idx]
            log.visits[total] += 1
            t += 1
            i = observers[j]
            p = partners[j]
            if p >= i:
                p += 1
            ok = recs[j]
            if not ok and not misread:
                counts[t] = total
                continue
            observed = colors[p] if ok else 1 - colors[p]
            obs_count[i] += 1
            obs_tracked[i] += observed
            if obs_count[i] < _MEMORY:
                counts[t] = total
                continue
            adopted = 1 if obs_tracked[i] * 2 > _MEMORY else 0
            obs_count[i] = 0
            obs_tracked[i] = 0
            if adopted != colors[i]:
                if adopted:
                    log.r_b[total] += 1
                    colors[i] = 1
                    total += 1
                else:
                    log.r_r[total] += 1
                    colors[i] = 0
                    total -= 1
            counts[t] = total
    state.tracked_total = total
