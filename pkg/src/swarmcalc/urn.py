"""Stochastic simulation of the generalized urn model.

One round: draw a marble (blue with probability B/N), decide the feedback
sign (positive with probability P(B/N)), decide the payoff magnitude
(1 with probability M(B/N), else 0), and convert one marble accordingly.
A conversion that would remove a color that is not present is a no-op.

Determinism contract: every simulation stream is a PCG64 generator seeded
with ``SeedSequence(seed, spawn_key=key)`` where the key is documented per
operation — ``(replicate,)`` for trajectories, revision recording and
switching times, ``(state,)`` for per-state sampling, and
``(phi_index, replicate)`` for histogram scans. Identical configs produce
bit-identical outputs on both kernel backends.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .profiles import DriftSpec

__all__ = [
    "UrnState",
    "SimConfig",
    "StepEvent",
    "RevisionLog",
    "DriftMeasurement",
    "SwitchingTimeEstimate",
    "profile_tables",
    "stream",
    "step",
    "run_trajectory",
    "run_ensemble",
    "measure_drift",
    "sample_revisions",
    "record_revisions",
    "ensemble_histogram",
    "estimate_switching_time",
]


@dataclass(frozen=True)
class UrnState:
    """Current blue-marble count out of a fixed total."""

    blue: int
    total: int

    def __post_init__(self):
        if not 0 <= self.blue <= self.total:
            raise ValueError(f"blue count {self.blue} outside [0, {self.total}]")

    @property
    def fraction(self):
        return self.blue / self.total


@dataclass(frozen=True)
class SimConfig:
    """A reproducible simulation setup.

    ``init`` is a single starting count or a pair; with a pair, replicate r
    starts at ``init[r % 2]`` (used for bifurcation scans started around
    the symmetric state). Payoff values above 1 cannot be realized as
    probabilities of a unit conversion and are rejected here.
    """

    spec: DriftSpec
    steps: int
    seed: int
    init: object = None
    ensemble: int = 1

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if self.ensemble < 1:
            raise ValueError("ensemble must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        n = self.spec.n
        init = self.init
        if init is None:
            init = n // 2
        inits = (init,) if np.isscalar(init) else tuple(int(v) for v in init)
        for v in inits:
            if not 0 <= v <= n:
                raise ValueError(f"initial count {v} outside [0, {n}]")
        object.__setattr__(self, "init", inits if len(inits) > 1 else inits[0])
        _, _, pay = profile_tables(self.spec)
        if pay.max() > 1.0 + 1e-12:
            k = int(pay.argmax())
            raise ValueError(
                f"payoff {pay[k]:g} at s={k}/{n} exceeds 1; cannot be a conversion probability"
            )

    def init_for(self, replicate):
        if np.isscalar(self.init):
            return int(self.init)
        return int(self.init[replicate % len(self.init)])


@dataclass(frozen=True)
class StepEvent:
    """Outcome of one round, per the four-case decomposition."""

    drawn_color: str
    feedback_sign: str
    payoff_magnitude: int
    delta: int


@dataclass
class RevisionLog:
    """Per-state counts of observed decision revisions.

    r_b[k]: conversions toward the tracked color observed at state k,
    r_r[k]: conversions away from it, visits[k]: rounds spent at state k
    (no-op rounds count as visits only).
    """

    n: int
    r_b: np.ndarray = field(default=None)
    r_r: np.ndarray = field(default=None)
    visits: np.ndarray = field(default=None)

    def __post_init__(self):
        for name in ("r_b", "r_r", "visits"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(self.n + 1, dtype=np.int64))

    @property
    def states(self):
        return np.arange(self.n + 1) / self.n

    @property
    def revision_total(self):
        return int(self.r_b.sum() + self.r_r.sum())

    def merged(self, other):
        if other.n != self.n:
            raise ValueError("cannot merge logs with different state counts")
        return RevisionLog(
            self.n, self.r_b + other.r_b, self.r_r + other.r_r, self.visits + other.visits
        )


@dataclass(frozen=True)
class DriftMeasurement:
    """Empirical per-round drift with standard errors, per state."""

    s: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    samples: int

    @classmethod
    def from_log(cls, log, samples_per_state):
        m = samples_per_state
        mean = (log.r_b - log.r_r) / m
        second = (log.r_b + log.r_r) / m
        var = np.maximum(second - mean**2, 0.0)
        return cls(log.states, mean, np.sqrt(var / m), m)


@dataclass(frozen=True)
class SwitchingTimeEstimate:
    """Monte-Carlo first-passage summary; censored runs are excluded from
    the mean, making it a lower-bound estimator under heavy censoring."""

    mean: float
    std: float
    n_uncensored: int
    censored: int

    @property
    def has_estimate(self):
        return self.n_uncensored > 0

    @property
    def stderr(self):
        if self.n_uncensored == 0:
            return float("nan")
        return self.std / np.sqrt(self.n_uncensored)


def profile_tables(spec):
    """Evaluate s, P(s), M(s) on the state grid k/n, k = 0..n."""
    s_of = np.arange(spec.n + 1, dtype=np.float64) / spec.n
    pos = np.asarray(spec.feedback.prob(s_of), dtype=np.float64)
    pay = np.asarray(spec.payoff.value(s_of), dtype=np.float64)
    return s_of, pos, pay


def stream(seed, *key):
    """PCG64 generator for ``SeedSequence(seed, spawn_key=key)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def step(state, spec, rng):
    """One round; consumes exactly three uniforms from ``rng``."""
    s_of, pos, pay = profile_tables(spec)
    b, n = state.blue, state.total
    u = rng.random(3)
    drew_blue = u[0] < s_of[b]
    positive = u[1] < pos[b]
    paid = int(u[2] < pay[b])
    direction = 1 if drew_blue == positive else -1
    delta = direction * paid
    if (delta > 0 and b == n) or (delta < 0 and b == 0):
        delta = 0
    event = StepEvent(
        "blue" if drew_blue else "red",
        "positive" if positive else "negative",
        paid,
        delta,
    )
    return UrnState(b + delta, n), event


def run_trajectory(config, replicate=0):
    """B(t) for one replicate; length steps+1, increments in {-1, 0, +1}."""
    s_of, pos, pay = profile_tables(config.spec)
    gen = stream(config.seed, replicate)
    return _backend.kernels.trajectory(
        config.spec.n, config.init_for(replicate), config.steps, s_of, pos, pay, gen
    )


def run_ensemble(config):
    """Stacked trajectories for all replicates, shape (ensemble, steps+1)."""
    return np.stack([run_trajectory(config, r) for r in range(config.ensemble)])


def sample_revisions(config, samples_per_state):
    """Independent single-step samples at every state (stream key: (state,)).

    Returns a RevisionLog whose visits are samples_per_state everywhere;
    this is the per-state protocol behind the empirical drift curves.
    """
    if samples_per_state < 1:
        raise ValueError("need at least one sample per state")
    spec = config.spec
    s_of, pos, pay = profile_tables(spec)
    log = RevisionLog(spec.n)
    for k in range(spec.n + 1):
        gen = stream(config.seed, k)
        n_up, n_down = _backend.kernels.state_samples(
            spec.n, k, samples_per_state, s_of, pos, pay, gen
        )
        log.r_b[k] = n_up
        log.r_r[k] = n_down
        log.visits[k] = samples_per_state
    return log


def measure_drift(config, samples_per_state):
    """Empirical mean delta per state from independent single steps."""
    log = sample_revisions(config, samples_per_state)
    return DriftMeasurement.from_log(log, samples_per_state)


def record_revisions(config, burn_in=0):
    """Trajectory-based revision counts, summed over the config's replicates.

    Each replicate runs ``burn_in`` unrecorded steps followed by
    ``config.steps`` recorded ones on a single stream (key: (replicate,)).
    """
    spec = config.spec
    s_of, pos, pay = profile_tables(spec)
    total = RevisionLog(spec.n)
    for r in range(config.ensemble):
        gen = stream(config.seed, r)
        b = config.init_for(r)
        if burn_in:
            _, _, _, b = _backend.kernels.revisions(spec.n, b, burn_in, s_of, pos, pay, gen)
        r_b, r_r, visits, _ = _backend.kernels.revisions(
            spec.n, b, config.steps, s_of, pos, pay, gen
        )
        total.r_b += r_b
        total.r_r += r_r
        total.visits += visits
    return total


def ensemble_histogram(config, phis):
    """Normalized final-state histograms over a feedback-intensity grid.

    Row i is the distribution of B after ``config.steps`` steps with the
    config's feedback family rebuilt at intensity phis[i] (the family must
    take a single ``phi``), over ``config.ensemble`` replicates
    (stream key: (phi_index, replicate)). Each row sums to 1.
    """
    spec = config.spec
    if not hasattr(spec.feedback, "phi"):
        raise ValueError("histogram scan needs a single-intensity feedback family")
    family = type(spec.feedback)
    n = spec.n
    hist = np.empty((len(phis), n + 1), dtype=float)
    inits = [config.init_for(r) for r in range(config.ensemble)]
    for i, phi in enumerate(phis):
        sub = DriftSpec(family(float(phi)), spec.payoff, n)
        s_of, pos, pay = profile_tables(sub)
        gens = [stream(config.seed, i, r) for r in range(config.ensemble)]
        finals = _backend.final_states_batch(n, inits, config.steps, s_of, pos, pay, gens)
        hist[i] = np.bincount(finals, minlength=n + 1) / config.ensemble
    return hist


def estimate_switching_time(config, s_from, s_to, max_steps, replicates):
    """Monte-Carlo mean first-passage time between consensus levels.

    Starts each replicate at round(s_from*n) and records the first hitting
    time of round(s_to*n); runs longer than ``max_steps`` are censored and
    excluded from the mean (stream key: (replicate,)).
    """
    spec = config.spec
    n = spec.n
    start = int(round(s_from * n))
    target = int(round(s_to * n))
    if not (0 <= start <= n and 0 <= target <= n):
        raise ValueError("switching endpoints outside the state space")
    s_of, pos, pay = profile_tables(spec)
    gens = [stream(config.seed, r) for r in range(replicates)]
    times = _backend.hitting_times_batch(n, start, target, max_steps, s_of, pos, pay, gens)
    ok = times >= 0
    censored = int(np.count_nonzero(~ok))
    if not ok.any():
        return SwitchingTimeEstimate(float("nan"), float("nan"), 0, censored)
    hit = times[ok].astype(float)
    return SwitchingTimeEstimate(float(hit.mean()), float(hit.std()), int(ok.sum()), censored)
