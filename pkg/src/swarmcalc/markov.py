"""Exact chain-level analysis of the urn model.

The urn's state changes by exactly one marble per move, so the model is a
birth-death Markov chain on states B = 0..n. The transition matrix is
column-stochastic: column j holds the outgoing probabilities of state
B = j. The up-probability from state B is (drift(B/n) + 1)/2; boundary
columns are completed with self-loops so every column sums to one.

With payoff magnitudes below one the simulation also takes no-op steps
that this chain does not model, so time-based quantities (occupancy,
first-passage times) match the simulation exactly only for payoff = 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .profiles import drift

__all__ = [
    "NonConvergenceError",
    "TransitionMatrix",
    "SplittingCurve",
    "MfptVector",
    "build_transition",
    "steady_state",
    "steady_state_detailed_balance",
    "splitting_probability",
    "splitting_exact",
    "mfpt",
    "distribution_peaks",
]


class NonConvergenceError(RuntimeError):
    """Iterative solve failed to reach tolerance within the budget."""

    def __init__(self, message, iterations):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


@dataclass(frozen=True)
class TransitionMatrix:
    """Tridiagonal column-stochastic chain over states 0..n.

    ``up[k]``/``down[k]`` are the move probabilities out of state k
    (down[0] = up[n] = 0 after boundary completion by self-loops).
    """

    n: int
    matrix: np.ndarray
    up: np.ndarray
    down: np.ndarray


def build_transition(spec):
    """Transition matrix of the chain induced by a drift specification.

    Raises ValueError naming the offending state if |drift| exceeds one
    anywhere (a drift of magnitude one is a certain move; beyond that the
    half-shift (drift+1)/2 is not a probability).
    """
    n = spec.n
    s = np.arange(n + 1) / n
    d = np.asarray(drift(spec, s), dtype=float)
    bad = np.nonzero(np.abs(d) > 1.0 + 1e-12)[0]
    if bad.size:
        k = int(bad[0])
        raise ValueError(
            f"drift {d[k]:g} at state B={k} (s={s[k]:g}) exceeds magnitude 1; "
            "the chain construction requires payoff <= 1"
        )
    p = 0.5 * (d + 1.0)
    q = 1.0 - p
    t = np.zeros((n + 1, n + 1))
    for j in range(n + 1):
        if 0 < j < n:
            t[j + 1, j] = p[j]
            t[j - 1, j] = q[j]
        elif j == 0:
            t[1, 0] = p[0]
            t[0, 0] = 1.0 - p[0]
        else:
            t[n - 1, n] = q[n]
            t[n, n] = 1.0 - q[n]
    up = p.copy()
    down = q.copy()
    up[n] = 0.0
    down[0] = 0.0
    return TransitionMatrix(n, t, up, down)


def steady_state(tm, tol=1e-12, max_iter=10**6):
    """Equilibrium distribution: the nonnegative eigenvector of T for λ=1.

    Computed by inverse power iteration with the known shift 1 + 1e-10
    (plain power iteration on T oscillates for the period-2 chains that
    payoff = 1 produces, and its error decays too slowly for bistable
    chains whose relaxation time is the switching time). Iterates until
    successive normalized iterates differ by less than ``tol`` in sup
    norm, then verifies the fixed-point residual.

    Raises NonConvergenceError (carrying the iteration count) if the
    budget is exhausted or the result is not a fixed point, which
    indicates a reducible chain.
    """
    n = tm.n
    shifted = tm.matrix - (1.0 + 1e-10) * np.eye(n + 1)
    x = np.full(n + 1, 1.0 / (n + 1))
    for iteration in range(1, max_iter + 1):
        try:
            y = np.linalg.solve(shifted, x)
        except np.linalg.LinAlgError:
            raise NonConvergenceError("singular shifted system", iteration)
        y = y * np.sign(y[np.argmax(np.abs(y))])
        total = y.sum()
        if total == 0:
            raise NonConvergenceError("degenerate iterate", iteration)
        y /= total
        if np.max(np.abs(y - x)) < tol:
            x = y
            break
        x = y
    else:
        raise NonConvergenceError("steady state did not converge", max_iter)
    pi = np.clip(x, 0.0, None)
    pi /= pi.sum()
    residual = np.max(np.abs(tm.matrix @ pi - pi))
    if residual > 1e-8:
        raise NonConvergenceError(
            f"fixed-point residual {residual:g} exceeds 1e-8 (reducible chain?)", iteration
        )
    return pi


def steady_state_detailed_balance(tm):
    """Closed-form equilibrium via detailed balance (independent oracle).

    For a birth-death chain, pi(B) is proportional to the running product
    of up(k-1)/down(k). Raises ValueError on a vanishing interior down
    probability (degenerate chain).
    """
    n = tm.n
    down_interior = tm.down[1:]
    if np.any(down_interior == 0.0):
        k = 1 + int(np.argmin(down_interior))
        raise ValueError(f"down-probability vanishes at interior state B={k}")
    log_ratio = np.log(np.maximum(tm.up[:-1], 0.0)) - np.log(down_interior)
    log_pi = np.concatenate(([0.0], np.cumsum(log_ratio)))
    log_pi -= log_pi.max()
    with np.errstate(under="ignore"):
        pi = np.exp(log_pi)
    return pi / pi.sum()


@dataclass(frozen=True)
class SplittingCurve:
    """Probability of reaching state b before state a, for starts in a..b."""

    a: int
    b: int
    sigma: np.ndarray

    @property
    def states(self):
        return np.arange(self.a, self.b + 1)


def splitting_probability(pi, a, b):
    """Splitting probabilities from the equilibrium distribution.

    Trapezoidal rendering of the inverse-density integral
    sigma(x) = int_a^x 1/pi over int_a^b 1/pi. The trapezoid rule keeps
    the curve exactly 0.5 at the midpoint of a symmetric distribution
    (the inverse density blows up at both ends, so one-sided sums do
    not), and tracks the exact first-step committor closely.
    """
    a, b = int(a), int(b)
    if not a < b:
        raise ValueError("need a < b")
    window = np.asarray(pi[a : b + 1], dtype=float)
    if np.any(window <= 0.0):
        raise ValueError("equilibrium probability vanishes inside [a, b]")
    inv = 1.0 / window
    cells = 0.5 * (inv[:-1] + inv[1:])
    sigma = np.concatenate(([0.0], np.cumsum(cells))) / cells.sum()
    sigma[-1] = 1.0
    return SplittingCurve(a, b, sigma)


def splitting_exact(tm, a, b):
    """Exact splitting probabilities by first-step analysis (oracle).

    Solves sigma(x) = up(x)*sigma(x+1) + down(x)*sigma(x-1) with
    sigma(a) = 0, sigma(b) = 1 as a tridiagonal linear system.
    """
    a, b = int(a), int(b)
    if not a < b:
        raise ValueError("need a < b")
    m = b - a - 1
    sigma = np.zeros(b - a + 1)
    sigma[-1] = 1.0
    if m > 0:
        mat = np.zeros((m, m))
        rhs = np.zeros(m)
        for i, x in enumerate(range(a + 1, b)):
            mat[i, i] = tm.up[x] + tm.down[x]
            if i > 0:
                mat[i, i - 1] = -tm.down[x]
            if i < m - 1:
                mat[i, i + 1] = -tm.up[x]
            else:
                rhs[i] = tm.up[x]
        sigma[1:-1] = np.linalg.solve(mat, rhs)
    return SplittingCurve(a, b, sigma)


@dataclass(frozen=True)
class MfptVector:
    """Expected steps to first reach ``target`` from every state."""

    target: int
    times: np.ndarray


def mfpt(tm, target):
    """Mean first passage times to a target state.

    Makes the target absorbing, restricts the chain to the transient
    states Q, and solves (I - Q^T) t = 1 (the matrix is column-oriented,
    hence the transpose). Raises ValueError if the system is singular
    (target unreachable from some state).
    """
    n = tm.n
    target = int(target)
    if not 0 <= target <= n:
        raise ValueError("target outside the state space")
    keep = [i for i in range(n + 1) if i != target]
    q = tm.matrix[np.ix_(keep, keep)]
    system = np.eye(n) - q.T
    try:
        t = np.linalg.solve(system, np.ones(n))
    except np.linalg.LinAlgError:
        raise ValueError(f"target state {target} unreachable: singular fundamental system")
    times = np.zeros(n + 1)
    times[keep] = t
    return MfptVector(target, times)


def distribution_peaks(pi, k=2):
    """Indices of the k highest local maxima of a distribution, sorted."""
    pi = np.asarray(pi)
    idx = []
    for i in range(len(pi)):
        left = pi[i - 1] if i > 0 else -np.inf
        right = pi[i + 1] if i < len(pi) - 1 else -np.inf
        if pi[i] >= left and pi[i] >= right:
            idx.append(i)
    idx.sort(key=lambda i: pi[i], reverse=True)
    return sorted(idx[:k])
