"""Closed-form model functions.

Feedback and payoff profiles over the consensus variable s (fraction of the
swarm committed to the tracked option, s in [0,1]), the expected per-round
drift they induce, drift roots, the cooperation/interference/performance
curves over swarm size or density, and the negative-feedback urn's closed
form.

All operations are pure functions of immutable inputs. Profiles are
symmetric about s=0.5; evaluation folds s onto [0, 0.5] so the symmetry
holds to machine precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SineFeedback",
    "QuadraticFeedback",
    "RationalFeedback",
    "TabulatedFeedback",
    "ConstantPayoff",
    "SinePayoff",
    "DriftSpec",
    "PerformanceParams",
    "feedback_prob",
    "payoff",
    "drift",
    "drift_roots",
    "cooperation",
    "interference",
    "performance",
    "ehrenfest_closed_form",
]


def _fold(s):
    """Fold consensus values onto [0, 0.5]; profiles are mirror-symmetric."""
    s = np.asarray(s, dtype=float)
    return np.minimum(s, 1.0 - s)


@dataclass(frozen=True)
class SineFeedback:
    """Positive-feedback probability phi*sin(pi*s); phi in [0,1]."""

    phi: float

    def __post_init__(self):
        if not 0.0 <= self.phi <= 1.0:
            raise ValueError(f"feedback intensity must be in [0,1], got {self.phi}")

    def prob(self, s):
        return self.phi * np.sin(np.pi * _fold(s))


@dataclass(frozen=True)
class QuadraticFeedback:
    """Positive-feedback probability phi*(1 - 4(s-1/2)^2); phi in [0,1]."""

    phi: float

    def __post_init__(self):
        if not 0.0 <= self.phi <= 1.0:
            raise ValueError(f"feedback intensity must be in [0,1], got {self.phi}")

    def prob(self, s):
        m = _fold(s)
        return self.phi * (1.0 - 4.0 * (m - 0.5) ** 2)


@dataclass(frozen=True)
class RationalFeedback:
    """Axially symmetric saturating profile c1*(1 - 1/(1 + c2*s)) on s<=0.5.

    c1 bounds the plateau height (c1 in [0,1]); c2 >= 0 sets how fast the
    probability rises away from the empty/full states.
    """

    c1: float
    c2: float

    def __post_init__(self):
        if not 0.0 <= self.c1 <= 1.0:
            raise ValueError(f"c1 must be in [0,1], got {self.c1}")
        if self.c2 < 0.0:
            raise ValueError(f"c2 must be nonnegative, got {self.c2}")

    def prob(self, s):
        m = _fold(s)
        return self.c1 * (1.0 - 1.0 / (1.0 + self.c2 * m))


@dataclass(frozen=True)
class TabulatedFeedback:
    """Piecewise-linear profile through (s, P) grid points.

    Symmetrized on construction by averaging P(s) and P(1-s); evaluation
    interpolates linearly on the folded half-axis and extends the end
    values as constants beyond the tabulated range.
    """

    grid_s: tuple = field(repr=False)
    grid_p: tuple = field(repr=False)

    def __init__(self, s_points, p_points):
        s_arr = np.asarray(s_points, dtype=float)
        p_arr = np.asarray(p_points, dtype=float)
        if s_arr.ndim != 1 or s_arr.shape != p_arr.shape or s_arr.size < 2:
            raise ValueError("tabulated profile needs >= 2 matching (s, P) points")
        if np.any((s_arr < 0) | (s_arr > 1)):
            raise ValueError("tabulated s values must lie in [0,1]")
        if np.any((p_arr < 0) | (p_arr > 1)):
            raise ValueError("tabulated P values must lie in [0,1]")
        order = np.argsort(s_arr)
        s_arr, p_arr = s_arr[order], p_arr[order]
        raw = lambda x: np.interp(x, s_arr, p_arr)
        half = np.unique(np.minimum(s_arr, 1.0 - s_arr))
        sym = 0.5 * (raw(half) + raw(1.0 - half))
        object.__setattr__(self, "grid_s", tuple(half))
        object.__setattr__(self, "grid_p", tuple(sym))

    def prob(self, s):
        return np.interp(_fold(s), np.asarray(self.grid_s), np.asarray(self.grid_p))


@dataclass(frozen=True)
class ConstantPayoff:
    """State-independent payoff magnitude M(s) = c >= 0."""

    c: float = 1.0

    def __post_init__(self):
        if self.c < 0.0:
            raise ValueError(f"payoff must be nonnegative, got {self.c}")

    def value(self, s):
        return np.full_like(np.asarray(s, dtype=float), self.c)


@dataclass(frozen=True)
class SinePayoff:
    """Symmetric payoff magnitude M(s) = c1*sin(pi*s) + c2, M >= 0."""

    c1: float
    c2: float

    def __post_init__(self):
        if min(self.c2, self.c1 + self.c2) < 0.0:
            raise ValueError("payoff profile must be nonnegative on [0,1]")

    def value(self, s):
        return self.c1 * np.sin(np.pi * _fold(s)) + self.c2


@dataclass(frozen=True)
class DriftSpec:
    """Feedback profile + payoff profile + marble count: the urn model."""

    feedback: object
    payoff: object
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"marble count must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))


def feedback_prob(profile, s):
    """Probability of positive feedback P(s) for a profile; vectorized."""
    return profile.prob(s)


def payoff(profile, s):
    """Payoff magnitude M(s) for a profile; vectorized."""
    return profile.value(s)


def drift(spec, s):
    """Expected marble change per round, 4*M(s)*(P(s)-1/2)*(s-1/2).

    This is the pure four-case expectation; the simulation's boundary
    clamping (no conversion when the needed color is absent) is handled
    by the urn module, not here.
    """
    s = np.asarray(s, dtype=float)
    return 4.0 * spec.payoff.value(s) * (spec.feedback.prob(s) - 0.5) * (s - 0.5)


def _bisect(fn, lo, hi, tol=1e-10):
    flo = fn(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol:
            return mid
        fmid = fn(mid)
        if fmid == 0.0:
            return mid
        if (flo < 0) == (fmid < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def drift_roots(spec, tol=1e-10):
    """Sorted consensus values where the drift changes sign.

    Analytic for the sine family (s1 = arcsin(1/(2*phi))/pi for phi > 1/2)
    and the quadratic family; other profiles are scanned for sign changes
    of (P(s)-1/2)(s-1/2) on a grid of 10*n points and bisected to ``tol``.
    The payoff factor is nonnegative and never flips the sign, so it does
    not contribute roots. s=0.5 is always included.
    """
    fb = spec.feedback
    roots = [0.5]
    if isinstance(fb, SineFeedback):
        if fb.phi > 0.5:
            s1 = math.asin(1.0 / (2.0 * fb.phi)) / math.pi
            if s1 < 0.5:
                roots += [s1, 1.0 - s1]
    elif isinstance(fb, QuadraticFeedback):
        if fb.phi > 0.5:
            half_width = math.sqrt((1.0 - 0.5 / fb.phi) / 4.0)
            if half_width > 0.0:
                roots += [0.5 - half_width, 0.5 + half_width]
    else:
        grid = np.linspace(0.0, 1.0, 10 * spec.n + 1)
        g = (fb.prob(grid) - 0.5) * (grid - 0.5)
        sign = np.sign(g)
        fn = lambda x: (fb.prob(x) - 0.5) * (x - 0.5)
        for i in np.nonzero((sign[:-1] != sign[1:]) & (sign[:-1] != 0))[0]:
            root = _bisect(fn, grid[i], grid[i + 1], tol)
            if all(abs(root - r) > max(tol, 1e-9) for r in roots):
                roots.append(root)
    return sorted(roots)


@dataclass(frozen=True)
class PerformanceParams:
    """Parameters of the cooperation/interference/performance curves.

    cooperation C(x) = a1*x^b, interference I(x) = a2*exp(c*x) + d, and
    performance P(x) = C(x)*(I(x)-d) = a1*x^b * a2*exp(c*x). The offset d
    only shifts the interference floor and cancels out of the performance
    product; fits identify the combined amplitude a1*a2.
    """

    a1: float
    a2: float
    b: float
    c: float
    d: float = 0.0

    def __post_init__(self):
        if self.a1 <= 0 or self.a2 <= 0:
            raise ValueError("amplitudes a1, a2 must be positive")
        if self.b <= 0:
            raise ValueError("cooperation exponent b must be positive")
        if self.c >= 0:
            raise ValueError("interference rate c must be negative")
        if self.d < 0:
            raise ValueError("interference offset d must be nonnegative")


def cooperation(params, x):
    """Cooperation potential a1*x^b over swarm size or density x >= 0."""
    x = np.asarray(x, dtype=float)
    return params.a1 * x**params.b


def interference(params, x):
    """Interference curve a2*exp(c*x) + d; tends to d for large x."""
    x = np.asarray(x, dtype=float)
    return params.a2 * np.exp(params.c * x) + params.d


def performance(params, x):
    """Swarm performance a1*x^b * a2*exp(c*x); zero at x=0 for b>0."""
    x = np.asarray(x, dtype=float)
    return params.a1 * x**params.b * params.a2 * np.exp(params.c * x)


def ehrenfest_closed_form(t, n, b0):
    """Expected marble count after t rounds of the pure negative-feedback urn.

    Solves the mean recurrence B <- B*(1-2/n) + 1 in closed form:
    n/2 + (b0 - n/2)*(1-2/n)^t. Vectorized over t.
    """
    if not 0 <= b0 <= n:
        raise ValueError(f"initial count {b0} outside [0, {n}]")
    if n < 2:
        raise ValueError("need at least two marbles")
    t = np.asarray(t)
    return n / 2 + (b0 - n / 2) * (1.0 - 2.0 / n) ** t
