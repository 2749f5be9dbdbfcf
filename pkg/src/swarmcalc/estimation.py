"""Inverse pipeline: observed revisions -> drift -> feedback probability.

Revision counts determine the per-round drift (ratio relation), the drift
determines the positive-feedback probability away from the s=0.5 pole
(inversion of the four-case balance), the probability is fitted with a
symmetric profile family, and the fitted profile predicts the steady
state through the Markov chain. A windowed variant tracks feedback
intensity over time and fits its saturating growth law.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import markov
from .fitting import (
    Dataset,
    FitError,
    LMOptions,
    levenberg_marquardt,
    model_drift,
    model_feedback_growth,
    model_rational_profile,
    model_custom,
)
from .profiles import DriftSpec, QuadraticFeedback, RationalFeedback, SineFeedback

__all__ = [
    "OK",
    "POLE",
    "OUT_OF_DOMAIN",
    "INSUFFICIENT",
    "HIGH_VARIANCE",
    "FeedbackEstimate",
    "FeedbackTimeSeries",
    "DriftWindow",
    "revision_ratio_to_drift",
    "estimate_feedback",
    "fit_feedback_profile",
    "predict_steady_state",
    "drift_windows_from_logs",
    "feedback_timeseries",
    "growth_weights",
    "fit_feedback_growth",
]

OK = "ok"
POLE = "undefined-at-pole"
OUT_OF_DOMAIN = "out-of-domain"
INSUFFICIENT = "insufficient-samples"
HIGH_VARIANCE = "high-variance"


@dataclass(frozen=True)
class FeedbackEstimate:
    """Per-state feedback probability estimates with status markers.

    ``p_hat`` is nan wherever the status is not ``ok`` or
    ``high-variance``; high-variance entries (within the pole mask around
    s=0.5) carry values but are excluded from profile fits. ``p_err`` is
    the delta-method standard error of each estimate: the binomial error
    of the revision ratio amplified by 1/|2s-1|, which is what makes the
    pole neighborhood unusable.
    """

    s: np.ndarray
    p_hat: np.ndarray
    status: np.ndarray
    samples: np.ndarray
    p_err: np.ndarray = None

    def fit_mask(self):
        return self.status == OK

    def defined_mask(self):
        return (self.status == OK) | (self.status == HIGH_VARIANCE)


def revision_ratio_to_drift(log):
    """Per-event drift 2*r_b/(r_b+r_r) - 1 at states with any revisions."""
    total = log.r_b + log.r_r
    keep = total > 0
    s = log.states[keep]
    ratio = log.r_b[keep] / total[keep]
    return s, 2.0 * ratio - 1.0


def estimate_feedback(log, pole_mask=None):
    """Invert revision ratios into feedback probabilities.

    P(s) = (ratio - 1 + s)/(2s - 1) for s != 0.5, defined while the ratio
    stays within [min(s,1-s), max(s,1-s)] (outside, no probability in
    [0,1] reproduces the ratio and the state is marked out-of-domain).
    The s=0.5 state is marked undefined-at-pole: positive and negative
    feedback are indistinguishable there, so no definition would have an
    observable effect. States within ``pole_mask`` (default 1.5/n) of the
    pole keep their value but are flagged high-variance.
    """
    n = log.n
    if pole_mask is None:
        pole_mask = 1.5 / n
    s = log.states
    total = log.r_b + log.r_r
    p_hat = np.full(n + 1, np.nan)
    p_err = np.full(n + 1, np.nan)
    status = np.full(n + 1, INSUFFICIENT, dtype=object)
    for k in range(n + 1):
        if total[k] == 0:
            continue
        sk = s[k]
        if sk == 0.5:
            status[k] = POLE
            continue
        ratio = log.r_b[k] / total[k]
        value = (ratio - 1.0 + sk) / (2.0 * sk - 1.0)
        if value < -1e-12 or value > 1.0 + 1e-12:
            status[k] = OUT_OF_DOMAIN
            continue
        p_hat[k] = min(max(value, 0.0), 1.0)
        # +1/2 smoothing keeps the error positive at ratios of 0 or 1
        smoothed = (log.r_b[k] + 0.5) / (total[k] + 1.0)
        p_err[k] = np.sqrt(smoothed * (1.0 - smoothed) / total[k]) / abs(2.0 * sk - 1.0)
        status[k] = HIGH_VARIANCE if abs(sk - 0.5) <= pole_mask else OK
    return FeedbackEstimate(s, p_hat, status, total.copy(), p_err)


_FAMILIES = {
    "sine": (SineFeedback, ("phi",), ((0.0, 1.0),)),
    "quadratic": (QuadraticFeedback, ("phi",), ((0.0, 1.0),)),
    "rational": (RationalFeedback, ("c1", "c2"), ((0.0, 1.0), (0.0, np.inf))),
}


def fit_feedback_profile(estimate, family="sine", options=LMOptions()):
    """Weighted least-squares fit of a profile family to the estimates.

    Pole-masked (high-variance), out-of-domain and insufficient states are
    excluded; the rest are weighted by their inverse variance (the
    estimator error grows like 1/|2s-1| toward the pole, so uniform
    weights would waste the accurate outer states). Parameters are kept
    in range by clamp-and-refit. Returns the constructed profile together
    with the FitResult.
    """
    family = family.lower()
    if family not in _FAMILIES:
        raise ValueError(f"unknown profile family '{family}'")
    cls, names, bounds = _FAMILIES[family]
    keep = estimate.fit_mask()
    if np.count_nonzero(keep) < 3:
        raise FitError(
            f"profile fit under-determined: {np.count_nonzero(keep)} usable states"
        )
    weights = None
    if estimate.p_err is not None:
        err = estimate.p_err[keep]
        if np.all(np.isfinite(err)) and np.all(err > 0):
            weights = 1.0 / err**2
    data = Dataset(estimate.s[keep], estimate.p_hat[keep], weights, name="feedback-estimate")
    peak = float(np.nanmax(data.y)) if np.any(np.isfinite(data.y)) else 0.5
    peak = min(max(peak, 0.05), 1.0)
    if family == "rational":
        model = model_rational_profile()
        init = np.array([peak, 10.0])
    else:
        if family == "sine":
            func = lambda s, p: p[0] * np.sin(np.pi * np.asarray(s))
        else:
            func = lambda s, p: p[0] * (1.0 - 4.0 * (np.asarray(s) - 0.5) ** 2)
        model = model_custom(func, names, bounds=bounds)
        init = np.array([peak])
    result = levenberg_marquardt(model, data, init, options)
    profile = cls(*[result[name] for name in names])
    return profile, result


def predict_steady_state(profile, payoff, n):
    """Steady state implied by a feedback profile: drift -> chain -> pi."""
    spec = DriftSpec(profile, payoff, n)
    return markov.steady_state(markov.build_transition(spec))


@dataclass(frozen=True)
class DriftWindow:
    """Measured drift curve for one time window (weights optional)."""

    t: float
    s: np.ndarray
    drift: np.ndarray
    weight: np.ndarray = None


def drift_windows_from_logs(times, logs, per_round=True, visit_weights=True):
    """Convert windowed revision logs into drift curves.

    ``per_round=True`` uses (r_b - r_r)/visits/n (mean consensus change
    per round, the scale the payoff constant absorbs); otherwise the
    per-event ratio relation is used. States without revisions are
    omitted. ``visit_weights`` weights each state by its occupancy, the
    inverse-variance scaling of a per-round mean.
    """
    windows = []
    for t, log in zip(times, logs):
        if per_round:
            keep = (log.visits > 0) & (log.r_b + log.r_r > 0)
            drift = (log.r_b[keep] - log.r_r[keep]) / log.visits[keep] / log.n
            weight = log.visits[keep].astype(float) if visit_weights else None
            windows.append(DriftWindow(float(t), log.states[keep], drift, weight))
        else:
            s, drift = revision_ratio_to_drift(log)
            windows.append(DriftWindow(float(t), s, drift))
    return windows


@dataclass(frozen=True)
class FeedbackTimeSeries:
    """Windowed feedback-intensity estimates phi_hat(t).

    ``skipped`` marks windows whose drift fit failed (too little data);
    their phi is nan. ``scale`` holds the fitted payoff constants and
    ``phi_err`` the asymptotic standard errors (zero when phi was clamped
    at a bound).
    """

    t: np.ndarray
    phi: np.ndarray
    scale: np.ndarray
    rms: np.ndarray
    skipped: np.ndarray
    phi_err: np.ndarray = None
    window_length: float = float("nan")


def _drift_fit_init(data):
    # the drift form is linear in (c2, c2*phi): exact weighted LSQ gives a
    # global starting point, which keeps LM out of secondary minima
    s = data.x
    design = np.column_stack([-2.0 * (s - 0.5), 4.0 * np.sin(np.pi * s) * (s - 0.5)])
    sw = np.sqrt(data.w)
    coef, *_ = np.linalg.lstsq(design * sw[:, None], data.y * sw, rcond=None)
    u, v = coef
    if u > 0:
        return np.array([u, min(max(v / u, 0.0), 1.0)])
    return np.array([max(float(np.max(np.abs(data.y))), 1e-12), 0.5])


def feedback_timeseries(windows, options=LMOptions(), window_length=float("nan")):
    """Fit (c2, phi) of the sine-family drift to each window's curve.

    Follows the sign conventions of the drift fits: when the unconstrained
    optimum would leave [0, 1], phi is clamped at the violated bound and
    the scale refitted (the bound-handling rule the drift-fit tables use,
    generalized to both bounds).
    """
    t_out, phi_out, c2_out, rms_out, skip_out, err_out = [], [], [], [], [], []
    for win in windows:
        t_out.append(win.t)
        if win.s.size < 3:
            phi_out.append(np.nan)
            c2_out.append(np.nan)
            rms_out.append(np.nan)
            err_out.append(np.nan)
            skip_out.append(True)
            continue
        data = Dataset(win.s, win.drift, win.weight, name=f"drift@t={win.t:g}")
        try:
            result = levenberg_marquardt(model_drift(), data, _drift_fit_init(data), options)
            phi_out.append(result["phi"])
            c2_out.append(result["c2"])
            rms_out.append(result.rms)
            err_out.append(result.stderr_of("phi"))
            skip_out.append(False)
        except FitError:
            phi_out.append(np.nan)
            c2_out.append(np.nan)
            rms_out.append(np.nan)
            err_out.append(np.nan)
            skip_out.append(True)
    return FeedbackTimeSeries(
        np.asarray(t_out, dtype=float),
        np.asarray(phi_out, dtype=float),
        np.asarray(c2_out, dtype=float),
        np.asarray(rms_out, dtype=float),
        np.asarray(skip_out, dtype=bool),
        np.asarray(err_out, dtype=float),
        window_length,
    )


def growth_weights(t, zero_before=700.0, double_from=3000.0):
    """Weighting recipe for the growth fit: drop the early transient,
    double-weight the saturated tail."""
    t = np.asarray(t, dtype=float)
    w = np.ones_like(t)
    w[t < zero_before] = 0.0
    w[t >= double_from] = 2.0
    return w


def fit_feedback_growth(series, weights=None, options=LMOptions()):
    """Weighted fit of phi(t) = a - exp(b*t) to an intensity time series.

    Skipped windows are excluded; ``weights`` (aligned with ``series.t``)
    default to 1. Needs at least 3 usable points.
    """
    keep = ~series.skipped & np.isfinite(series.phi)
    if weights is None:
        weights = np.ones_like(series.t)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != series.t.shape:
        raise ValueError("weights must align with the series times")
    if np.count_nonzero(keep) < 3:
        raise FitError("growth fit needs at least 3 usable windows")
    data = Dataset(series.t[keep], series.phi[keep], weights[keep], name="phi(t)")
    top = float(np.max(data.y))
    span = max(float(np.max(data.x)), 1.0)
    first = max(float(np.min(data.x[data.w > 0])) if np.any(data.w > 0) else span, 1.0)
    # multi-start over rise rates: the exponential is weakly identified on
    # plateau-dominated series and a flat-line local optimum exists
    best = None
    for b0 in (-1.0 / first, -3.0 / span, -10.0 / span):
        try:
            candidate = levenberg_marquardt(
                model_feedback_growth(), data, np.array([top + 0.05, b0]), options
            )
        except FitError:
            continue
        if best is None or candidate.chi2 < best.chi2 - 1e-15:
            best = candidate
    if best is None:
        raise FitError("growth fit failed from all starting points")
    return best
