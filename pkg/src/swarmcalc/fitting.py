"""Weighted nonlinear least squares in the Marquardt-Levenberg style.

Minimizes sum_i w_i (y_i - f(x_i; p))^2 with damped normal equations
(multiplicative damping of the diagonal, start 1e-3, factor 10), central
finite-difference Jacobians with per-parameter step 1e-6*max(|p|, 1), a
relative chi-square stopping tolerance of 1e-9, and at most 200
iterations by default. Parameters can be fixed, and box bounds are
enforced by clamping an offending parameter at its bound and refitting
the rest. Asymptotic standard errors follow the usual
(J^T W J)^{-1} * chi2/dof convention, matching what interactive fitting
tools print alongside "rms of residuals" = sqrt(chi2/dof).

Datasets are canonicalized (rows sorted by x, then y, then w) at
construction, which makes fits exactly invariant under row permutation.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "FitError",
    "Dataset",
    "ModelSpec",
    "FitResult",
    "LMOptions",
    "levenberg_marquardt",
    "asymptotic_stderr",
    "model_performance",
    "model_interference",
    "model_switch_times",
    "model_feedback_growth",
    "model_drift",
    "model_rational_profile",
    "model_custom",
    "fit_performance",
    "fit_staged",
    "fit_narrow",
    "fit_switch_times",
]


class FitError(RuntimeError):
    """Fit could not be completed; carries the damping/descent trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


@dataclass(frozen=True)
class Dataset:
    """Weighted observations (x, y, w); weights default to 1."""

    x: np.ndarray
    y: np.ndarray
    w: np.ndarray = None
    name: str = ""

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        w = np.ones_like(x) if self.w is None else np.asarray(self.w, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.shape != w.shape:
            raise ValueError("x, y, w must be matching 1-d arrays")
        if x.size < 1:
            raise ValueError("dataset needs at least one row")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        order = np.lexsort((w, y, x))
        object.__setattr__(self, "x", x[order])
        object.__setattr__(self, "y", y[order])
        object.__setattr__(self, "w", w[order])

    def __len__(self):
        return self.x.size

    def restricted(self, lo, hi):
        keep = (self.x >= lo) & (self.x <= hi)
        return Dataset(self.x[keep], self.y[keep], self.w[keep], self.name)


@dataclass(frozen=True)
class ModelSpec:
    """A parametric curve with per-parameter fixed/free masks and bounds.

    ``func(x, params)`` must be vectorized over x. ``bounds`` holds one
    (lo, hi) pair per parameter (entries may be -inf/inf).
    """

    func: object
    names: tuple
    free: tuple
    bounds: tuple = None

    def __post_init__(self):
        if self.bounds is None:
            object.__setattr__(self, "bounds", tuple((-np.inf, np.inf) for _ in self.names))
        if len(self.names) != len(self.free) or len(self.names) != len(self.bounds):
            raise ValueError("names, free mask and bounds must align")
        if not any(self.free):
            raise ValueError("need at least one free parameter")

    def fixing(self, name):
        idx = self.names.index(name)
        free = list(self.free)
        free[idx] = False
        if not any(free):
            raise FitError(f"cannot fix '{name}': no free parameters would remain")
        return replace(self, free=tuple(free))


@dataclass(frozen=True)
class LMOptions:
    lambda0: float = 1e-3
    factor: float = 10.0
    max_iter: int = 200
    chi2_rtol: float = 1e-9
    jac_step: float = 1e-6
    lambda_max: float = 1e12


@dataclass(frozen=True)
class FitResult:
    """Fitted parameters with asymptotic errors and fit diagnostics.

    ``rms`` is the weighted root mean square of residuals sqrt(chi2/dof);
    ``percent`` is 100*stderr/|value|. Fixed parameters carry zero
    stderr and are excluded from dof. ``trace`` records the accepted
    descent steps as (iteration, chi2, damping); ``clamped`` names
    parameters frozen at a violated bound during the fit.
    """

    names: tuple
    values: np.ndarray
    stderr: np.ndarray
    percent: np.ndarray
    free: tuple
    rms: float
    chi2: float
    dof: int
    iterations: int
    converged: bool
    init: np.ndarray
    trace: tuple = ()
    clamped: tuple = ()

    def __getitem__(self, name):
        return float(self.values[self.names.index(name)])

    def stderr_of(self, name):
        return float(self.stderr[self.names.index(name)])


def _jacobian(func, x, params, free_idx, step_scale):
    cols = []
    for j in free_idx:
        h = step_scale * max(abs(params[j]), 1.0)
        hi = params.copy()
        lo = params.copy()
        hi[j] += h
        lo[j] -= h
        cols.append((func(x, hi) - func(x, lo)) / (2.0 * h))
    return np.column_stack(cols)


def asymptotic_stderr(jacobian, weights, residuals, dof):
    """Per-parameter asymptotic standard errors.

    sqrt(diag((J^T W J)^{-1}) * chi2/dof); a singular normal matrix
    yields infinite errors rather than an exception.
    """
    if dof < 1:
        raise ValueError("standard errors need dof >= 1")
    a = jacobian.T @ (weights[:, None] * jacobian)
    chi2 = float(np.sum(weights * residuals**2))
    try:
        cov = np.linalg.inv(a)
        diag = np.clip(np.diag(cov), 0.0, None)
        return np.sqrt(diag * chi2 / dof)
    except np.linalg.LinAlgError:
        return np.full(jacobian.shape[1], np.inf)


def _lm_core(model, data, init, options):
    params = np.asarray(init, dtype=float).copy()
    free_idx = [i for i, f in enumerate(model.free) if f]
    n_free = len(free_idx)
    dof = len(data) - n_free
    if dof < 1:
        raise FitError(f"{len(data)} rows cannot determine {n_free} free parameters with dof >= 1")
    x, y, w = data.x, data.y, data.w

    def chi2_of(p):
        # overflow during damping exploration becomes inf -> step rejection
        with np.errstate(over="ignore", invalid="ignore"):
            r = y - model.func(x, p)
            return float(np.sum(w * r**2)), r

    chi2, resid = chi2_of(params)
    lam = options.lambda0
    trace = [(0, chi2, lam)]
    converged = False
    iterations = 0
    jac = None
    for iterations in range(1, options.max_iter + 1):
        jac = _jacobian(model.func, x, params, free_idx, options.jac_step)
        a = jac.T @ (w[:, None] * jac)
        g = jac.T @ (w * resid)
        accepted = False
        while lam <= options.lambda_max:
            damped = a + lam * np.diag(np.maximum(np.diag(a), 1e-300))
            try:
                delta = np.linalg.solve(damped, g)
            except np.linalg.LinAlgError:
                delta, *_ = np.linalg.lstsq(damped, g, rcond=None)
            trial = params.copy()
            trial[free_idx] += delta
            chi2_trial, resid_trial = chi2_of(trial)
            if np.isfinite(chi2_trial) and chi2_trial <= chi2:
                params, resid = trial, resid_trial
                drop = chi2 - chi2_trial
                chi2 = chi2_trial
                lam = max(lam / options.factor, 1e-15)
                trace.append((iterations, chi2, lam))
                accepted = True
                if drop <= options.chi2_rtol * max(chi2, 1e-300):
                    converged = True
                break
            lam *= options.factor
        if not accepted:
            # Damping exhausted without descent: stationary to machine noise.
            converged = True
            trace.append((iterations, chi2, lam))
            break
        if converged:
            break
    if not converged:
        raise FitError(
            f"no convergence within {options.max_iter} iterations (chi2={chi2:g})", trace
        )
    stderr = np.zeros(len(params))
    if jac is None:
        jac = _jacobian(model.func, x, params, free_idx, options.jac_step)
    stderr_free = asymptotic_stderr(jac, w, resid, dof)
    stderr[free_idx] = stderr_free
    with np.errstate(divide="ignore", invalid="ignore"):
        percent = np.where(params != 0.0, 100.0 * stderr / np.abs(params), np.inf)
    percent[~np.asarray(model.free)] = 0.0
    return FitResult(
        names=model.names,
        values=params,
        stderr=stderr,
        percent=percent,
        free=model.free,
        rms=float(np.sqrt(chi2 / dof)),
        chi2=chi2,
        dof=dof,
        iterations=iterations,
        converged=converged,
        init=np.asarray(init, dtype=float),
        trace=tuple(trace),
    )


def levenberg_marquardt(model, data, init, options=LMOptions()):
    """Damped weighted least squares with clamp-and-refit box bounds.

    ``init`` supplies all parameter values; fixed parameters keep their
    initial value exactly. If a fitted parameter leaves its bounds, it is
    clamped to the violated bound, frozen, and the remaining free
    parameters are refitted.
    """
    init = np.asarray(init, dtype=float).copy()
    for i, (lo, hi) in enumerate(model.bounds):
        if model.free[i]:
            init[i] = min(max(init[i], lo), hi)
    current = model
    clamped_names = []
    while True:
        result = _lm_core(current, data, init, options)
        clamped = None
        for i, name in enumerate(current.names):
            if not current.free[i]:
                continue
            lo, hi = current.bounds[i]
            if result.values[i] < lo:
                clamped, value = name, lo
                break
            if result.values[i] > hi:
                clamped, value = name, hi
                break
        if clamped is None:
            return replace(result, clamped=tuple(clamped_names))
        clamped_names.append(clamped)
        init = result.values.copy()
        init[current.names.index(clamped)] = value
        current = current.fixing(clamped)


def _power_exp(x, p):
    # A*x^b*exp(c*x); guards x=0 with b<0 from propagating nan into fits
    # (overflow during damping exploration yields inf -> step rejection)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = p[0] * np.power(x, p[1]) * np.exp(p[2] * x)
    return np.where(np.asarray(x) == 0.0, np.where(p[1] > 0, 0.0, p[0]), out)


def model_performance():
    """Performance curve A*x^b*exp(c*x) with A = a1*a2 > 0 and c < 0."""
    return ModelSpec(
        _power_exp,
        ("a1a2", "b", "c"),
        (True, True, True),
        ((1e-300, np.inf), (-np.inf, np.inf), (-np.inf, 0.0)),
    )


def model_switch_times():
    """Same curve family with the exponential rate unconstrained in sign."""
    return ModelSpec(_power_exp, ("a1a2", "b", "c"), (True, True, True),
                     ((1e-300, np.inf), (-np.inf, np.inf), (-np.inf, np.inf)))


def model_interference():
    """Interference curve a2*exp(c*x) + d."""
    return ModelSpec(
        lambda x, p: p[0] * np.exp(p[1] * x) + p[2],
        ("a2", "c", "d"),
        (True, True, True),
        ((1e-300, np.inf), (-np.inf, 0.0), (0.0, np.inf)),
    )


def model_staged_performance(a2, c):
    """Stage-2 performance fit: a1, b free; a2, c frozen from stage 1."""
    func = lambda x, p: p[0] * np.power(x, p[1]) * p[2] * np.exp(p[3] * x)
    return ModelSpec(
        func,
        ("a1", "b", "a2", "c"),
        (True, True, False, False),
        ((1e-300, np.inf), (-np.inf, np.inf), (-np.inf, np.inf), (-np.inf, np.inf)),
    )


def model_feedback_growth():
    """Saturating feedback intensity a - exp(b*t)."""
    return ModelSpec(
        lambda t, p: p[0] - np.exp(p[1] * t),
        ("a", "b"),
        (True, True),
    )


def model_drift():
    """Sine-family drift 4*c2*(phi*sin(pi*s) - 1/2)*(s - 1/2)."""
    return ModelSpec(
        lambda s, p: 4.0 * p[0] * (p[1] * np.sin(np.pi * np.asarray(s)) - 0.5) * (np.asarray(s) - 0.5),
        ("c2", "phi"),
        (True, True),
        ((1e-300, np.inf), (0.0, 1.0)),
    )


def model_rational_profile():
    """Axially symmetric saturating profile of the rational family."""

    def func(s, p):
        m = np.minimum(np.asarray(s, dtype=float), 1.0 - np.asarray(s, dtype=float))
        return p[0] * (1.0 - 1.0 / (1.0 + p[1] * m))

    return ModelSpec(func, ("c1", "c2"), (True, True), ((0.0, 1.0), (0.0, np.inf)))


def model_custom(func, names, free=None, bounds=None):
    free = tuple(True for _ in names) if free is None else tuple(free)
    return ModelSpec(func, tuple(names), free, bounds)


def default_performance_init(data):
    # documented initial-guess policy: amplitude from the data scale,
    # unit exponent, decay rate of one per data span
    xm = float(np.max(data.x))
    return np.array([float(np.max(data.y)) / max(xm, 1e-300), 1.0, -1.0 / max(xm, 1e-300)])


def loglinear_power_exp_init(data):
    """Linearized starting point for A*x^b*exp(c*x).

    log y = log A + b*log x + c*x is linear in (log A, b, c); an ordinary
    least-squares solve on the positive rows lands in the right basin
    even for strongly correlated parameters. Falls back to the
    documented heuristic when too few rows are usable.
    """
    usable = (data.y > 0) & (data.x > 0)
    if np.count_nonzero(usable) < 4:
        return default_performance_init(data)
    x, y = data.x[usable], data.y[usable]
    design = np.column_stack([np.ones_like(x), np.log(x), x])
    coef, *_ = np.linalg.lstsq(design, np.log(y), rcond=None)
    return np.array([float(np.exp(coef[0])), float(coef[1]), float(coef[2])])


def _cooperation_init(data, a2, c):
    # with the interference factors known, log(y/(a2 e^{cx})) is linear
    # in (log a1, b)
    usable = (data.y > 0) & (data.x > 0)
    if np.count_nonzero(usable) < 2:
        return np.array([1.0, 1.0])
    x, y = data.x[usable], data.y[usable]
    rhs = np.log(y) - np.log(a2) - c * x
    design = np.column_stack([np.ones_like(x), np.log(x)])
    coef, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    return np.array([float(np.exp(coef[0])), float(coef[1])])


def fit_performance(data, init=None, options=LMOptions()):
    """Fit A*x^b*exp(c*x) to a performance dataset (>= 4 rows)."""
    if len(data) < 4:
        raise FitError("performance fit needs at least 4 rows")
    model = model_performance()
    if init is None:
        init = default_performance_init(data)
    return levenberg_marquardt(model, data, init, options)


def fit_staged(random_data, full_data, init_interference=None, init_cooperation=None,
               options=LMOptions()):
    """Two-stage fit: interference on cooperation-free data, then (a1, b).

    Stage 1 fits a2*exp(c*x)+d to the random-behavior dataset; stage 2
    fits the cooperation parameters of the full performance curve with
    (a2, c) frozen at the stage-1 values. Errors identify their stage.
    """
    if len(random_data) < 1 or len(full_data) < 1:
        raise FitError("staged fit needs both datasets nonempty")
    if init_interference is None:
        ymax, ymin = float(np.max(random_data.y)), float(np.min(random_data.y))
        init_interference = np.array(
            [max(ymax - ymin, 1e-12), -1.0 / max(float(np.max(random_data.x)), 1e-300), max(ymin, 0.0)]
        )
    try:
        stage1 = levenberg_marquardt(model_interference(), random_data, init_interference, options)
    except FitError as err:
        raise FitError(f"stage 1 (interference): {err}", err.trace)
    a2, c = stage1["a2"], stage1["c"]
    model = model_staged_performance(a2, c)
    if init_cooperation is None:
        init_cooperation = _cooperation_init(full_data, a2, c)
    init = np.array([init_cooperation[0], init_cooperation[1], a2, c])
    try:
        stage2 = levenberg_marquardt(model, full_data, init, options)
    except FitError as err:
        raise FitError(f"stage 2 (cooperation): {err}", err.trace)
    return stage1, stage2


def fit_narrow(data, interval, fixed_interference, init=None, options=LMOptions()):
    """Cooperation fit restricted to a narrow x interval, for extrapolation.

    ``fixed_interference`` is the (a2, c) pair to freeze. Needs at least
    3 rows inside the interval (free parameters + 1).
    """
    lo, hi = interval
    inside = int(np.count_nonzero((data.x >= lo) & (data.x <= hi)))
    if inside < 3:
        raise FitError(f"narrow fit needs >= 3 rows in [{lo:g}, {hi:g}], found {inside}")
    narrow = data.restricted(lo, hi)
    a2, c = fixed_interference
    model = model_staged_performance(a2, c)
    if init is None:
        init = _cooperation_init(narrow, a2, c)
    return levenberg_marquardt(model, narrow, np.array([init[0], init[1], a2, c]), options)


def fit_switch_times(data, init=None, options=LMOptions()):
    """Fit A*N^b*exp(c*N) to switching times; c free in sign (>= 4 rows).

    The default start is the log-linear solve, which handles the strong
    amplitude/rate correlation of growing exponentials.
    """
    if len(data) < 4:
        raise FitError("switching-time fit needs at least 4 rows")
    if init is None:
        init = loglinear_power_exp_init(data)
    return levenberg_marquardt(model_switch_times(), data, init, options)
