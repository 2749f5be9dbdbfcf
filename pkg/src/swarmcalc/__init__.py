"""swarmcalc: urn models of collective decisions and swarm performance curves.

Simulation of a generalized two-color urn with tunable positive feedback,
exact birth-death Markov analysis (steady states, splitting probabilities,
mean first passage times), estimation of the feedback probability from
observed decision revisions, and weighted Levenberg-Marquardt fitting of
the performance/interference/switching-time curve families.
"""

__version__ = "0.1.0"

from ._backend import backend_name
from .profiles import (
    ConstantPayoff,
    DriftSpec,
    PerformanceParams,
    QuadraticFeedback,
    RationalFeedback,
    SineFeedback,
    SinePayoff,
    TabulatedFeedback,
    cooperation,
    drift,
    drift_roots,
    ehrenfest_closed_form,
    feedback_prob,
    interference,
    payoff,
    performance,
)
from .urn import (
    DriftMeasurement,
    RevisionLog,
    SimConfig,
    StepEvent,
    SwitchingTimeEstimate,
    UrnState,
    ensemble_histogram,
    estimate_switching_time,
    measure_drift,
    record_revisions,
    run_ensemble,
    run_trajectory,
    sample_revisions,
    step,
    stream,
)
from .markov import (
    MfptVector,
    NonConvergenceError,
    SplittingCurve,
    TransitionMatrix,
    build_transition,
    distribution_peaks,
    mfpt,
    splitting_exact,
    splitting_probability,
    steady_state,
    steady_state_detailed_balance,
)
from .estimation import (
    FeedbackEstimate,
    FeedbackTimeSeries,
    estimate_feedback,
    feedback_timeseries,
    fit_feedback_growth,
    fit_feedback_profile,
    growth_weights,
    predict_steady_state,
    revision_ratio_to_drift,
)
from .fitting import (
    Dataset,
    FitError,
    FitResult,
    LMOptions,
    ModelSpec,
    asymptotic_stderr,
    fit_narrow,
    fit_performance,
    fit_staged,
    fit_switch_times,
    levenberg_marquardt,
)
from .scenario import ScenarioConfig, ScenarioResult, dc_run, dc_step
