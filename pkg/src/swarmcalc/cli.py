"""Command-line surface.

Subcommands map one-to-one onto the library: ``simulate`` (urn runs and
histograms), ``analyze`` (steady state, splitting, mean first passage),
``fit`` (the named curve-fit recipes), ``estimate`` (revision logs to
feedback profiles and predicted steady states), ``scenario-dc`` (the
agent scenario), and ``replay`` (re-run a recorded manifest).

Exit codes: 0 success, 2 usage or malformed input, 3 I/O failure,
4 numerical failure. ``SWARMCALC_SEED`` overrides ``--seed`` when set.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, csvio, estimation, fitting, markov
from ._backend import backend_name
from .fitting import Dataset, FitError, LMOptions
from .markov import NonConvergenceError
from .profiles import (
    ConstantPayoff,
    DriftSpec,
    QuadraticFeedback,
    RationalFeedback,
    SineFeedback,
    SinePayoff,
    TabulatedFeedback,
)
from .scenario import ScenarioConfig, dc_run
from .urn import SimConfig, ensemble_histogram, record_revisions, run_trajectory

USAGE_ERROR, IO_ERROR, NUMERIC_ERROR = 2, 3, 4


def _add_profile_flags(parser):
    parser.add_argument("--profile", default="sine",
                        help="sine|quad|rational or a curve CSV of (s, P) points")
    parser.add_argument("--phi", type=float, default=0.5, help="feedback intensity")
    parser.add_argument("--c1", type=float, default=0.5, help="rational profile height")
    parser.add_argument("--c2", type=float, default=10.0, help="rational profile steepness")
    parser.add_argument("--payoff", default="const:1",
                        help="payoff profile, const:c or sine:c1,c2")
    parser.add_argument("--n", type=int, default=64, help="marble count")


def _profile_from(args):
    name = args.profile.lower()
    if name == "sine":
        return SineFeedback(args.phi)
    if name in ("quad", "quadratic"):
        return QuadraticFeedback(args.phi)
    if name == "rational":
        return RationalFeedback(args.c1, args.c2)
    x, y, _ = csvio.read_curve(args.profile)
    return TabulatedFeedback(x, y)


def _payoff_from(args):
    text = args.payoff
    kind, _, params = text.partition(":")
    try:
        if kind == "const":
            return ConstantPayoff(float(params or "1"))
        if kind == "sine":
            c1, c2 = (float(v) for v in params.split(","))
            return SinePayoff(c1, c2)
    except ValueError:
        pass
    raise ValueError(f"cannot parse payoff spec {text!r} (use const:c or sine:c1,c2)")


def _spec_from(args):
    return DriftSpec(_profile_from(args), _payoff_from(args), args.n)


def _seed_from(args):
    env = os.environ.get("SWARMCALC_SEED")
    return int(env) if env else args.seed


def format_fit_table(result, function_label):
    """Plain-text fit report in the layout of gnuplot's fit log."""
    lines = [
        f"function                      {function_label}",
        f"degrees of freedom            {result.dof}",
        f"rms of residuals              {csvio.fmt(result.rms)}",
        "",
        "parameter        value            asymptotic standard error",
    ]
    for i, name in enumerate(result.names):
        if not result.free[i]:
            lines.append(f"{name:<16} {csvio.fmt(result.values[i]):<16} (fixed)")
            continue
        lines.append(
            f"{name:<16} {csvio.fmt(result.values[i]):<16} "
            f"+/- {result.stderr[i]:<11.4g} ({result.percent[i]:.4g}%)"
        )
    return "\n".join(lines)


def _cmd_simulate(args, argv):
    started = time.time()
    spec = _spec_from(args)
    seed = _seed_from(args)
    init = "pair" if args.init == "pair" else int(args.init)
    init_value = (spec.n // 2, spec.n // 2 + 1) if init == "pair" else init
    config = SimConfig(spec, args.steps, seed, init_value, args.replicates)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trajectory = run_trajectory(config)
    csvio.write_curve(out / "trajectory.csv", np.arange(len(trajectory)), trajectory)
    outputs = [out / "trajectory.csv"]
    phi = getattr(spec.feedback, "phi", float("nan"))
    if hasattr(spec.feedback, "phi"):
        hist = ensemble_histogram(config, [phi])
        csvio.write_histogram(out / "histogram.csv", [phi], hist)
        outputs.append(out / "histogram.csv")
    log = record_revisions(config)
    csvio.write_log(out / "revisions.csv", log)
    outputs.append(out / "revisions.csv")
    csvio.write_manifest(out / "manifest.json", argv, seed, outputs=outputs, started=started)
    return 0


def _cmd_analyze(args, argv):
    started = time.time()
    spec = _spec_from(args)
    tm = markov.build_transition(spec)
    states = np.arange(spec.n + 1) / spec.n
    if args.what == "steady-state":
        pi = markov.steady_state(tm)
        csvio.write_curve(args.out, states, pi)
    elif args.what == "splitting":
        pi = markov.steady_state(tm)
        if args.a is None or args.b is None:
            reference = DriftSpec(type(spec.feedback)(1.0), spec.payoff, spec.n) \
                if hasattr(spec.feedback, "phi") else spec
            peaks = markov.distribution_peaks(
                markov.steady_state(markov.build_transition(reference)), 2
            )
            a, b = (peaks[0], peaks[-1]) if len(peaks) > 1 else (0, spec.n)
        else:
            a, b = args.a, args.b
        curve = markov.splitting_probability(pi, a, b)
        csvio.write_curve(args.out, curve.states / spec.n, curve.sigma)
    else:
        if args.target is None:
            raise ValueError("mfpt needs --target")
        vector = markov.mfpt(tm, args.target)
        csvio.write_curve(args.out, states, vector.times)
    csvio.write_manifest(
        Path(args.out).with_suffix(".manifest.json"), argv, None, outputs=[args.out],
        started=started,
    )
    return 0


def _parse_assignments(pairs):
    out = {}
    for pair in pairs or []:
        name, _, value = pair.partition("=")
        if not _:
            raise ValueError(f"expected name=value, got {pair!r}")
        out[name] = float(value)
    return out


def _load_fit_dataset(path, weights_mode):
    x, y, third = csvio.read_curve(path)
    w = None
    if weights_mode == "col":
        if third is None:
            raise ValueError(f"--weights col: {path} has no third column")
        w = third
    elif weights_mode:
        wx, wy, _ = csvio.read_curve(weights_mode)
        if len(wx) != len(x):
            raise ValueError("weight file length does not match data")
        w = wy
    return Dataset(x, y, w, name=str(path))


def _cmd_fit(args, argv):
    started = time.time()
    data = _load_fit_dataset(args.data, args.weights)
    fixes = _parse_assignments(args.fix)
    inits = _parse_assignments(args.init)
    options = LMOptions()
    recipe = args.recipe

    def apply_overrides(model, default_init):
        init = default_init.copy()
        for i, name in enumerate(model.names):
            if name in inits:
                init[i] = inits[name]
            if name in fixes:
                init[i] = fixes[name]
                model = model.fixing(name)
        return model, init

    results = []
    if recipe == "performance":
        model, init = apply_overrides(fitting.model_performance(),
                                      fitting.default_performance_init(data))
        result = fitting.levenberg_marquardt(model, data, init, options)
        results.append(("P(x)=a1a2*x^b*exp(c*x)", result))
        curve_fn = lambda grid: model.func(grid, result.values)
    elif recipe == "staged":
        if not args.random_data:
            raise ValueError("staged fit needs --random-data for the interference stage")
        random_data = _load_fit_dataset(args.random_data, None)
        stage1, stage2 = fitting.fit_staged(random_data, data)
        results.append(("I(x)=a2*exp(c*x)+d", stage1))
        results.append(("P(x)=a1*x^b*a2*exp(c*x)", stage2))
        model = fitting.model_staged_performance(stage2["a2"], stage2["c"])
        result = stage2
        curve_fn = lambda grid: model.func(grid, stage2.values)
    elif recipe == "narrow":
        if args.range is None:
            raise ValueError("narrow fit needs --range lo:hi")
        lo, hi = (float(v) for v in args.range.split(":"))
        if "a2" not in fixes or "c" not in fixes:
            raise ValueError("narrow fit needs --fix a2=... and --fix c=...")
        result = fitting.fit_narrow(data, (lo, hi), (fixes["a2"], fixes["c"]))
        results.append(("P(x)=a1*x^b*a2*exp(c*x)", result))
        model = fitting.model_staged_performance(fixes["a2"], fixes["c"])
        curve_fn = lambda grid: model.func(grid, result.values)
    elif recipe == "switch-times":
        model, init = apply_overrides(
            fitting.model_switch_times(), fitting.loglinear_power_exp_init(data)
        )
        result = fitting.levenberg_marquardt(model, data, init, options)
        results.append(("tau(N)=a1a2*N^b*exp(c*N)", result))
        curve_fn = lambda grid: model.func(grid, result.values)
    else:  # feedback-growth
        model, init = apply_overrides(
            fitting.model_feedback_growth(),
            np.array([min(float(np.max(data.y)) + 0.1, 1.0),
                      -2.0 / max(float(np.max(data.x)), 1.0)]),
        )
        result = fitting.levenberg_marquardt(model, data, init, options)
        results.append(("phi(t)=a-exp(b*t)", result))
        curve_fn = lambda grid: model.func(grid, result.values)

    for label, res in results:
        print(format_fit_table(res, label))
        print()
    outputs = []
    if args.out:
        grid = np.linspace(float(np.min(data.x)), float(np.max(data.x)), 200)
        csvio.write_curve(args.out, grid, curve_fn(grid))
        outputs.append(args.out)
        csvio.write_manifest(
            Path(args.out).with_suffix(".manifest.json"), argv, None,
            inputs=[args.data] + ([args.random_data] if args.random_data else []),
            outputs=outputs, started=started,
        )
    return 0


def _cmd_estimate(args, argv):
    started = time.time()
    logs = csvio.read_log(args.log)
    log = logs if not isinstance(logs, list) else logs[0]
    if isinstance(logs, list) and len(logs) > 1:
        for extra in logs[1:]:
            log = log.merged(extra)
    estimate = estimation.estimate_feedback(log)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    phat_path = out / "phat.csv"
    with open(phat_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("s,p_hat,status\n")
        for k in range(log.n + 1):
            value = estimate.p_hat[k]
            fh.write(
                f"{csvio.fmt(log.states[k])},"
                f"{'' if np.isnan(value) else csvio.fmt(value)},{estimate.status[k]}\n"
            )
    outputs = [phat_path]
    profile, result = estimation.fit_feedback_profile(estimate, args.family)
    label = {"sine": "P(s)=phi*sin(pi*s)",
             "quadratic": "P(s)=phi*(1-4*(s-1/2)^2)",
             "rational": "P(s)=c1*(1-1/(1+c2*min(s,1-s)))"}[args.family]
    print(format_fit_table(result, label))
    if args.predict_steady_state:
        pi = estimation.predict_steady_state(profile, ConstantPayoff(1.0), log.n)
        pi_path = out / "predicted_pi.csv"
        csvio.write_curve(pi_path, log.states, pi)
        outputs.append(pi_path)
    csvio.write_manifest(out / "manifest.json", argv, None, inputs=[args.log],
                         outputs=outputs, started=started)
    return 0


def _cmd_scenario(args, argv):
    started = time.time()
    seed = _seed_from(args)
    config = ScenarioConfig(
        agents=args.agents,
        steps=args.steps,
        seed=seed,
        recognition=args.recognition,
        initial_fraction=args.s0,
        window=args.steps // args.windows if args.windows else 0,
        mixing=args.mixing,
        grid_shape=(args.grid_w, args.grid_h),
        vision=args.vision,
        misread=args.misread,
    )
    result = dc_run(config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csvio.write_curve(out / "s_t.csv", np.arange(len(result.counts)), result.fractions)
    csvio.write_log(out / "revisions.csv", result.logs)
    windows = estimation.drift_windows_from_logs(result.window_ends, result.logs)
    series = estimation.feedback_timeseries(
        windows, window_length=config.window or args.steps
    )
    rows = [
        (float(t), float(phi), float(rms))
        for t, phi, rms, skip in zip(series.t, series.phi, series.rms, series.skipped)
        if not skip
    ]
    with open(out / "phi_t.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,phi,rms\n")
        for t, phi, rms in rows:
            fh.write(f"{csvio.fmt(t)},{csvio.fmt(phi)},{csvio.fmt(rms)}\n")
    outputs = [out / "s_t.csv", out / "revisions.csv", out / "phi_t.csv"]
    csvio.write_manifest(out / "manifest.json", argv, seed, outputs=outputs, started=started)
    return 0


def _cmd_replay(args, argv):
    manifest = csvio.read_manifest(args.manifest)
    command = manifest["command"]
    return main(command)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="swarmcalc",
        description="Urn models of collective decisions: simulate, analyze, estimate, fit.",
    )
    parser.add_argument("--version", action="version",
                        version=f"swarmcalc {__version__} ({backend_name()} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the urn model")
    _add_profile_flags(sim)
    sim.add_argument("--steps", type=int, default=2000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--replicates", type=int, default=10000)
    sim.add_argument("--init", default="pair", help="starting count or 'pair'")
    sim.add_argument("--out", required=True, help="output directory")

    ana = sub.add_parser("analyze", help="exact chain analysis")
    ana.add_argument("what", choices=["steady-state", "splitting", "mfpt"])
    _add_profile_flags(ana)
    ana.add_argument("--a", type=int, default=None, help="splitting lower state")
    ana.add_argument("--b", type=int, default=None, help="splitting upper state")
    ana.add_argument("--target", type=int, default=None, help="mfpt target state")
    ana.add_argument("--out", required=True, help="output curve file")

    fit = sub.add_parser("fit", help="curve-fit recipes")
    fit.add_argument("recipe", choices=["performance", "staged", "narrow",
                                        "switch-times", "feedback-growth"])
    fit.add_argument("--data", required=True)
    fit.add_argument("--random-data", default=None,
                     help="stage-1 (cooperation-free) dataset for the staged recipe")
    fit.add_argument("--weights", default=None, help="'col' or a weight CSV")
    fit.add_argument("--fix", action="append", help="name=value, repeatable")
    fit.add_argument("--init", action="append", help="name=value, repeatable")
    fit.add_argument("--range", default=None, help="narrow-fit interval lo:hi")
    fit.add_argument("--out", default=None, help="fitted curve file")

    est = sub.add_parser("estimate", help="feedback estimation from a revision log")
    est.add_argument("--log", required=True)
    est.add_argument("--family", default="sine", choices=["sine", "quadratic", "rational"])
    est.add_argument("--predict-steady-state", action="store_true")
    est.add_argument("--out", required=True, help="output directory")

    sc = sub.add_parser("scenario-dc", help="density-classification agent scenario")
    sc.add_argument("--agents", type=int, default=64)
    sc.add_argument("--steps", type=int, default=200000)
    sc.add_argument("--seed", type=int, default=0)
    sc.add_argument("--recognition", type=float, default=0.8)
    sc.add_argument("--windows", type=int, default=8)
    sc.add_argument("--s0", type=float, default=0.5)
    sc.add_argument("--mixing", default="well-mixed", choices=["well-mixed", "grid"])
    sc.add_argument("--grid-w", type=int, default=16)
    sc.add_argument("--grid-h", type=int, default=16)
    sc.add_argument("--vision", type=int, default=1)
    sc.add_argument("--misread", action="store_true",
                    help="recognition failures store the wrong color instead of dropping")
    sc.add_argument("--out-dir", required=True)

    rep = sub.add_parser("replay", help="re-run a recorded manifest")
    rep.add_argument("manifest")
    return parser


_DISPATCH = {
    "simulate": _cmd_simulate,
    "analyze": _cmd_analyze,
    "fit": _cmd_fit,
    "estimate": _cmd_estimate,
    "scenario-dc": _cmd_scenario,
    "replay": _cmd_replay,
}


def main(argv=None):
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _DISPATCH[args.command](args, argv)
    except (csvio.CsvFormatError, ValueError) as err:
        print(f"swarmcalc: {err}", file=sys.stderr)
        return USAGE_ERROR
    except OSError as err:
        print(f"swarmcalc: I/O error: {err}", file=sys.stderr)
        return IO_ERROR
    except (FitError, NonConvergenceError) as err:
        print(f"swarmcalc: numerical failure: {err}", file=sys.stderr)
        return NUMERIC_ERROR


if __name__ == "__main__":
    sys.exit(main())
