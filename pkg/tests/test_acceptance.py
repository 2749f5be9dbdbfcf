"""Acceptance suite: one test per criterion, one printed line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see every line.
Stochastic criteria run with pinned seeds so the suite is deterministic;
budgets and tolerances are stated inline next to each assertion.
"""
import math
import time
import zlib

import numpy as np
import pytest

import swarmcalc as sc
from conftest import total_variation
from swarmcalc import (
    ConstantPayoff,
    DriftSpec,
    QuadraticFeedback,
    RationalFeedback,
    RevisionLog,
    SimConfig,
    SineFeedback,
    build_transition,
    distribution_peaks,
    drift,
    drift_roots,
    ehrenfest_closed_form,
    ensemble_histogram,
    estimate_feedback,
    estimate_switching_time,
    fit_feedback_profile,
    measure_drift,
    mfpt,
    predict_steady_state,
    record_revisions,
    sample_revisions,
    splitting_exact,
    splitting_probability,
    steady_state,
    steady_state_detailed_balance,
)
from swarmcalc.estimation import drift_windows_from_logs, feedback_timeseries
from swarmcalc.fitting import (
    Dataset,
    fit_narrow,
    fit_performance,
    fit_staged,
    fit_switch_times,
)


def _report(number, name, ok, detail):
    print(f"ACCEPTANCE {number:02d} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {number} ({name}): {detail}"


def sine_spec(phi, n=64, payoff=1.0):
    return DriftSpec(SineFeedback(phi), ConstantPayoff(payoff), n)


def power_exp(x, A, b, c):
    return A * np.asarray(x, dtype=float) ** b * np.exp(c * np.asarray(x, dtype=float))


def test_c01_ehrenfest_closed_form():
    started = time.time()
    n, b0 = 64, 0
    b = float(b0)
    worst = 0.0
    for t in range(1, 2001):
        b = b + (1.0 - 2.0 * b / n)
        closed = ehrenfest_closed_form(t, n, b0)
        worst = max(worst, abs(closed - b) / max(abs(b), 1e-300))
    elapsed = time.time() - started
    ok = worst < 1e-9 and elapsed < 1.0
    _report(1, "ehrenfest-closed-form", ok,
            f"max rel dev {worst:.2e} over t<=2000, runtime {elapsed:.3f}s")


def test_c02_drift_agreement():
    started = time.time()
    details = []
    ok = True
    for phi in (0.0, 0.125, 0.25, 0.5, 0.75):
        spec = sine_spec(phi)
        config = SimConfig(spec, 0, 202)
        m = measure_drift(config, 800_000)
        rmse = math.sqrt(float(np.mean((m.mean - drift(spec, m.s)) ** 2)))
        details.append(f"phi={phi}: {rmse:.2e}")
        ok = ok and rmse < 6e-3
    _report(2, "drift-agreement", ok,
            f"RMSE {'; '.join(details)}; runtime {time.time()-started:.0f}s")


def test_c03_pitchfork_histogram():
    spec = sine_spec(0.0)
    config = SimConfig(spec, 2000, 303, init=(32, 33), ensemble=10_000)
    phis = np.round(np.arange(0.0, 1.0001, 0.05), 2)
    hist = ensemble_histogram(config, phis)
    ok = True
    notes = []
    for i, phi in enumerate(phis):
        row = hist[i]
        if phi <= 0.45:
            mode = int(np.argmax(row))
            good = abs(mode - 32) <= 2
            ok = ok and good
            if not good:
                notes.append(f"phi={phi}: mode {mode}")
        elif phi >= 0.6:
            lower = int(np.argmax(row[:32]))
            upper = 32 + int(np.argmax(row[32:]))
            s1 = math.asin(1.0 / (2.0 * phi)) / math.pi
            good = abs(lower - 64 * s1) <= 3 and abs(upper - 64 * (1 - s1)) <= 3
            ok = ok and good
            if not good:
                notes.append(f"phi={phi}: modes {lower},{upper} (want {64*s1:.1f},{64*(1-s1):.1f})")
    _report(3, "pitchfork-bifurcation", ok,
            "unimodal<=0.45, bimodal>=0.6 at root positions" if ok else "; ".join(notes))


def test_c04_steady_state_oracle():
    worst_tv = 0.0
    for n in (2, 4, 16, 64):
        pi = steady_state(build_transition(sine_spec(0.0, n)))
        binom = np.array([math.comb(n, k) for k in range(n + 1)]) / 2.0**n
        worst_tv = max(worst_tv, total_variation(pi, binom))
    rng = np.random.default_rng(404)
    worst_gap = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 65))
        kind = rng.integers(3)
        if kind == 0:
            profile = SineFeedback(float(rng.random()))
        elif kind == 1:
            profile = QuadraticFeedback(float(rng.random()))
        else:
            profile = RationalFeedback(float(rng.random()), float(10 * rng.random()))
        tm = build_transition(DriftSpec(profile, ConstantPayoff(float(0.2 + 0.8 * rng.random())), n))
        worst_gap = max(worst_gap, float(np.max(np.abs(
            steady_state(tm) - steady_state_detailed_balance(tm)))))
    ok = worst_tv < 1e-8 and worst_gap < 1e-8
    _report(4, "steady-state-oracle", ok,
            f"binomial TV {worst_tv:.1e}; eigen-vs-balance sup {worst_gap:.1e}")


def test_c05_mean_first_passage():
    spec_at = {n: sine_spec(0.75, n) for n in range(10, 31)}
    theory = {}
    ok = True
    censored_total = 0
    worst_pull = 0.0
    for n, spec in spec_at.items():
        roots = drift_roots(spec)
        start, target = round(n * roots[0]), round(n * roots[2])
        theory[n] = mfpt(build_transition(spec), target).times[start]
        config = SimConfig(spec, 0, 505)
        estimate = estimate_switching_time(config, roots[0], roots[2], 10**6, 300)
        censored_total += estimate.censored
        pull = abs(estimate.mean - theory[n]) / (3 * estimate.stderr)
        worst_pull = max(worst_pull, pull)
        ok = ok and pull <= 1.0
    ns = np.array(sorted(theory))
    taus = np.array([theory[n] for n in ns])
    fit = fit_switch_times(Dataset(ns.astype(float), taus, 1.0 / taus))
    ok = ok and fit["c"] > 0
    # cross-validation against the reference switching-time fit, which
    # lives in the maximal-feedback setting of its section (its exponent
    # and rate pin down the chain construction end to end)
    full_taus = []
    for n in ns:
        spec = sine_spec(1.0, int(n))
        roots = drift_roots(spec)
        full_taus.append(
            mfpt(build_transition(spec), round(n * roots[2])).times[round(n * roots[0])]
        )
    full_fit = fit_switch_times(Dataset(ns.astype(float), np.array(full_taus),
                                        1.0 / np.array(full_taus)))
    reference = {"a1a2": 1.36333, "b": 1.31916, "c": 0.0933643}
    cross_ok = all(
        abs(full_fit[k] - v) / v < 0.25 for k, v in reference.items()
    )
    ok = ok and cross_ok
    _report(5, "mean-first-passage", ok,
            f"max |mc-theory|/3sigma {worst_pull:.2f}, censored {censored_total}, "
            f"tau(N) fit c={fit['c']:.4f} (>0); max-feedback fit "
            f"(A,b,c)=({full_fit['a1a2']:.3f},{full_fit['b']:.3f},{full_fit['c']:.4f}) "
            "vs reference (1.363,1.319,0.0934) within 25%")


def test_c06_splitting_probabilities():
    reference = steady_state(build_transition(sine_spec(1.0)))
    a, b = distribution_peaks(reference, 2)
    ok = True
    worst = 0.0
    for phi in np.round(np.arange(0.1, 1.0001, 0.1), 1):
        tm = build_transition(sine_spec(float(phi)))
        pi = steady_state(tm)
        approx = splitting_probability(pi, a, b)
        exact = splitting_exact(tm, a, b)
        ok = ok and approx.sigma[0] == 0.0 and approx.sigma[-1] == 1.0
        ok = ok and exact.sigma[0] == 0.0 and abs(exact.sigma[-1] - 1.0) < 1e-12
        worst = max(worst, float(np.max(np.abs(approx.sigma - exact.sigma))))
        if phi == 0.1:
            quarter = (b - a) / 4.0
            middle = (approx.states >= a + quarter) & (approx.states <= b - quarter)
            mid_ok = np.all((approx.sigma[middle] >= 0.45) & (approx.sigma[middle] <= 0.55))
            ok = ok and bool(mid_ok)
    ok = ok and worst < 0.05
    _report(6, "splitting-probabilities", ok,
            f"a,b=({a},{b}); methods sup distance {worst:.4f} (<0.05); "
            "phi=0.1 middle half in [0.45,0.55]")


def test_c07_estimation_round_trip():
    # noiseless inversion of exact four-case ratios
    worst = 0.0
    for profile in (SineFeedback(0.6), QuadraticFeedback(0.8), RationalFeedback(0.7, 12.0)):
        log = RevisionLog(64)
        s = log.states
        p = profile.prob(s)
        ratio = p * s + (1 - p) * (1 - s)
        scale = 10**14
        log.r_b[:] = np.round(ratio * scale).astype(np.int64)
        log.r_r[:] = scale - log.r_b
        log.visits[:] = scale
        est = estimate_feedback(log, pole_mask=0.0)
        defined = est.defined_mask()
        worst = max(worst, float(np.nanmax(np.abs(est.p_hat[defined] - p[defined]))))
    exact_ok = worst < 1e-10

    spec = sine_spec(0.75)
    config = SimConfig(spec, 0, 707)
    log = sample_revisions(config, 10_000)
    profile, _ = fit_feedback_profile(estimate_feedback(log), "sine")
    phi_ok = abs(profile.phi - 0.75) <= 0.05
    fitted = drift_roots(DriftSpec(profile, ConstantPayoff(1.0), 64))
    truth = drift_roots(spec)
    root_err = float(np.max(np.abs(np.asarray(fitted) - truth)))
    ok = exact_ok and phi_ok and root_err <= 1.0 / 64
    _report(7, "estimation-round-trip", ok,
            f"noiseless inversion {worst:.1e} (<1e-10); phi_hat {profile.phi:.4f} "
            f"(|err|<=0.05); crossings off by {root_err:.4f} (<=1/64)")


REFERENCE_FITS = {
    "foraging": dict(
        kind="performance", grid=np.arange(1.0, 56.0), rms=0.000146389,
        params={"a1a2": 0.00248537, "b": 1.23745, "c": -0.199589},
        printed={"a1a2": 1.81, "b": 1.591, "c": 1.469},
    ),
    "beeclust": dict(
        kind="performance", grid=np.arange(2.0, 27.0), rms=0.0515291,
        params={"a1a2": 0.158797, "b": 0.772042, "c": -0.0386915},
        printed={"a1a2": 14.07, "b": 9.003, "c": 7.409},
    ),
    "density-scan": dict(
        kind="performance", grid=np.linspace(0.004, 0.06, 24), rms=0.0924653,
        params={"a1a2": 114.55, "b": 0.836024, "c": -89.9857},
        printed={"a1a2": 42.87, "b": 9.074, "c": 7.763},
        anchors=(0.00524, 0.00598),
    ),
    "taxis-cooperation": dict(
        kind="staged", grid=np.arange(2.0, 53.0), rms=0.0403196,
        interference={"a2": 0.213822, "c": -0.182333, "d": 0.0750781},
        params={"a1": 0.0106104, "b": 3.23718},
        printed={"a1": 9.205, "b": 0.9438},
    ),
    "taxis-narrow": dict(
        kind="narrow", grid=np.arange(5.0, 41.0), rms=0.0180345,
        interference={"a2": 0.213822, "c": -0.182333},
        params={"a1": 0.00660836, "b": 3.38946},
        printed={"a1": 87.34, "b": 8.425},
        # a 3-point dof=1 fit cannot estimate its own dispersion; the
        # reference fit's error bars are the meaningful recovery band
        band="printed",
    ),
    "switching-times": dict(
        kind="switch", grid=np.arange(10.0, 31.0, 2.0), rms=None,
        params={"a1a2": 1.31234, "b": 1.52047, "c": 0.107615},
        printed={"a1a2": 17.03, "b": 3.824, "c": 1.072},
    ),
    "rational-profile": dict(
        kind="rational", grid=np.linspace(0.004, 0.996, 122), rms=0.00562933,
        params={"c1": 0.679526, "c2": 11.9802},
        printed={"c1": 0.2938, "c2": 1.113},
    ),
}


def _generate(entry, noise, rng):
    grid = entry["grid"]
    if entry["kind"] in ("performance", "switch"):
        p = entry["params"]
        y = power_exp(grid, p["a1a2"], p["b"], p["c"])
    elif entry["kind"] in ("staged", "narrow"):
        p, i = entry["params"], entry["interference"]
        y = power_exp(grid, p["a1"], p["b"], i["c"]) * i["a2"]
    else:
        from swarmcalc.fitting import model_rational_profile
        y = model_rational_profile().func(grid, np.array(list(entry["params"].values())))
    if noise == "relative":
        y = y * (1 + 0.01 * rng.standard_normal(grid.size))
    elif noise == "matched":
        y = y + entry["rms"] * rng.standard_normal(grid.size)
    return grid, y


def _refit(entry, x, y, perturb, rng):
    from swarmcalc.fitting import levenberg_marquardt, model_rational_profile
    truth = entry["params"]
    signs = rng.choice([-1.0, 1.0], size=len(truth))
    factors = 1.0 + (0.5 * signs if perturb else 0.0 * signs)
    init_map = {k: v * f for (k, v), f in zip(truth.items(), factors)}
    if entry["kind"] == "performance":
        w = None
        if "anchors" in entry:
            w = np.ones_like(x)
            for anchor in entry["anchors"]:
                w[np.argmin(np.abs(x - anchor))] = 10.0
        return fit_performance(Dataset(x, y, w), init=np.array(list(init_map.values())))
    if entry["kind"] == "switch":
        return fit_switch_times(Dataset(x, y, 1.0 / np.maximum(y, 1e-12)),
                                init=np.array(list(init_map.values())))
    if entry["kind"] == "staged":
        i = entry["interference"]
        interf = i["a2"] * np.exp(i["c"] * x) + i["d"]
        _, stage2 = fit_staged(Dataset(x, interf), Dataset(x, y),
                               init_cooperation=np.array(list(init_map.values())))
        return stage2
    if entry["kind"] == "narrow":
        i = entry["interference"]
        return fit_narrow(Dataset(x, y), (20.0, 22.0), (i["a2"], i["c"]),
                          init=np.array(list(init_map.values())))
    model = model_rational_profile()
    return levenberg_marquardt(model, Dataset(x, y), np.array(list(init_map.values())))


def test_c08_reference_regeneration_suite():
    ok = True
    lines = []
    for name, entry in REFERENCE_FITS.items():
        rng = np.random.default_rng(zlib.crc32(name.encode()))
        # noiseless from +-50% perturbed inits: recovery within 0.5%
        x, y = _generate(entry, None, rng)
        clean = _refit(entry, x, y, True, rng)
        clean_dev = max(
            abs(clean[k] - v) / abs(v) for k, v in entry["params"].items()
        )
        good_clean = clean_dev < 5e-3
        # 1% noise: recovery within max(5%, 3 asymptotic sigma) per parameter
        x, y = _generate(entry, "relative", rng)
        noisy = _refit(entry, x, y, True, rng)
        good_noisy = True
        worst_noisy = 0.0
        for k, v in entry["params"].items():
            if entry.get("band") == "printed":
                band = entry["printed"][k] / 100.0 * abs(v)
            else:
                band = max(0.05 * abs(v), 3.0 * noisy.stderr_of(k))
            worst_noisy = max(worst_noisy, abs(noisy[k] - v) / abs(v))
            good_noisy = good_noisy and abs(noisy[k] - v) <= band
        # matched-noise percent errors in the printed magnitude
        good_pct = True
        if entry["rms"] is not None:
            x, y = _generate(entry, "matched", rng)
            matched = _refit(entry, x, y, False, rng)
            factor = 10.0 if entry["kind"] == "narrow" else 5.0
            for k, printed in entry["printed"].items():
                ratio = matched.percent[matched.names.index(k)] / printed
                good_pct = good_pct and (1.0 / factor) < ratio < factor
        table_ok = good_clean and good_noisy and good_pct
        ok = ok and table_ok
        lines.append(
            f"{name}: clean {clean_dev*100:.3f}%, noisy {worst_noisy*100:.1f}%"
            f"{'' if good_pct else ', pct FAIL'}{'' if table_ok else ' <- FAIL'}"
        )
    _report(8, "reference-fit-regeneration", ok, "; ".join(lines))


def test_c09_end_to_end_pipeline():
    spec = sine_spec(0.75)
    # directly simulated occupancy: 200 replicates, 5e4 recorded steps each
    occupancy_config = SimConfig(spec, 50_000, 909, init=(32, 33), ensemble=200)
    occ = record_revisions(occupancy_config, burn_in=2_000)
    occupancy = occ.visits / occ.visits.sum()
    # estimation side: 1e4 revision samples per state
    config = SimConfig(spec, 0, 910)
    log = sample_revisions(config, 10_000)
    profile, _ = fit_feedback_profile(estimate_feedback(log), "sine")
    pi = predict_steady_state(profile, ConstantPayoff(1.0), 64)
    tv = total_variation(pi, occupancy)
    # qualitative check at 100 samples per state: crossing placement
    log100 = sample_revisions(SimConfig(spec, 0, 911), 100)
    profile100, _ = fit_feedback_profile(estimate_feedback(log100), "sine")
    fitted = drift_roots(DriftSpec(profile100, ConstantPayoff(1.0), 64))
    truth = drift_roots(spec)
    root_err = max(abs(fitted[0] - truth[0]), abs(fitted[-1] - truth[-1]))
    ok = tv < 0.05 and root_err <= 0.03
    _report(9, "end-to-end-pipeline", ok,
            f"TV(predicted pi, simulated occupancy) {tv:.4f} (<0.05); "
            f"100-sample crossings off by {root_err:.4f} (<=0.03)")


def _scenario_series(seed):
    from swarmcalc.scenario import ScenarioConfig, dc_run

    nwin, steps, agents, runs = 8, 32_000, 64, 40
    window = steps // nwin
    logs = [RevisionLog(agents) for _ in range(nwin)]
    ends = None
    for run in range(runs):
        config = ScenarioConfig(agents=agents, steps=steps, seed=seed * 1000 + run,
                                recognition=0.78, window=window, misread=True)
        result = dc_run(config)
        ends = result.window_ends
        for i in range(nwin):
            logs[i] = logs[i].merged(result.logs[i])
    return feedback_timeseries(drift_windows_from_logs(ends, logs))


def test_c10_scenario_feedback_growth():
    from swarmcalc import fit_feedback_growth

    transient = 2
    passes = 0
    asymptotes = []
    for seed in range(1, 51):
        series = _scenario_series(seed)
        try:
            growth = fit_feedback_growth(series)
        except Exception:
            continue
        keep = [i for i in range(len(series.t))
                if not series.skipped[i] and i >= transient]
        monotone = all(
            series.phi[j] >= series.phi[i]
            - max(0.10, 3.0 * math.hypot(series.phi_err[i], series.phi_err[j]))
            for idx, i in enumerate(keep) for j in keep[idx + 1:]
        )
        saturates = 0.5 < growth["a"] < 1.0
        if monotone and saturates and growth.converged and growth["b"] < 0:
            passes += 1
            asymptotes.append(growth["a"])
    ok = passes >= 45
    mean_a = np.mean(asymptotes) if asymptotes else float("nan")
    _report(10, "scenario-feedback-growth", ok,
            f"{passes}/50 seeds pass (need >=45); mean asymptote {mean_a:.3f}")


def test_c11_narrow_fit_prediction():
    from swarmcalc.fitting import levenberg_marquardt, model_staged_performance

    a2, c = 0.213822, -0.182333
    a1, b = 0.0106104, 3.23718
    rng = np.random.default_rng(1111)
    x = np.arange(5.0, 41.0)
    clean = power_exp(x, a1, b, c) * a2
    noisy = clean * (1 + 0.01 * rng.standard_normal(x.size))
    data = Dataset(x, noisy)
    model = model_staged_performance(a2, c)
    full = levenberg_marquardt(model, data, np.array([0.02, 2.0, a2, c]))
    narrow = fit_narrow(data, (20.0, 22.0), (a2, c))
    grid = np.linspace(5.0, 40.0, 141)
    full_curve = model.func(grid, full.values)
    narrow_curve = model.func(grid, narrow.values)
    peak_dev = float(np.max(np.abs(narrow_curve - full_curve)) / np.max(full_curve))
    rel_dev = float(np.max(np.abs(narrow_curve - full_curve) / np.maximum(full_curve, 1e-12)))
    ok = peak_dev < 0.15
    _report(11, "narrow-fit-prediction", ok,
            f"peak-normalized sup deviation {peak_dev:.4f} (<0.15); "
            f"pointwise-relative max {rel_dev:.4f} (reported)")
