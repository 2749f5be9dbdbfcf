import numpy as np
import pytest

from swarmcalc import RevisionLog, fit_feedback_growth, feedback_timeseries
from swarmcalc.estimation import drift_windows_from_logs
from swarmcalc.scenario import ScenarioConfig, ScenarioState, dc_run, dc_step
from swarmcalc.urn import stream


def base_config(**kw):
    defaults = dict(agents=64, steps=20_000, seed=1, recognition=0.8, window=5000)
    defaults.update(kw)
    return ScenarioConfig(**defaults)


class TestDcRun:
    def test_trajectory_shape_and_range(self):
        res = dc_run(base_config())
        assert len(res.counts) == 20_001
        assert res.counts.min() >= 0 and res.counts.max() <= 64
        assert res.counts[0] == 32

    def test_determinism(self):
        a = dc_run(base_config())
        b = dc_run(base_config())
        assert np.array_equal(a.counts, b.counts)
        for la, lb in zip(a.logs, b.logs):
            assert np.array_equal(la.r_b, lb.r_b)
            assert np.array_equal(la.r_r, lb.r_r)

    def test_seed_independence(self):
        a = dc_run(base_config(seed=1))
        b = dc_run(base_config(seed=2))
        assert not np.array_equal(a.counts, b.counts)

    def test_windows_partition_exactly(self):
        res = dc_run(base_config(steps=20_000, window=6000))
        assert len(res.logs) == 4
        assert list(res.window_ends) == [6000, 12000, 18000, 20000]
        visits_total = sum(int(log.visits.sum()) for log in res.logs)
        assert visits_total == 20_000

    def test_ledger_balances(self):
        # color-count changes are exactly the logged revisions
        res = dc_run(base_config(steps=30_000))
        delta = np.diff(res.counts)
        ups = int((delta > 0).sum())
        downs = int((delta < 0).sum())
        assert ups == sum(int(log.r_b.sum()) for log in res.logs)
        assert downs == sum(int(log.r_r.sum()) for log in res.logs)

    def test_recognition_zero_never_revises(self):
        res = dc_run(base_config(recognition=0.0, steps=5000))
        assert all(log.revision_total == 0 for log in res.logs)
        assert np.all(res.counts == res.counts[0])

    def test_consensus_absorbing_drop_mode(self):
        # run from full consensus: nothing can ever change
        res = dc_run(base_config(initial_fraction=1.0, steps=5000))
        assert np.all(res.counts == 64)
        assert all(log.revision_total == 0 for log in res.logs)

    def test_absorbs_to_either_side_evenly(self):
        # drop-mode majority dynamics break the 50/50 symmetry both ways
        outcomes = []
        for seed in range(200):
            res = dc_run(base_config(seed=seed, steps=60_000, window=60_000))
            final = res.counts[-1]
            if final in (0, 64):
                outcomes.append(1 if final == 64 else 0)
        assert len(outcomes) >= 190  # nearly every run reaches consensus
        wins = sum(outcomes)
        p_hat = wins / len(outcomes)
        sigma = (0.25 / len(outcomes)) ** 0.5
        assert abs(p_hat - 0.5) <= 3 * sigma

    def test_zero_steps(self):
        res = dc_run(base_config(steps=0, window=0))
        assert list(res.counts) == [32]
        assert len(res.logs) == 1


class TestDcStep:
    def test_grid_mode_runs_and_bounds(self):
        config = base_config(mixing="grid", grid_shape=(8, 8), vision=1, steps=2000,
                             window=1000)
        res = dc_run(config)
        assert res.counts.min() >= 0 and res.counts.max() <= 64

    def test_grid_step_composes_to_run(self):
        config = base_config(mixing="grid", grid_shape=(8, 8), steps=300, window=300)
        res = dc_run(config)
        rng = stream(config.seed)
        from swarmcalc.scenario import _initial_state
        state = _initial_state(config, rng)
        log = RevisionLog(64)
        counts = [state.tracked_total]
        for _ in range(300):
            dc_step(state, config, rng, log)
            counts.append(state.tracked_total)
        assert np.array_equal(res.counts, np.asarray(counts))

    def test_misread_stores_flipped_color(self):
        config = base_config(misread=True, recognition=0.0, agents=4, steps=0)
        rng = stream(9)
        from swarmcalc.scenario import _initial_state
        state = _initial_state(config, rng)
        state.colors[:] = np.array([1, 1, 0, 0])
        state.tracked_total = 2
        before = state.obs_count.copy()
        dc_step(state, config, rng)
        assert state.obs_count.sum() == before.sum() + 1  # observation stored


class TestFeedbackGrowthShape:
    def test_windowed_intensity_rises_then_saturates(self):
        # ensemble-aggregated windows show the transient-then-plateau shape
        nwin, steps, agents = 8, 32_000, 64
        agg = [RevisionLog(agents) for _ in range(nwin)]
        ends = None
        for run in range(30):
            config = ScenarioConfig(agents=agents, steps=steps, seed=7000 + run,
                                    recognition=0.78, window=steps // nwin, misread=True)
            res = dc_run(config)
            ends = res.window_ends
            for i in range(nwin):
                agg[i] = agg[i].merged(res.logs[i])
        series = feedback_timeseries(drift_windows_from_logs(ends, agg))
        assert not series.skipped.any()
        assert series.phi[0] < np.mean(series.phi[-3:])     # early below late
        assert np.mean(series.phi[-3:]) > 0.5               # saturated above critical
        growth = fit_feedback_growth(series)
        assert growth.converged and growth["b"] < 0
