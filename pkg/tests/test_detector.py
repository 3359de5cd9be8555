import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levydetect.detector import (
    CusumState,
    DetectorConfig,
    StopResult,
    cusum_log_stats,
    cusum_update,
    drawup,
    first_passage,
    lattice_safe_barrier,
    mle_changepoint,
    run_rule,
)
from levydetect.errors import ContractError, SpecValidationError, UndefinedEstimateError
from levydetect.likelihood import GaussianIncrements, LLRPath, llr_path
from levydetect.paths import IncrementSeries, sample_changed_path
from levydetect.rng import RngStream

SEED = 5150


def _llr(u, dt=1.0):
    return LLRPath(grid_dt=dt, u_values=np.asarray(u, dtype=float))


class TestDrawup:
    def test_running_minimum_examples(self):
        assert np.allclose(drawup(_llr([0.0, -1.0, -0.5])), [0.0, 0.0, 0.5])
        u = [0.0, 0.5, 1.0, 2.5]
        assert np.allclose(drawup(_llr(u)), u)
        assert np.allclose(drawup(_llr([0.0, 2.0, 1.0, 3.0])), [0.0, 2.0, 1.0, 3.0])

    def test_nonnegative(self):
        rng = np.random.default_rng(0)
        u = np.concatenate([[0.0], np.cumsum(rng.normal(size=500))])
        y = drawup(_llr(u))
        assert np.all(y >= 0.0)
        assert y[0] == 0.0


class TestFirstPassage:
    def test_flat_path_censors(self):
        res = first_passage(np.zeros(101), 1.0, 0.1)
        assert res.censored
        assert res.stop_time == pytest.approx(10.0)

    def test_unit_ramp(self):
        t = np.linspace(0.0, 5.0, 501)
        res = first_passage(t, 2.0, 0.01)
        assert not res.censored
        assert res.stop_time == pytest.approx(2.0, abs=0.011)

    def test_stride_checks_only_every_kth_point(self):
        y = np.zeros(11)
        y[3] = 5.0          # spike visible only to stride-1 monitoring
        fine = first_passage(y, 1.0, 1.0, monitor_stride=1)
        coarse = first_passage(y, 1.0, 1.0, monitor_stride=5)
        assert fine.stop_time == pytest.approx(3.0)
        assert coarse.censored

    def test_poisson_first_event_clears_low_barrier(self, poisson_model):
        """With the barrier below the jump size log 2, the rule fires at the
        first ledger event (to within one grid step)."""
        dt = 0.01
        for i in range(20):
            p = sample_changed_path(poisson_model, 0.0, 50.0, dt, RngStream(SEED, i))
            if not len(p.jump_times):
                continue
            y = drawup(llr_path(poisson_model, p))
            res = first_passage(y, 0.6, dt)
            assert not res.censored
            first_event = p.jump_times[0]
            assert res.stop_time == pytest.approx(
                math.ceil(first_event / dt - 1e-12) * dt, abs=1e-12)


class TestCusumUpdate:
    def test_zero_state_step(self):
        state = cusum_update(CusumState(), 0.0)
        assert state.log_stat == 0.0
        assert state.steps == 1

    def test_known_sequence(self):
        # observations 0.5, -1.0, 2.0 under N(0,1) -> N(1,1): log l = x - 1/2
        state = CusumState()
        stats = []
        for x in (0.5, -1.0, 2.0):
            state = cusum_update(state, x - 0.5)
            stats.append(math.exp(state.log_stat))
        assert stats[0] == pytest.approx(1.0)
        assert stats[1] == pytest.approx(math.exp(-1.5))
        assert stats[2] == pytest.approx(math.exp(1.5))

    def test_multiplicative_form(self):
        state = CusumState(log_stat=math.log(2.0), steps=5)
        state = cusum_update(state, math.log(3.0))
        assert math.exp(state.log_stat) == pytest.approx(6.0)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-3.0, 3.0), min_size=1, max_size=50))
    def test_recursion_equals_brute_force_sup(self, logs):
        """The recursion reproduces the explicit maximum over restart points
        of the partial likelihood products."""
        state = CusumState()
        rec = []
        for ll in logs:
            state = cusum_update(state, ll)
            rec.append(state.log_stat)
        c = np.concatenate([[0.0], np.cumsum(logs)])
        for k in range(1, len(c)):
            brute = max(c[k] - c[m] for m in range(k))
            assert rec[k - 1] == pytest.approx(brute, rel=1e-12, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-3.0, 3.0), min_size=1, max_size=60))
    def test_recursion_matches_strict_drawup(self, logs):
        state = CusumState()
        rec = []
        for ll in logs:
            state = cusum_update(state, ll)
            rec.append(state.log_stat)
        stats = cusum_log_stats(np.concatenate([[0.0], np.cumsum(logs)]))
        assert np.allclose(rec, stats[1:], rtol=1e-12, atol=1e-12)


class TestRunRule:
    def test_degenerate_zero_increments_stop_first_step(self):
        llr = _llr(np.zeros(10), dt=1.0)
        res = run_rule(DetectorConfig("cusum_grid", 0.0, delta=1.0), llr)
        assert not res.censored
        assert res.stop_time == pytest.approx(1.0)
        assert res.steps_taken == 1

    def test_ramp_grid_rule(self):
        t = np.linspace(0.0, 5.0, 51)
        res = run_rule(DetectorConfig("cusum_grid", 2.0, delta=0.5), _llr(t, dt=0.1))
        assert res.stop_time == pytest.approx(2.0)

    def test_nested_grids_order_pathwise(self, brownian_model):
        for i in range(25):
            p = sample_changed_path(brownian_model, 0.0, 30.0, 0.01, RngStream(SEED + 1, i))
            llr = llr_path(brownian_model, p)
            stops = [run_rule(DetectorConfig("cusum_grid", 2.0, delta=d), llr).stop_time
                     for d in (0.8, 0.4, 0.2, 0.1)]
            assert all(b <= a + 1e-12 for a, b in zip(stops, stops[1:]))

    def test_monotone_in_barrier(self, brownian_model):
        for i in range(25):
            p = sample_changed_path(brownian_model, 0.0, 30.0, 0.01, RngStream(SEED + 2, i))
            llr = llr_path(brownian_model, p)
            stops = [run_rule(DetectorConfig("cusum_grid", h, delta=0.1), llr).stop_time
                     for h in (0.5, 1.0, 2.0, 3.0)]
            assert all(a <= b + 1e-12 for a, b in zip(stops, stops[1:]))

    def test_continuous_equals_stride_one_grid_above_zero_barrier(self, brownian_model):
        p = sample_changed_path(brownian_model, 0.0, 30.0, 0.01, RngStream(SEED + 3, 0))
        llr = llr_path(brownian_model, p)
        cont = run_rule(DetectorConfig("cusum_continuous", 2.0), llr)
        grid = run_rule(DetectorConfig("cusum_grid", 2.0, delta=0.01), llr)
        assert cont.stop_time == pytest.approx(grid.stop_time)

    def test_nonnegative_increments_keep_statistic_above_one(self):
        rng = np.random.default_rng(4)
        u = np.concatenate([[0.0], np.cumsum(rng.uniform(0.0, 0.5, size=40))])
        stats = cusum_log_stats(u)
        assert np.all(stats[1:] >= 0.0)

    def test_shiryaev_roberts_recursion(self):
        u = np.array([0.0, 0.3, -0.2, 0.5])
        llr = _llr(u, dt=1.0)
        res = run_rule(DetectorConfig("shiryaev_roberts", math.log(50.0), delta=1.0), llr)
        # R_k = (1 + R_{k-1}) L_k with L_k = exp(u_k - u_{k-1})
        r = 0.0
        for k in range(1, 4):
            r = (1.0 + r) * math.exp(u[k] - u[k - 1])
        assert res.censored
        assert res.stat_at_stop == pytest.approx(math.log(r), rel=1e-12)

    def test_sr_crossing(self):
        u = np.linspace(0.0, 10.0, 101)
        res = run_rule(DetectorConfig("shiryaev_roberts", math.log(20.0), delta=0.1),
                       _llr(u, dt=0.1))
        assert not res.censored
        assert math.exp(res.stat_at_stop) >= 20.0

    def test_iid_rule(self):
        laws = (GaussianIncrements(0.0, 1.0), GaussianIncrements(1.0, 1.0))
        series = IncrementSeries(delta=1.0, values=np.array([0.5, -1.0, 2.0, 2.0]))
        res = run_rule(DetectorConfig("cusum_iid", 1.4, iid_laws=laws), series)
        assert not res.censored
        assert res.steps_taken == 3
        assert res.stat_at_stop == pytest.approx(1.5)

    def test_contract_errors(self):
        with pytest.raises(ContractError):
            run_rule(DetectorConfig("cusum_grid", 1.0, delta=1.0),
                     IncrementSeries(delta=1.0, values=np.zeros(3)))
        with pytest.raises(ContractError):
            run_rule(DetectorConfig(
                "cusum_iid", 1.0,
                iid_laws=(GaussianIncrements(0.0, 1.0), GaussianIncrements(1.0, 1.0))),
                _llr([0.0, 1.0]))
        with pytest.raises(SpecValidationError):
            DetectorConfig("cusum_grid", -1.0, delta=1.0).validate()
        with pytest.raises(SpecValidationError):
            DetectorConfig("cusum_grid", 1.0).validate()


class TestMleChangepoint:
    def test_first_excursion_gives_zero(self):
        stats = np.array([-math.inf, 0.5, 1.2, 2.1])
        stop = StopResult(stop_time=3.0, censored=False, stat_at_stop=2.1,
                          steps_taken=3)
        assert mle_changepoint(stats, stop) == 0.0

    def test_last_reflection_example(self):
        stats = np.array([-math.inf, -0.2, 0.1, 0.8])
        stop = StopResult(stop_time=3.0, censored=False, stat_at_stop=0.8,
                          steps_taken=3)
        assert mle_changepoint(stats, stop) == pytest.approx(1.0)

    def test_detects_ramp_onset(self, brownian_model):
        """Negative drift then a deterministic ramp: the estimate lands within
        a step of the ramp onset."""
        dt = 0.1
        n_pre, n_post = 50, 40
        u = np.concatenate([[0.0], np.cumsum(np.concatenate([
            np.full(n_pre, -0.3 * dt), np.full(n_post, 1.0)]))])
        llr = _llr(u, dt=dt)
        res = run_rule(DetectorConfig("cusum_grid", 2.0, delta=dt), llr)
        stats = cusum_log_stats(u)
        tau_hat = mle_changepoint(stats, res)
        onset = n_pre * dt
        assert abs(tau_hat - onset) <= dt + 1e-12

    def test_censored_raises(self):
        stats = np.array([-math.inf, -0.2])
        stop = StopResult(stop_time=1.0, censored=True, stat_at_stop=-0.2,
                          steps_taken=1)
        with pytest.raises(UndefinedEstimateError):
            mle_changepoint(stats, stop)


class TestLatticeBarrier:
    def test_collision_nudged(self):
        c = math.log(2.0)
        nudged = lattice_safe_barrier(3.0 * c, c)
        assert nudged > 3.0 * c
        assert nudged == pytest.approx(3.0 * c + 1e-6)

    def test_off_lattice_untouched(self):
        assert lattice_safe_barrier(2.0, math.log(2.0)) == 2.0
