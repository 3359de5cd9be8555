import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from levydetect.engine import RuleSpec, make_u_sampler, run_dyadic, run_paths
from levydetect.errors import ContractError
from levydetect.likelihood import llr_path
from levydetect.paths import sample_changed_path
from levydetect.rng import RngStream

SEED = 8086


class TestSamplers:
    @pytest.mark.parametrize("fixture", [
        "brownian_model", "poisson_model", "jump_diffusion_model",
        "gamma_model", "exponential_model", "two_sided_model",
    ])
    @pytest.mark.parametrize("regime", ["pre", "post"])
    def test_increment_law_matches_path_route(self, fixture, regime, request):
        """One-step law from the exact sampler agrees with the per-path
        simulator route (two-sample KS)."""
        model = request.getfixturevalue(fixture)
        dt, n = 0.5, 1500
        tau = math.inf if regime == "pre" else 0.0
        path_u = np.array([
            llr_path(model, sample_changed_path(
                model, tau, dt, dt, RngStream(SEED, i))).u_values[-1]
            for i in range(n)])
        fast_u = make_u_sampler(model, regime, dt)(
            RngStream(SEED + 1, 0).generator(), n)
        assert ks_2samp(path_u, fast_u).pvalue > 0.005

    def test_mean_matches_drift(self, gamma_model):
        n = 200000
        u = make_u_sampler(gamma_model, "pre", 1.0)(
            RngStream(SEED + 2, 0).generator(), n)
        se = u.std(ddof=1) / math.sqrt(n)
        assert abs(u.mean() - gamma_model.beta_pre) <= 3.0 * se


class TestRunPaths:
    def test_threads_do_not_change_results(self, brownian_model):
        rule = RuleSpec(kind="cusum", log_barrier=2.0)
        runs = [run_paths(brownian_model, "pre", rule, 0.05, 1000, 2500, SEED,
                          "arl", threads=t) for t in (1, 2, 4)]
        for other in runs[1:]:
            assert np.array_equal(runs[0].stop_steps, other.stop_steps)
            assert np.array_equal(runs[0].stat, other.stat)

    def test_common_random_numbers_make_stops_monotone_in_barrier(self, brownian_model):
        """Same streams, larger barrier: every replication stops later."""
        stops = []
        for h in (1.0, 1.5, 2.0, 2.5):
            rule = RuleSpec(kind="cusum", log_barrier=h)
            res = run_paths(brownian_model, "pre", rule, 0.05, 4000, 600, SEED, "arl")
            stops.append(res.stop_times)
        for a, b in zip(stops, stops[1:]):
            assert np.all(b >= a - 1e-12)

    def test_censoring_flagged(self, brownian_model):
        rule = RuleSpec(kind="cusum", log_barrier=8.0)
        res = run_paths(brownian_model, "pre", rule, 0.05, 200, 300, SEED, "arl")
        assert res.censored.all()
        assert np.all(res.stop_times == pytest.approx(10.0))

    def test_fixed_rule(self, brownian_model):
        rule = RuleSpec(kind="fixed", fixed_steps=7)
        res = run_paths(brownian_model, "pre", rule, 0.1, 50, 100, SEED, "arl")
        assert np.all(res.stop_steps == 7)

    def test_one_step_geometric_oracle(self, brownian_model):
        """Zero barrier: the rule stops at the first step whose statistic is
        nonnegative, i.e. run length is geometric with p = P(U_step >= 0)."""
        dt = 0.5
        rule = RuleSpec(kind="cusum", log_barrier=0.0)
        res = run_paths(brownian_model, "pre", rule, dt, 4000, 40000, SEED, "arl")
        p = 1.0 - _phi_cdf(0.5 * 1.0 * math.sqrt(dt))   # P(N(-dt/2, dt) >= 0)
        expected = dt / p
        est = res.stop_times.mean()
        se = res.stop_times.std(ddof=1) / math.sqrt(len(res.stop_times))
        assert abs(est - expected) <= 3.0 * se

    def test_sr_rule_mean_run_length_scales_with_threshold(self, brownian_model):
        """E[R_k] = k under the pre-change law pins the in-control mean near
        threshold * dt (optional-stopping heuristic, generous tolerance)."""
        dt = 0.1
        rule = RuleSpec(kind="sr", log_barrier=math.log(200.0))
        res = run_paths(brownian_model, "pre", rule, dt, 50000, 2000, SEED, "arl")
        est = res.stop_times.mean()
        assert 0.8 * 200.0 * dt <= est <= 1.6 * 200.0 * dt

    def test_invalid_rule_rejected(self):
        with pytest.raises(ContractError):
            RuleSpec(kind="nope").validate()
        with pytest.raises(ContractError):
            RuleSpec(kind="cusum", log_barrier=-1.0).validate()


class TestRunDyadic:
    def test_strides_must_divide(self, brownian_model):
        with pytest.raises(ContractError):
            run_dyadic(brownian_model, "post", 2.0, 0.1, 101, [4, 2, 1], 10, SEED)

    def test_matches_run_paths_at_stride_one(self, brownian_model):
        stops, strict = run_dyadic(brownian_model, "post", 2.0, 0.1, 400, [1],
                                   500, SEED, purpose="arl")
        res = run_paths(brownian_model, "post", RuleSpec(kind="cusum", log_barrier=2.0),
                        0.1, 400, 500, SEED, "arl")
        assert np.allclose(stops[0], res.stop_times)
        # continuous increment laws: the two stopping conventions coincide
        assert np.array_equal(stops[0], strict[0])


def _phi_cdf(x):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))
