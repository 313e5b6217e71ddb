"""Particle filter tests.

The load-bearing check is unbiasedness of exp(log_lik_hat) against the
truncated-state-space forward algorithm in oracles.py; the degenerate
single-path model pins the exact weighting arithmetic, including the fact
that the first observation is scored.
"""

import numpy as np
import pytest
from scipy.stats import chi2

from hiddensirs import (
    DailyForcing,
    DataError,
    ModelParams,
    ParticleSystem,
    Streams,
    resample_multinomial,
    resample_systematic,
    run_filter,
    sample_initial_state,
)
from hiddensirs.simulate import SimConfig, propagate

from conftest import gen
from oracles import ChainOracle

EXACT = SimConfig(method="direct-exact")


def tiny_model():
    """N=3 chain with constant forcing; small enough for the dense oracle."""
    params = ModelParams(beta=0.4, gamma=0.3, mu=0.2, rho=0.6,
                         alpha_coeffs=np.array([np.log(0.05)]),
                         phi_s=1.2, phi_i=0.8, n_pop=3)
    forcing = DailyForcing(0, np.full(4, 0.05))
    oracle = ChainOracle(beta=0.4, gamma=0.3, mu=0.2, rho=0.6,
                         phi_s=1.2, phi_i=0.8, n_pop=3,
                         forcing_values=np.full(4, 0.05))
    return params, forcing, oracle


class TestResampling:
    def test_degenerate_weights_pick_the_one_live_particle(self):
        lw = np.array([-np.inf, 0.0, -np.inf, -np.inf])
        idx = resample_multinomial(lw, 50, gen(0))
        assert np.all(idx == 1)
        idx = resample_systematic(lw, 50, gen(1))
        assert np.all(idx == 1)

    def test_uniform_weights_give_uniform_frequencies(self):
        k, draws = 8, 100_000
        idx = resample_multinomial(np.zeros(k), draws, gen(2))
        counts = np.bincount(idx, minlength=k)
        stat = np.sum((counts - draws / k) ** 2 / (draws / k))
        assert chi2.sf(stat, df=k - 1) > 0.01

    def test_three_quarter_weight_frequency(self):
        draws = 100_000
        lw = np.log([0.75, 0.25])
        idx = resample_multinomial(lw, draws, gen(3))
        freq = np.mean(idx == 0)
        se = np.sqrt(0.75 * 0.25 / draws)
        assert abs(freq - 0.75) < 3 * se

    def test_all_dead_weights_raise(self):
        with pytest.raises(ValueError, match="-inf"):
            resample_multinomial(np.full(4, -np.inf), 4, gen(4))
        with pytest.raises(ValueError, match="-inf"):
            resample_systematic(np.full(4, -np.inf), 4, gen(4))

    def test_systematic_counts_hug_expectations(self):
        # systematic resampling cannot miss an expected count by 1 or more
        for seed, w in [(5, [0.5, 0.3, 0.2]), (6, [0.61, 0.29, 0.07, 0.03])]:
            w = np.array(w)
            n_out = 200
            idx = resample_systematic(np.log(w), n_out, gen(seed))
            counts = np.bincount(idx, minlength=w.size)
            assert np.all(counts >= np.floor(n_out * w))
            assert np.all(counts <= np.ceil(n_out * w))

    def test_systematic_uniform_weights_hit_each_slot_once(self):
        idx = resample_systematic(np.zeros(16), 16, gen(7))
        assert sorted(idx) == list(range(16))

    def test_weights_unchanged_by_log_shift(self):
        lw = np.log([0.1, 0.2, 0.3, 0.4])
        a = resample_multinomial(lw, 1000, gen(8))
        b = resample_multinomial(lw + 123.0, 1000, gen(8))
        assert np.array_equal(a, b)

    def test_normalized_weights_sum_to_one(self):
        system = ParticleSystem(states=np.zeros((3, 2), dtype=np.int64),
                                log_weights=np.array([-800.0, -802.0, -801.0]),
                                log_lik_running=0.0, ancestry=[])
        w = system.normalized_weights()
        assert abs(w.sum() - 1.0) < 1e-12
        assert np.all(w >= 0)


class TestDegenerateModel:
    """One particle path possible, so the estimate is a closed form."""

    def params(self, rho):
        return ModelParams(beta=0.0, gamma=0.0, mu=0.0, rho=rho,
                           alpha_coeffs=np.array([-50.0]),
                           phi_s=0.0, phi_i=1.0, n_pop=1)

    def test_single_observation_equals_log_rho(self):
        params = self.params(rho=0.3)
        forcing = DailyForcing(0, np.zeros(1))
        for seed in range(5):
            res = run_filter([(0.0, 1)], forcing, params, 40, EXACT, seed,
                             initial_sampler=lambda g: (0, 1))
            assert res.log_lik_hat == pytest.approx(np.log(0.3), rel=1e-14)
            assert np.all(res.sampled_trajectory == [[0, 1]])

    def test_two_observations_multiply_the_emissions(self):
        # frozen chain, so the likelihood is Binomial(1, rho) at each time
        params = self.params(rho=0.3)
        forcing = DailyForcing(0, np.zeros(2))
        res = run_filter([(0.0, 1), (2.0, 0)], forcing, params, 40, EXACT, 11,
                         initial_sampler=lambda g: (0, 1))
        assert res.log_lik_hat == pytest.approx(np.log(0.3) + np.log(0.7), rel=1e-14)

    def test_zero_count_uses_complement(self):
        params = self.params(rho=0.25)
        forcing = DailyForcing(0, np.zeros(1))
        res = run_filter([(0.0, 0)], forcing, params, 10, EXACT, 12,
                         initial_sampler=lambda g: (0, 1))
        assert res.log_lik_hat == pytest.approx(np.log(0.75), rel=1e-14)


class TestUnbiasedness:
    def test_mean_of_lik_hat_matches_forward_algorithm(self):
        params, forcing, oracle = tiny_model()
        obs = [(0.0, 1), (2.0, 1)]
        exact = np.exp(oracle.log_likelihood([0.0, 2.0], [1, 1]))
        root = Streams(20250)
        runs = 3000
        liks = np.empty(runs)
        for r in range(runs):
            res = run_filter(obs, forcing, params, 50, EXACT, root.child(r),
                             store_trajectory=False)
            liks[r] = np.exp(res.log_lik_hat)
        se = liks.std(ddof=1) / np.sqrt(runs)
        assert abs(liks.mean() - exact) < 3 * se

    def test_unbiased_under_systematic_resampling_too(self):
        params, forcing, oracle = tiny_model()
        obs = [(0.0, 1), (1.0, 0), (2.0, 1)]
        exact = np.exp(oracle.log_likelihood([0.0, 1.0, 2.0], [1, 0, 1]))
        root = Streams(20251)
        runs = 2000
        liks = np.empty(runs)
        for r in range(runs):
            res = run_filter(obs, forcing, params, 50, EXACT, root.child(r),
                             resampling="systematic", store_trajectory=False)
            liks[r] = np.exp(res.log_lik_hat)
        se = liks.std(ddof=1) / np.sqrt(runs)
        assert abs(liks.mean() - exact) < 3 * se

    def test_log_lik_variance_shrinks_with_more_particles(self):
        params, forcing, _ = tiny_model()
        obs = [(0.0, 1), (1.0, 0), (2.0, 2), (3.0, 1)]
        root = Streams(20252)
        reps = 200

        def variance(k, tag):
            vals = np.array([
                run_filter(obs, forcing, params, k, EXACT, root.child(tag, r),
                           store_trajectory=False).log_lik_hat
                for r in range(reps)
            ])
            return vals.var(ddof=1)

        assert variance(400, 1) < variance(100, 0)


class TestParticleDeath:
    def test_impossible_first_observation(self):
        params, forcing, _ = tiny_model()
        res = run_filter([(0.0, 5)], forcing, params, 30, EXACT, 13)
        assert res.log_lik_hat == -np.inf
        assert res.sampled_trajectory is None
        assert res.final_states is None

    def test_impossible_later_observation(self):
        params, forcing, _ = tiny_model()
        res = run_filter([(0.0, 1), (1.0, 9)], forcing, params, 30, EXACT, 14)
        assert res.log_lik_hat == -np.inf
        assert res.sampled_trajectory is None

    def test_oracle_agrees_the_data_are_impossible(self):
        _, _, oracle = tiny_model()
        assert oracle.log_likelihood([0.0, 1.0], [1, 9]) == -np.inf


class TestDeterminism:
    def setup_method(self):
        self.params = ModelParams(beta=1.25e-5, gamma=0.1, mu=0.0009, rho=0.015,
                                  alpha_coeffs=np.array([-7.0, 3.5]),
                                  phi_s=2100.0, phi_i=15.0, n_pop=10_000)
        days = np.arange(70)
        self.forcing = DailyForcing(0, np.exp(-7.0 + 3.5 * np.sin(2 * np.pi * days / 365.0)))
        self.obs = [(float(t), int(c)) for t, c in
                    zip(range(0, 64, 7), [1, 0, 2, 1, 3, 0, 1, 2, 1, 0])]

    def test_same_seed_same_result(self):
        a = run_filter(self.obs, self.forcing, self.params, 32, SimConfig(), 99)
        b = run_filter(self.obs, self.forcing, self.params, 32, SimConfig(), 99)
        assert a.log_lik_hat == b.log_lik_hat
        assert np.array_equal(a.sampled_trajectory, b.sampled_trajectory)
        assert np.array_equal(a.final_states, b.final_states)

    @pytest.mark.parametrize("threads", [2, 5])
    def test_thread_count_invariance(self, threads):
        one = run_filter(self.obs, self.forcing, self.params, 32, SimConfig(), 99, threads=1)
        many = run_filter(self.obs, self.forcing, self.params, 32, SimConfig(), 99,
                          threads=threads)
        assert one.log_lik_hat == many.log_lik_hat
        assert np.array_equal(one.sampled_trajectory, many.sampled_trajectory)
        assert np.array_equal(one.final_states, many.final_states)

    def test_trajectory_storage_does_not_touch_the_estimate(self):
        kept = run_filter(self.obs, self.forcing, self.params, 32, SimConfig(), 99)
        dropped = run_filter(self.obs, self.forcing, self.params, 32, SimConfig(), 99,
                             store_trajectory=False)
        assert kept.log_lik_hat == dropped.log_lik_hat
        assert dropped.sampled_trajectory is None
        assert np.array_equal(kept.final_states, dropped.final_states)

    def test_different_seeds_differ(self):
        a = run_filter(self.obs, self.forcing, self.params, 32, SimConfig(), 99)
        b = run_filter(self.obs, self.forcing, self.params, 32, SimConfig(), 100)
        assert a.log_lik_hat != b.log_lik_hat


class TestTrajectory:
    def test_single_particle_trajectory_replays_its_path(self):
        # with K=1 the sampled trajectory IS the lone particle's path, and the
        # slot stream is knowable, so the whole run can be replayed by hand
        params, forcing, _ = tiny_model()
        obs = [(0.0, 0), (1.0, 0), (2.0, 0), (3.0, 0)]
        seed = 21
        res = run_filter(obs, forcing, params, 1, EXACT, seed)

        g = Streams(seed).child(0, 0).generator()
        state = sample_initial_state(params.phi_s, params.phi_i, params.n_pop, g)
        path = [tuple(state)]
        for t_prev, t_next in zip([0.0, 1.0, 2.0], [1.0, 2.0, 3.0]):
            state = propagate(state, t_prev, t_next, forcing, params, EXACT, g)
            path.append(tuple(state))
        assert np.array_equal(res.sampled_trajectory, np.array(path))

    def test_trajectory_shape_and_validity(self, epidemic_params, annual_forcing):
        obs = [(0.0, 1), (7.0, 0), (14.0, 2), (21.0, 1)]
        res = run_filter(obs, annual_forcing, epidemic_params, 64, SimConfig(), 22)
        traj = res.sampled_trajectory
        assert traj.shape == (4, 2)
        assert np.all(traj >= 0)
        assert np.all(traj.sum(axis=1) <= epidemic_params.n_pop)
        assert np.array_equal(res.obs_times, [0.0, 7.0, 14.0, 21.0])
        # endpoint must be one of the surviving particles
        assert any(np.array_equal(traj[-1], row) for row in res.final_states)

    def test_final_log_weights_normalized(self, epidemic_params, annual_forcing):
        obs = [(0.0, 1), (7.0, 0)]
        res = run_filter(obs, annual_forcing, epidemic_params, 64, SimConfig(), 23)
        assert abs(np.exp(res.final_log_weights).sum() - 1.0) < 1e-12
        assert res.final_states.shape == (64, 2)
        assert res.final_state.s + res.final_state.i <= epidemic_params.n_pop


class TestValidation:
    def test_rejects_empty_observations(self, epidemic_params, annual_forcing):
        with pytest.raises(ValueError, match="at least one"):
            run_filter([], annual_forcing, epidemic_params, 8, SimConfig(), 0)

    def test_rejects_unsorted_times(self, epidemic_params, annual_forcing):
        with pytest.raises(ValueError, match="increasing"):
            run_filter([(0.0, 1), (0.0, 2)], annual_forcing, epidemic_params, 8,
                       SimConfig(), 0)

    def test_rejects_negative_counts(self, epidemic_params, annual_forcing):
        with pytest.raises(ValueError, match="nonnegative"):
            run_filter([(0.0, -1)], annual_forcing, epidemic_params, 8, SimConfig(), 0)

    def test_rejects_zero_particles(self, epidemic_params, annual_forcing):
        with pytest.raises(ValueError, match="n_particles"):
            run_filter([(0.0, 1)], annual_forcing, epidemic_params, 0, SimConfig(), 0)

    def test_rejects_unknown_resampling(self, epidemic_params, annual_forcing):
        with pytest.raises(ValueError, match="resampling"):
            run_filter([(0.0, 1)], annual_forcing, epidemic_params, 8, SimConfig(), 0,
                       resampling="stratified")

    def test_uncovered_window_raises(self, epidemic_params):
        short = DailyForcing(0, np.full(3, 1e-3))
        with pytest.raises(DataError, match="day 3"):
            run_filter([(0.0, 1), (10.0, 1)], short, epidemic_params, 8, SimConfig(), 0)
