"""Metropolis-Hastings machinery tests.

The conjugate toy plugs an exact likelihood into the same step code the
particle version uses, so posterior moments have closed forms to hit. The
noisy-likelihood property (K-invariance on the tiny chain) is what licenses
treating filter output as a likelihood at all.
"""

import numpy as np
import pytest
from scipy.special import expit

from hiddensirs import (
    ChainSchedule,
    ConfigError,
    ModelParams,
    constant_design,
    NumericalError,
    PosteriorDraw,
    PriorSpec,
    ProposalSpec,
    SmcLikelihood,
    Streams,
    TransformedParams,
    effective_sample_size,
    log_prior,
    mh_step,
    run_chain,
    run_pipeline,
    sinusoid_design,
    to_transformed,
)
from hiddensirs.simulate import SimConfig, simulate_path

from conftest import gen

N_COMP = 7  # one alpha coefficient unless a test says otherwise


def vector(**overrides):
    """Transformed vector with benign defaults, n_alpha=1."""
    vals = {"log_beta": -9.0, "log_gamma": -2.3, "log_mu": -7.0, "logit_rho": -4.0,
            "alpha_0": -7.0, "log_phi_s": 7.6, "log_phi_i": 2.7}
    vals.update(overrides)
    return TransformedParams(values=np.array([
        vals["log_beta"], vals["log_gamma"], vals["log_mu"], vals["logit_rho"],
        vals["alpha_0"], vals["log_phi_s"], vals["log_phi_i"]]), n_alpha=1)


def mask_except(*indices):
    mask = np.ones(N_COMP, dtype=bool)
    for j in indices:
        mask[j] = False
    return mask


class FlatLikelihood:
    """Always zero: the chain samples its prior."""

    def evaluate(self, theta, rng):
        return 0.0, None, None


class DeadLikelihood:
    def evaluate(self, theta, rng):
        return -np.inf, None, None


class TestProposalSpec:
    def test_rejects_unknown_mode(self):
        with pytest.raises(ValueError, match="mode"):
            ProposalSpec(mode="uniform", step_sds=1.0)

    def test_rejects_bad_sds(self):
        with pytest.raises(ValueError, match="positive"):
            ProposalSpec(mode="independent-normals", step_sds=[0.1, 0.0])

    def test_rejects_asymmetric_covariance(self):
        with pytest.raises(ValueError, match="symmetric"):
            ProposalSpec(mode="multivariate-normal", covariance=[[1.0, 0.5], [0.2, 1.0]])

    def test_indefinite_covariance_fails_at_construction(self):
        with pytest.raises(NumericalError, match="positive definite"):
            ProposalSpec(mode="multivariate-normal", covariance=[[1.0, 2.0], [2.0, 1.0]])

    def test_zero_covariance_fails(self):
        with pytest.raises(NumericalError):
            ProposalSpec(mode="multivariate-normal", covariance=np.zeros((2, 2)))

    def test_independent_step_moments(self):
        prop = ProposalSpec(mode="independent-normals", step_sds=[0.5, 2.0], scale=4.0)
        steps = np.array([prop.sample_step(gen(1), 2) for _ in range(1)])
        draws = np.array([prop.sample_step(g, 2) for g in [gen(s) for s in range(2000)]])
        sds = draws.std(axis=0)
        # scale multiplies the covariance, so sds pick up sqrt(scale)
        assert np.allclose(sds, [1.0, 4.0], rtol=0.1)
        assert steps.shape == (1, 2)

    def test_multivariate_step_covariance(self):
        cov = np.array([[2.0, 0.8], [0.8, 1.0]])
        prop = ProposalSpec(mode="multivariate-normal", covariance=cov, scale=0.5)
        g = gen(2)
        draws = np.array([prop.sample_step(g, 2) for _ in range(40_000)])
        emp = np.cov(draws, rowvar=False)
        assert np.allclose(emp, 0.5 * cov, atol=0.03)

    def test_dimension_mismatch(self):
        prop = ProposalSpec(mode="multivariate-normal", covariance=np.eye(3))
        with pytest.raises(ValueError, match="3-dimensional"):
            prop.sample_step(gen(3), 2)

    def test_schedule_validation(self):
        with pytest.raises(ValueError, match="final_iters"):
            ChainSchedule(10, 10, 0)
        with pytest.raises(ValueError, match="thin"):
            ChainSchedule(10, 10, 10, thin=0)


class TestMhStep:
    def current_at(self, theta, prior, log_lik=0.0):
        return PosteriorDraw(theta=theta, natural=None, log_lik_hat=log_lik,
                             log_prior=log_prior(theta, prior), trajectory=None,
                             accepted=False)

    def test_dead_proposal_is_always_rejected_and_state_untouched(self):
        prior = PriorSpec(means=np.zeros(N_COMP), sds=np.ones(N_COMP),
                          fixed_mask=mask_except(0, 3))
        prop = ProposalSpec(mode="independent-normals", step_sds=0.5)
        current = self.current_at(vector(), prior)
        for it in range(50):
            result, accepted = mh_step(current, prop, prior, DeadLikelihood(),
                                       Streams(7).child(it))
            assert result is current
            assert not accepted

    def test_requires_finite_current(self):
        prior = PriorSpec(means=np.zeros(N_COMP), sds=np.ones(N_COMP),
                          fixed_mask=mask_except(0))
        bad = self.current_at(vector(), prior, log_lik=-np.inf)
        with pytest.raises(ValueError, match="non-finite"):
            mh_step(bad, ProposalSpec(mode="independent-normals", step_sds=0.1),
                    prior, FlatLikelihood(), 0)

    def test_fixed_components_never_move(self):
        prior = PriorSpec(means=np.zeros(N_COMP), sds=np.ones(N_COMP),
                          fixed_mask=mask_except(3))
        current = self.current_at(vector(), prior)
        start = np.array(current.theta.values)
        for it in range(200):
            current, _ = mh_step(current, ProposalSpec(mode="independent-normals", step_sds=2.0),
                                 prior, FlatLikelihood(), Streams(8).child(it))
        moved = np.array(current.theta.values) != start
        assert moved[3]
        assert not np.any(moved[[0, 1, 2, 4, 5, 6]])

    def test_near_zero_step_with_deterministic_likelihood_always_accepts(self):
        # theta* ~= theta and the evaluator is a smooth function, so the
        # ratio is exp(~0) and every step should go through
        prior = PriorSpec(means=np.zeros(N_COMP), sds=np.full(N_COMP, 10.0),
                          fixed_mask=mask_except(0))

        class Smooth:
            def evaluate(self, theta, rng):
                return -0.5 * theta.log_beta ** 2, None, None

        current = self.current_at(vector(), prior,
                                  log_lik=-0.5 * vector().log_beta ** 2)
        accepts = 0
        for it in range(200):
            current, acc = mh_step(current, ProposalSpec(mode="independent-normals", step_sds=1e-9),
                                   prior, Smooth(), Streams(9).child(it))
            accepts += acc
        assert accepts == 200

    def test_prior_recovery_moments(self):
        # flat likelihood: after 5e4 steps the chain is a sample from the
        # prior, so component moments have closed forms
        means = np.zeros(N_COMP)
        sds = np.ones(N_COMP)
        means[0], sds[0] = -9.0, 0.6
        means[4], sds[4] = 1.0, 1.2
        prior = PriorSpec(means=means, sds=sds, fixed_mask=mask_except(0, 4))
        prop = ProposalSpec(mode="independent-normals", step_sds=2.4 * sds[[0, 4]])
        current = self.current_at(vector(log_beta=-9.0, alpha_0=1.0), prior)
        root = Streams(314)
        kept = np.empty((50_000, 2))
        for it in range(kept.shape[0]):
            current, _ = mh_step(current, prop, prior, FlatLikelihood(), root.child(it))
            kept[it] = current.theta.values[[0, 4]]
        for j, (m, s) in enumerate([(-9.0, 0.6), (1.0, 1.2)]):
            ess = effective_sample_size(kept[:, j])
            se = s / np.sqrt(ess)
            assert abs(kept[:, j].mean() - m) < 3 * se
            assert kept[:, j].var(ddof=1) == pytest.approx(s * s, rel=0.10)


class BetaBinomialTarget:
    """Exact likelihood evaluator whose posterior is Beta(a + y, b + m - y).

    The chain moves on theta = logit p with a normal "prior" spec; evaluate
    returns the conjugate target minus that normal term, so the two add back
    to the exact Beta-binomial posterior density on the logit scale.
    """

    def __init__(self, y, m, a, b, prior_mean, prior_sd):
        self.shape1 = a + y
        self.shape2 = b + m - y
        self.prior_mean = prior_mean
        self.prior_sd = prior_sd

    def evaluate(self, theta, rng):
        t = theta.logit_rho
        target = -self.shape1 * np.log1p(np.exp(-t)) - self.shape2 * np.log1p(np.exp(t))
        z = (t - self.prior_mean) / self.prior_sd
        normal_term = -0.5 * z * z - np.log(self.prior_sd) - 0.5 * np.log(2 * np.pi)
        return target - normal_term, None, None


def run_beta_binomial_chain(final_iters, seed, thin=2):
    y, m, a, b = 11, 30, 2.0, 3.0
    target = BetaBinomialTarget(y, m, a, b, prior_mean=0.0, prior_sd=2.0)
    prior = PriorSpec(means=np.zeros(N_COMP), sds=np.full(N_COMP, 2.0),
                      fixed_mask=mask_except(3))
    schedule = ChainSchedule(1000, 2000, final_iters, thin=thin, n_particles=1)
    result = run_chain(target, prior, schedule, vector(logit_rho=0.0), Streams(seed),
                       initial_step_sds=0.8)
    p = expit(result.component("logit_rho"))
    post_mean = (a + y) / (a + b + m)
    s1, s2 = a + y, b + m - y
    post_var = s1 * s2 / ((s1 + s2) ** 2 * (s1 + s2 + 1))
    return p, post_mean, post_var, result


class TestConjugateToy:
    def test_beta_posterior_moments(self):
        p, post_mean, post_var, _ = run_beta_binomial_chain(12_000, seed=101)
        ess = effective_sample_size(p)
        se_mean = p.std(ddof=1) / np.sqrt(ess)
        assert abs(p.mean() - post_mean) < 3 * se_mean
        centered_sq = (p - p.mean()) ** 2
        se_var = centered_sq.std(ddof=1) / np.sqrt(effective_sample_size(centered_sq))
        assert abs(p.var(ddof=1) - post_var) < 3 * se_var

    def test_acceptance_rate_is_sane(self):
        _, _, _, result = run_beta_binomial_chain(4_000, seed=102)
        final = result.reports[2]
        assert final.name == "final"
        assert 0.05 < final.acceptance_rate < 0.9


class TestChainPipeline:
    def flat_setup(self):
        means = np.zeros(N_COMP)
        sds = np.ones(N_COMP)
        prior = PriorSpec(means=means, sds=sds, fixed_mask=mask_except(0, 3))
        schedule = ChainSchedule(40, 60, 100, thin=5, n_particles=1)
        return prior, schedule

    def test_phase_reports_and_thinned_counts(self):
        prior, schedule = self.flat_setup()
        result = run_chain(FlatLikelihood(), prior, schedule, vector(), Streams(201))
        assert [r.name for r in result.reports] == ["burn_in", "secondary", "final"]
        assert [r.iterations for r in result.reports] == [40, 60, 100]
        assert len(result.draws) == 100 // 5
        assert result.history["burn_in_values"].shape == (40 // 5, N_COMP)
        assert result.history["secondary_values"].shape == (60 // 5, N_COMP)
        assert result.history["final_log_lik"].shape == (100 // 5,)
        assert all(np.isfinite(d.log_lik_hat) for d in result.draws)
        assert result.proposal_covariance.shape == (2, 2)

    def test_rerun_is_bit_identical(self):
        prior, schedule = self.flat_setup()
        a = run_chain(FlatLikelihood(), prior, schedule, vector(), Streams(202))
        b = run_chain(FlatLikelihood(), prior, schedule, vector(), Streams(202))
        assert np.array_equal(a.transformed_matrix(), b.transformed_matrix())
        assert [r.accepted for r in a.reports] == [r.accepted for r in b.reports]

    def test_dead_initial_point_aborts(self):
        prior, schedule = self.flat_setup()
        with pytest.raises(NumericalError, match="initial"):
            run_chain(DeadLikelihood(), prior, schedule, vector(), Streams(203))

    def test_frozen_chain_aborts_adaptation(self):
        # likelihood kills every proposal, so the secondary phase never moves
        # and its covariance cannot be factorized
        class OnlyInit:
            def __init__(self):
                self.calls = 0

            def evaluate(self, theta, rng):
                self.calls += 1
                return (0.0, None, None) if self.calls == 1 else (-np.inf, None, None)

        prior, schedule = self.flat_setup()
        with pytest.raises(NumericalError, match="covariance"):
            run_chain(OnlyInit(), prior, schedule, vector(), Streams(204))

    def test_all_fixed_rejected(self):
        prior = PriorSpec(means=np.zeros(N_COMP), sds=np.ones(N_COMP),
                          fixed_mask=np.ones(N_COMP, dtype=bool))
        with pytest.raises(ValueError, match="fixed"):
            run_chain(FlatLikelihood(), prior, ChainSchedule(10, 10, 10),
                      vector(), Streams(205))


def simulate_counts(params, design, obs_times, seed):
    """Draw one synthetic count series from the generative model."""
    root = Streams(seed)
    forcing = design.build(params.alpha_coeffs)
    g = root.child(0).generator()
    from hiddensirs import sample_initial_state, sample_observation

    state = sample_initial_state(params.phi_s, params.phi_i, params.n_pop, g)
    first = sample_observation(state.i, params.rho, g)
    path = simulate_path(state, obs_times[0], np.asarray(obs_times[1:], dtype=float),
                         forcing, params, SimConfig(), g)
    counts = [first] + [sample_observation(int(i), params.rho, g) for _, i in path]
    return [(float(t), int(c)) for t, c in zip(obs_times, counts)]


class TestSmcPipeline:
    def setup_method(self):
        self.n_pop = 3
        self.params = ModelParams(beta=0.4, gamma=0.3, mu=0.2, rho=0.6,
                                  alpha_coeffs=np.array([np.log(0.05)]),
                                  phi_s=1.2, phi_i=0.8, n_pop=3)
        self.design = constant_design(0, 40)
        self.obs = simulate_counts(self.params, self.design,
                                   [0.0, 4.0, 8.0, 12.0, 16.0, 20.0], seed=42)

    def priors(self, free_index):
        means = to_transformed(self.params).values.copy()
        sds = np.full(N_COMP, 1.5)
        return PriorSpec(means=means, sds=sds, fixed_mask=mask_except(free_index))

    def test_pipeline_runs_and_is_deterministic(self):
        prior = self.priors(3)
        schedule = ChainSchedule(30, 40, 60, thin=4, n_particles=20)
        init = to_transformed(self.params)
        a = run_pipeline(self.obs, self.design, self.n_pop, prior, schedule, init, 77)
        b = run_pipeline(self.obs, self.design, self.n_pop, prior, schedule, init, 77)
        assert np.array_equal(a.transformed_matrix(), b.transformed_matrix())
        assert len(a.draws) == 60 // 4
        for d in a.draws:
            assert np.isfinite(d.log_lik_hat)
            assert d.natural is not None
            assert d.trajectory.shape == (len(self.obs), 2)
            s, i = d.final_state
            assert 0 <= s + i <= self.n_pop

    def test_alpha_count_mismatch_raises(self):
        # the sinusoid design has one covariate column, so it needs two alpha
        # coefficients; this init carries only the intercept
        init = to_transformed(self.params)
        assert init.n_alpha == 1
        with pytest.raises(ConfigError, match="alpha"):
            run_pipeline(self.obs, sinusoid_design(0, 40), self.n_pop,
                         PriorSpec(means=np.zeros(7), sds=np.ones(7),
                                   fixed_mask=np.zeros(7, dtype=bool)),
                         ChainSchedule(5, 5, 5, thin=1, n_particles=5), init, 1)

    def test_posterior_mean_insensitive_to_particle_count(self):
        # the likelihood estimate's noise level must not shift the posterior
        prior = self.priors(3)
        init = to_transformed(self.params)

        def posterior_mean(k, seed):
            schedule = ChainSchedule(200, 200, 1800, thin=3, n_particles=k)
            res = run_pipeline(self.obs, self.design, self.n_pop, prior, schedule,
                               init, seed, initial_step_sds=0.6)
            series = res.component("logit_rho")
            ess = effective_sample_size(series)
            return series.mean(), series.std(ddof=1) / np.sqrt(ess)

        m_small, se_small = posterior_mean(25, 501)
        m_big, se_big = posterior_mean(200, 502)
        assert abs(m_small - m_big) < 3 * np.hypot(se_small, se_big)


class TestMultiStart:
    def test_dispersed_starts_give_overlapping_intervals(self):
        # three chains from deliberately spread starting points must land on
        # compatible posteriors. beta is held at truth: with one season of
        # weekly counts the data cannot separate person-to-person from
        # environmental pressure, and chains can park in either explanation
        # for thousands of iterations; recovering that split is the long
        # recovery run's job, not this smoke check's.
        truth = ModelParams(beta=1.25e-5, gamma=0.1, mu=0.0009, rho=0.015,
                            alpha_coeffs=np.array([-7.0, 3.5]),
                            phi_s=2100.0, phi_i=15.0, n_pop=10_000)
        design = sinusoid_design(0, 380)
        times = [float(t) for t in range(0, 365, 7)]
        obs = simulate_counts(truth, design, times, seed=640)

        means = np.array([np.log(1.25e-4), np.log(0.1), np.log(truth.mu),
                          np.log(0.03 / 0.97), -8.0, 0.0,
                          np.log(truth.phi_s), np.log(truth.phi_i)])
        sds = np.array([5.0, 0.09, 1.0, 2.0, 5.0, 5.0, 1.0, 1.0])
        fixed = np.array([True, False, True, False, False, False, True, True])
        prior = PriorSpec(means=means, sds=sds, fixed_mask=fixed)

        starts = [
            dict(gamma=0.11, alpha=(-7.11, 0.0), rho=0.006),
            dict(gamma=0.10, alpha=(-8.0, 0.0), rho=0.0006),
            dict(gamma=0.12, alpha=(-3.0, 1.0), rho=0.01),
        ]
        schedule = ChainSchedule(600, 300, 1200, thin=4, n_particles=40)
        intervals = {"log_gamma": [], "logit_rho": [], "alpha_0": [], "alpha_1": []}
        for run_id, st in enumerate(starts):
            init = to_transformed(ModelParams(
                beta=truth.beta, gamma=st["gamma"], mu=truth.mu, rho=st["rho"],
                alpha_coeffs=np.array(st["alpha"]), phi_s=truth.phi_s,
                phi_i=truth.phi_i, n_pop=truth.n_pop))
            res = run_pipeline(obs, design, truth.n_pop, prior, schedule, init,
                               Streams(641).child(run_id), initial_step_sds=0.4)
            for name in intervals:
                series = res.component(name)
                intervals[name].append(np.quantile(series, [0.025, 0.975]))
        for name, ivals in intervals.items():
            for a in range(3):
                for b in range(a + 1, 3):
                    lo = max(ivals[a][0], ivals[b][0])
                    hi = min(ivals[a][1], ivals[b][1])
                    assert lo < hi, f"{name}: chains {a} and {b} do not overlap: {ivals}"


class TestEffectiveSampleSize:
    def test_iid_series(self):
        ess = effective_sample_size(gen(301).standard_normal(1000))
        assert 800 < ess <= 1200

    def test_ar1_series(self):
        phi, n = 0.9, 10_000
        g = gen(302)
        x = np.empty(n)
        x[0] = g.standard_normal() / np.sqrt(1 - phi * phi)
        for t in range(1, n):
            x[t] = phi * x[t - 1] + g.standard_normal()
        expected = n * (1 - phi) / (1 + phi)
        assert effective_sample_size(x) == pytest.approx(expected, rel=0.30)

    def test_constant_series_flagged(self):
        with pytest.warns(UserWarning, match="constant"):
            ess = effective_sample_size(np.full(50, 3.2))
        assert ess == 50.0

    def test_alternating_series_clamped(self):
        x = np.tile([1.0, -1.0], 500)
        with pytest.warns(UserWarning, match="clamped"):
            ess = effective_sample_size(x)
        assert ess == x.size

    def test_short_series_rejected(self):
        with pytest.raises(ValueError, match="at least 10"):
            effective_sample_size(np.arange(9.0))

    def test_ess_reflects_thinning_gain(self):
        # thinned AR(1) is closer to white noise, so per-draw ESS fraction rises
        phi, n = 0.95, 20_000
        g = gen(303)
        x = np.empty(n)
        x[0] = 0.0
        for t in range(1, n):
            x[t] = phi * x[t - 1] + g.standard_normal()
        full = effective_sample_size(x) / n
        thinned = x[::10]
        assert effective_sample_size(thinned) / thinned.size > full
