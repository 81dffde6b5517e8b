"""Tests for payoff estimation: exact, rollout-sampled, and budget planning."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from zsmg.estimators import (
    ExactEstimator,
    ReducibleChainError,
    SampledEstimator,
    Trajectory,
    estimate_mu,
    exact_estimates,
    exact_triple_from_q,
    explore_mix,
    plan_accuracy_budget,
    plan_sample_budget,
    rollout,
    sampled_estimates,
)
from zsmg.games import MarkovGame
from zsmg.gamegen import random_game
from zsmg.learner import RunConfig, initial_state, run_selfplay

from oracles import (
    average_gap_budget_reference,
    binomial_three_se,
    last_iterate_budget_reference,
    sample_budget_reference,
    two_state_hitting_time,
)


# ---------------------------------------------------------------------------
# Exact estimates
# ---------------------------------------------------------------------------

class TestExactEstimates:
    def test_rho_is_x_dot_ell_bitwise(self):
        rng = np.random.default_rng(0)
        q = rng.uniform(size=(2, 3, 4))
        x = rng.dirichlet(np.ones(3), size=2)
        y = rng.dirichlet(np.ones(4), size=2)
        triple = exact_triple_from_q(q, x, y)
        expected_rho = np.einsum("sa,sa->s", x, triple.ell)
        np.testing.assert_array_equal(triple.rho, expected_rho)

    def test_both_contractions_agree(self):
        rng = np.random.default_rng(1)
        q = rng.uniform(size=(3, 4, 2))
        x = rng.dirichlet(np.ones(4), size=3)
        y = rng.dirichlet(np.ones(2), size=3)
        triple = exact_triple_from_q(q, x, y)
        # x^T (Q y) and (x^T Q) y are the same bilinear form.
        for s in range(3):
            assert abs(float(x[s] @ triple.ell[s]) -
                       float(triple.r[s] @ y[s])) <= 1e-12

    def test_zero_critic_reduces_to_stage_loss(self, mp1):
        x = np.array([[0.5, 0.5]])
        y = np.array([[1.0, 0.0]])
        triple = exact_estimates(mp1, np.zeros(1), x, y)
        np.testing.assert_array_equal(triple.ell, mp1.loss[:, :, 0])

    def test_uniform_pennies_payoff(self, mp1):
        x = np.array([[0.5, 0.5]])
        triple = exact_estimates(mp1, np.zeros(1), x, x)
        assert triple.rho[0] == pytest.approx(0.5, abs=1e-15)

    def test_estimator_protocol_returns_no_error(self, mp1):
        state = initial_state(mp1, eta=0.01)
        triple, err = ExactEstimator().estimates(mp1, state, mp1.loss)
        assert err is None
        assert triple.ell.shape == (1, 2)


# ---------------------------------------------------------------------------
# Exploration mixing
# ---------------------------------------------------------------------------

class TestExploreMix:
    def test_zero_weight_is_identity(self):
        p = np.array([[0.3, 0.7]])
        out = explore_mix(p, 0.0)
        np.testing.assert_array_equal(out, p)

    def test_uniform_is_fixed_point(self):
        p = np.full((2, 4), 0.25)
        np.testing.assert_allclose(explore_mix(p, 0.3), p, atol=1e-15)

    def test_pure_strategy_example(self):
        out = explore_mix(np.array([1.0, 0.0]), 0.2)
        np.testing.assert_allclose(out, [0.95, 0.05], atol=1e-15)

    @given(eps=st.floats(0.0, 1.0), seed=st.integers(0, 1000))
    def test_min_entry_guarantee(self, eps, seed):
        rng = np.random.default_rng(seed)
        p = rng.dirichlet(np.ones(3))
        out = explore_mix(p, eps)
        assert out.min() >= eps / 6.0 - 1e-15
        assert out.sum() == pytest.approx(1.0, abs=1e-12)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            explore_mix(np.array([1.0, 0.0]), -0.1)
        with pytest.raises(ValueError):
            explore_mix(np.array([1.0, 0.0]), 1.5)


# ---------------------------------------------------------------------------
# Rollouts
# ---------------------------------------------------------------------------

class TestRollout:
    def test_shapes_and_loss_consistency(self, switching_mp):
        rng = np.random.default_rng(0)
        x = np.full((2, 2), 0.5)
        traj = rollout(switching_mp, x, x, 100, 0, rng)
        assert traj.states.shape == (101,)
        assert len(traj) == 100
        for i in range(100):
            assert traj.losses[i] == switching_mp.loss[
                traj.states[i], traj.actions_p1[i], traj.actions_p2[i]]

    def test_deterministic_given_generator_seed(self, switching_mp):
        x = np.full((2, 2), 0.5)
        t1 = rollout(switching_mp, x, x, 50, 0, np.random.default_rng(7))
        t2 = rollout(switching_mp, x, x, 50, 0, np.random.default_rng(7))
        np.testing.assert_array_equal(t1.states, t2.states)
        np.testing.assert_array_equal(t1.actions_p1, t2.actions_p1)
        np.testing.assert_array_equal(t1.losses, t2.losses)

    def test_validation(self, mp1):
        x = np.array([[0.5, 0.5]])
        with pytest.raises(ValueError):
            rollout(mp1, x, x, 0, 0, np.random.default_rng(0))
        with pytest.raises(ValueError):
            rollout(mp1, x, x, 10, 5, np.random.default_rng(0))

    def test_action_frequencies_match_strategy(self):
        # Zero-loss one-state game: only the sampling path is exercised.
        game = MarkovGame(loss=np.zeros((1, 2, 2)),
                          transition=np.ones((1, 2, 2, 1)), gamma=0.9)
        x = np.array([[0.3, 0.7]])
        traj = rollout(game, x, x, 100_000, 0, np.random.default_rng(0))
        freq = float(np.mean(traj.actions_p1 == 0))
        assert binomial_three_se(freq, 0.3, 100_000)


class TestSampledEstimates:
    def test_single_visit_is_exact(self):
        traj = Trajectory(
            states=np.array([0, 0]), actions_p1=np.array([1]),
            actions_p2=np.array([0]), losses=np.array([0.6]),
            n_states=1, n_actions_p1=2, n_actions_p2=2,
        )
        triple = sampled_estimates(traj, np.zeros(1), 0.9)
        assert triple.ell[0, 1] == 0.6
        assert triple.r[0, 0] == 0.6
        assert triple.rho[0] == 0.6

    def test_zero_visit_entries_are_zero(self):
        traj = Trajectory(
            states=np.array([0, 0]), actions_p1=np.array([1]),
            actions_p2=np.array([0]), losses=np.array([0.6]),
            n_states=2, n_actions_p1=2, n_actions_p2=2,
        )
        triple = sampled_estimates(traj, np.zeros(2), 0.9)
        assert triple.ell[0, 0] == 0.0
        assert triple.ell[1, 0] == triple.ell[1, 1] == 0.0
        assert triple.rho[1] == 0.0

    def test_critic_value_discounted_into_target(self):
        traj = Trajectory(
            states=np.array([0, 1]), actions_p1=np.array([0]),
            actions_p2=np.array([0]), losses=np.array([0.25]),
            n_states=2, n_actions_p1=1, n_actions_p2=1,
        )
        triple = sampled_estimates(traj, np.array([0.0, 2.0]), 0.5)
        assert triple.ell[0, 0] == 0.25 + 0.5 * 2.0

    def test_estimates_stay_in_value_range(self, switching_mp):
        rng = np.random.default_rng(3)
        x = np.full((2, 2), 0.5)
        traj = rollout(switching_mp, x, x, 500, 0, rng)
        v = rng.uniform(0.0, 10.0, size=2)
        triple = sampled_estimates(traj, v, switching_mp.gamma)
        upper = 1.0 + switching_mp.gamma * v.max()
        for arr in (triple.ell, triple.r, triple.rho):
            assert arr.min() >= 0.0
            assert arr.max() <= upper + 1e-12

    def test_long_rollout_concentrates_on_exact(self, switching_mp):
        x = np.full((2, 2), 0.5)
        traj = rollout(switching_mp, x, x, 100_000, 0, np.random.default_rng(0))
        v = np.array([1.0, 3.0])
        triple = sampled_estimates(traj, v, switching_mp.gamma)
        exact = exact_estimates(switching_mp, v, x, x)
        assert np.max(np.abs(triple.ell - exact.ell)) <= 0.05
        assert np.max(np.abs(triple.rho - exact.rho)) <= 0.05


class TestSampledEstimator:
    def test_continues_from_last_state(self, switching_mp):
        est = SampledEstimator(rollout_len=30, epsilon_prime=0.1, seed=0)
        state = initial_state(switching_mp, eta=0.01)
        est.estimates(switching_mp, state, switching_mp.loss)
        first = est.last_trajectory
        est.estimates(switching_mp, state, switching_mp.loss)
        second = est.last_trajectory
        assert second.states[0] == first.states[-1]

    def test_reset_mode_restarts(self, switching_mp):
        est = SampledEstimator(rollout_len=30, epsilon_prime=0.1, seed=0,
                               reset_each_iteration=True, s_init=1)
        state = initial_state(switching_mp, eta=0.01)
        for _ in range(3):
            est.estimates(switching_mp, state, switching_mp.loss)
            assert est.last_trajectory.states[0] == 1

    def test_collect_error_reports_sup_deviation(self, mp1):
        est = SampledEstimator(rollout_len=200, epsilon_prime=0.2, seed=1)
        state = initial_state(mp1, eta=0.01)
        q_t = mp1.loss
        triple, err = est.estimates(mp1, state, q_t, collect_error=True)
        assert err is not None and err >= 0.0
        # err is measured against the exploration-mixed strategies.
        x_mix = explore_mix(state.x, 0.2)
        exact = exact_triple_from_q(q_t, x_mix, explore_mix(state.y, 0.2))
        assert err >= np.max(np.abs(triple.ell - exact.ell)) - 1e-15

    def test_rejects_zero_length(self):
        with pytest.raises(ValueError):
            SampledEstimator(rollout_len=0, epsilon_prime=0.1)

    def test_selfplay_epsilon_prime_derived_from_epsilon(self, mp1):
        # run_selfplay mixes exploration as (1 - gamma) * epsilon unless
        # epsilon_prime is given explicitly.
        cfg = RunConfig(iterations=10, eta=0.05, estimator="sampled",
                        rollout_len=20, epsilon=1.0, seed=0)
        result = run_selfplay(mp1, cfg)
        assert result.state.t == 11


# ---------------------------------------------------------------------------
# Budget planning
# ---------------------------------------------------------------------------

class TestSampleBudget:
    def test_matches_reference_formula(self):
        cases = [
            (2, 2, 0.5, 1.0, 1.0, 100, 0.1, 1.0),
            (3, 2, 0.9, 0.3, 0.1, 10**6, 0.01, 1.0),
            (4, 4, 0.99, 0.05, 0.2, 10**4, 0.05, 2.0),
        ]
        for n_a, n_b, gamma, mu, eps, horizon, delta, c_l in cases:
            budget = plan_sample_budget(n_a, n_b, gamma, mu, eps, horizon,
                                        delta, c_l=c_l)
            assert budget.rollout_len == sample_budget_reference(
                n_a, n_b, gamma, mu, eps, horizon, delta, c_l=c_l)

    def test_epsilon_cubed_scaling(self):
        base = plan_sample_budget(2, 2, 0.9, 0.5, 0.2, 10**5, 0.01)
        halved = plan_sample_budget(2, 2, 0.9, 0.5, 0.1, 10**5, 0.01)
        ratio = halved.rollout_len / base.rollout_len
        assert 7.9 <= ratio <= 8.1

    def test_monotone_in_action_counts(self):
        small = plan_sample_budget(2, 2, 0.9, 0.5, 0.5, 10**4, 0.1)
        big = plan_sample_budget(5, 2, 0.9, 0.5, 0.5, 10**4, 0.1)
        assert big.rollout_len > small.rollout_len

    def test_echoes_inputs_and_derives_epsilon_prime(self):
        budget = plan_sample_budget(2, 3, 0.9, 0.4, 0.25, 10**3, 0.05)
        assert budget.epsilon == 0.25
        assert budget.epsilon_prime == pytest.approx((1.0 - 0.9) * 0.25, abs=1e-15)
        assert budget.mu == 0.4

    def test_validation(self):
        with pytest.raises(ValueError):
            plan_sample_budget(2, 2, 0.9, 0.5, 0.0, 10**3, 0.1)
        with pytest.raises(ValueError):
            plan_sample_budget(2, 2, 0.9, 0.0, 0.5, 10**3, 0.1)
        with pytest.raises(ValueError):
            plan_sample_budget(2, 2, 0.9, 0.5, 0.5, 10**3, 1.5)
        with pytest.raises(ValueError):
            plan_sample_budget(2, 2, 0.9, 0.5, 0.5, 0.5, 0.1)


class TestAccuracyBudget:
    def test_average_gap_matches_reference(self):
        budget = plan_accuracy_budget(xi=0.1, mode="average-gap", n_states=2,
                                      gamma=0.9, eta=0.01)
        it, eps, logf = average_gap_budget_reference(0.1, 2, 0.9, 0.01)
        assert budget.iterations == it
        assert budget.epsilon == pytest.approx(eps, rel=1e-15)
        assert budget.log_factor == pytest.approx(logf, rel=1e-15)

    def test_last_iterate_matches_reference(self):
        budget = plan_accuracy_budget(xi=0.1, mode="last-iterate", n_states=2,
                                      gamma=0.9, eta=0.01, c_hat=0.7)
        it, eps = last_iterate_budget_reference(0.1, 2, 0.9, 0.01, 0.7)
        assert budget.iterations == it
        assert budget.epsilon == pytest.approx(eps, rel=1e-15)
        assert budget.log_factor is None

    def test_average_gap_xi_scaling(self):
        base = plan_accuracy_budget(xi=0.2, mode="average-gap", n_states=1,
                                    gamma=0.9, eta=0.01)
        tighter = plan_accuracy_budget(xi=0.1, mode="average-gap", n_states=1,
                                       gamma=0.9, eta=0.01)
        assert tighter.iterations / base.iterations == pytest.approx(4.0, rel=1e-9)

    def test_last_iterate_eta_scaling(self):
        base = plan_accuracy_budget(xi=0.1, mode="last-iterate", n_states=1,
                                    gamma=0.9, eta=0.02, c_hat=1.0)
        halved = plan_accuracy_budget(xi=0.1, mode="last-iterate", n_states=1,
                                      gamma=0.9, eta=0.01, c_hat=1.0)
        assert halved.iterations / base.iterations == pytest.approx(16.0, rel=1e-9)

    def test_missing_c_hat_rejected(self):
        with pytest.raises(ValueError):
            plan_accuracy_budget(xi=0.1, mode="last-iterate", n_states=1,
                                 gamma=0.9, eta=0.01)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            plan_accuracy_budget(xi=0.1, mode="final", n_states=1, gamma=0.9,
                                 eta=0.01)

    def test_validation(self):
        with pytest.raises(ValueError):
            plan_accuracy_budget(xi=0.0, mode="average-gap", n_states=1,
                                 gamma=0.9, eta=0.01)
        with pytest.raises(ValueError):
            plan_accuracy_budget(xi=0.1, mode="average-gap", n_states=1,
                                 gamma=0.9, eta=-0.01)
        with pytest.raises(ValueError):
            plan_accuracy_budget(xi=0.1, mode="last-iterate", n_states=1,
                                 gamma=0.9, eta=0.01, c_hat=0.0)


# ---------------------------------------------------------------------------
# Irreducibility probing
# ---------------------------------------------------------------------------

class TestEstimateMu:
    def test_single_state_is_trivially_irreducible(self, mp1):
        est = estimate_mu(mp1)
        assert est.mu == 1.0
        assert est.max_hitting_time == 0.0
        assert est.n_pairs_probed == 0
        assert est.certified is False

    def test_symmetric_two_state_chain(self):
        # Always switch with probability 1/2: expected hitting time 2 both ways.
        trans = np.zeros((2, 1, 1, 2))
        trans[0, 0, 0] = [0.5, 0.5]
        trans[1, 0, 0] = [0.5, 0.5]
        game = MarkovGame(loss=np.zeros((2, 1, 1)), transition=trans, gamma=0.9)
        est = estimate_mu(game, n_probe_policies=4)
        assert est.max_hitting_time == pytest.approx(
            two_state_hitting_time(0.5), abs=1e-12)
        assert est.mu == pytest.approx(0.5, abs=1e-12)
        assert est.n_pairs_probed == 4

    def test_reducible_chain_raises_with_probe_index(self):
        # Two absorbing states: no policy can cross between them.
        trans = np.zeros((2, 1, 1, 2))
        trans[0, 0, 0, 0] = 1.0
        trans[1, 0, 0, 1] = 1.0
        game = MarkovGame(loss=np.zeros((2, 1, 1)), transition=trans, gamma=0.9)
        with pytest.raises(ReducibleChainError) as exc_info:
            estimate_mu(game)
        assert exc_info.value.probe_index == 0

    def test_mixed_transitions_always_finite(self):
        game = random_game(seed=10, n_states=3, n_actions_p1=2, n_actions_p2=2,
                           gamma=0.9, kappa=0.1)
        est = estimate_mu(game, n_probe_policies=8)
        assert 0.0 < est.mu <= 1.0
        assert np.isfinite(est.max_hitting_time)
