"""Tests for the optimistic-gradient learner, critic, and run driver."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from zsmg.estimators import EstimateTriple, exact_estimates
from zsmg.games import MarkovGame, evaluate_policy_pair, JointPolicy, q_from_v
from zsmg.gamegen import random_game
from zsmg.learner import (
    RunConfig,
    alpha_schedule,
    critic_step,
    eta_max,
    initial_state,
    make_alpha_schedule,
    ogda_step,
    project_simplex,
    reduce_game_for_opponent,
    run_selfplay,
    run_single_player,
)

from oracles import sort_projection_1d


# ---------------------------------------------------------------------------
# Simplex projection
# ---------------------------------------------------------------------------

class TestProjectSimplex:
    def test_interior_point_unchanged(self):
        v = np.array([0.3, 0.7])
        assert np.array_equal(project_simplex(v), v)

    def test_known_values(self):
        np.testing.assert_allclose(project_simplex(np.array([1.0, 1.0])),
                                   [0.5, 0.5], atol=0)
        np.testing.assert_allclose(project_simplex(np.array([2.0, 0.0])),
                                   [1.0, 0.0], atol=0)
        np.testing.assert_allclose(project_simplex(np.array([0.0, 0.0, 0.0])),
                                   [1 / 3, 1 / 3, 1 / 3], atol=1e-15)

    def test_matches_reference_implementation(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            v = rng.uniform(-2.0, 2.0, size=rng.integers(2, 6))
            np.testing.assert_array_equal(project_simplex(v), sort_projection_1d(v))

    def test_batched_rows_match_single(self):
        rng = np.random.default_rng(13)
        batch = rng.uniform(-1.0, 1.0, size=(5, 4))
        out = project_simplex(batch)
        for i in range(5):
            np.testing.assert_array_equal(out[i], project_simplex(batch[i]))

    @given(seed=st.integers(0, 100_000))
    def test_postconditions(self, seed):
        rng = np.random.default_rng(seed)
        v = rng.uniform(-3.0, 3.0, size=int(rng.integers(1, 7)))
        p = project_simplex(v)
        assert p.min() >= 0.0
        assert p.sum() == pytest.approx(1.0, abs=1e-12)
        # Projection property: no simplex vertex is closer than the projection
        # of itself... check optimality against a few random simplex points.
        for _ in range(5):
            w = rng.dirichlet(np.ones(v.size))
            assert np.sum((p - v) ** 2) <= np.sum((w - v) ** 2) + 1e-12

    def test_idempotent(self):
        rng = np.random.default_rng(14)
        for _ in range(50):
            p = project_simplex(rng.uniform(-1.0, 1.0, size=4))
            np.testing.assert_allclose(project_simplex(p), p, atol=1e-12)


# ---------------------------------------------------------------------------
# Step-size and critic schedules
# ---------------------------------------------------------------------------

class TestSchedules:
    def test_alpha_first_step_replaces(self):
        assert alpha_schedule(1, 0.9) == 1.0
        assert alpha_schedule(1, 0.5) == 1.0

    def test_alpha_known_values(self):
        # H = 2 / (1 - gamma); alpha_t = (H + 1) / (H + t).
        assert alpha_schedule(2, 0.5) == pytest.approx(5.0 / 6.0, abs=1e-15)
        assert alpha_schedule(10, 0.9) == pytest.approx(0.7, abs=1e-12)

    def test_alpha_decreasing_to_zero(self):
        vals = [alpha_schedule(t, 0.9) for t in range(1, 2000)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 0.02

    def test_alpha_rejects_bad_t(self):
        with pytest.raises(ValueError):
            alpha_schedule(0, 0.9)

    def test_named_schedules(self):
        horizon = make_alpha_schedule("horizon", 0.5)
        assert horizon(1) == 1.0
        assert horizon(2) == pytest.approx(5.0 / 6.0)
        harmonic = make_alpha_schedule("harmonic", 0.5)
        assert harmonic(1) == 1.0
        assert harmonic(4) == pytest.approx(0.25)
        with pytest.raises(ValueError):
            make_alpha_schedule("bogus", 0.5)

    def test_eta_max_values(self):
        assert eta_max(0.9, 1) == pytest.approx(1e-4 * np.sqrt(0.1 ** 5), rel=1e-15)
        assert eta_max(0.5, 1) == pytest.approx(1e-4 * np.sqrt(0.5 ** 5), rel=1e-15)

    def test_eta_max_scales_inverse_sqrt_states(self):
        assert eta_max(0.9, 4) == eta_max(0.9, 1) / 2.0


class TestCriticStep:
    def test_full_replacement_at_alpha_one(self):
        v = np.array([0.3, 0.4])
        rho = np.array([0.9, 0.1])
        assert np.array_equal(critic_step(v, rho, 1.0), rho)

    def test_convex_combination(self):
        out = critic_step(np.array([0.5]), np.array([0.1]), 1.0 / 3.0)
        assert out[0] == pytest.approx(0.36666666666666664, abs=1e-15)

    def test_fixed_point(self):
        v = np.array([0.7])
        out = critic_step(v, v, 0.37)
        assert out[0] == pytest.approx(0.7, abs=1e-15)


# ---------------------------------------------------------------------------
# One optimistic step
# ---------------------------------------------------------------------------

class TestOgdaStep:
    def _mp_state(self, mp1, eta):
        return initial_state(mp1, eta=eta)

    def test_zero_gradient_is_fixed_point(self, mp1):
        state = self._mp_state(mp1, eta=0.05)
        zero = EstimateTriple(ell=np.zeros((1, 2)), r=np.zeros((1, 2)),
                              rho=np.zeros(1))
        nxt = ogda_step(state, zero)
        assert np.array_equal(nxt.x_hat, state.x_hat)
        assert np.array_equal(nxt.y, state.y)

    def test_uniform_is_fixed_point_of_pennies(self, mp1):
        # Equal stage payoffs shift both coordinates identically, and the
        # projection removes the common shift exactly for a power-of-two eta.
        state = self._mp_state(mp1, eta=1.0 / 64.0)
        triple = exact_estimates(mp1, state.v, state.x, state.y)
        nxt = ogda_step(state, triple)
        assert np.array_equal(nxt.x_hat, state.x_hat)
        assert np.array_equal(nxt.x, state.x)
        assert np.array_equal(nxt.y_hat, state.y_hat)

    def test_interior_step_is_exact_translation(self, mp1):
        # For a (+1, -1) gradient at a power-of-two step size the update stays
        # strictly inside the simplex with the row sum exactly 1, so the
        # projection is the identity and the arithmetic is exact.
        state = self._mp_state(mp1, eta=1.0 / 64.0)
        g = EstimateTriple(ell=np.array([[1.0, -1.0]]), r=np.zeros((1, 2)),
                           rho=np.zeros(1))
        nxt = ogda_step(state, g)
        np.testing.assert_array_equal(nxt.x_hat, [[0.484375, 0.515625]])
        np.testing.assert_array_equal(nxt.x, [[0.46875, 0.53125]])

    def test_descends_loss_and_ascends_reward(self, mp1):
        state = self._mp_state(mp1, eta=0.05)
        g = EstimateTriple(ell=np.array([[1.0, 0.0]]), r=np.array([[0.0, 1.0]]),
                           rho=np.zeros(1))
        nxt = ogda_step(state, g)
        assert nxt.x_hat[0, 0] < state.x_hat[0, 0]     # loss on action 0 pushed down
        assert nxt.y_hat[0, 1] > state.y_hat[0, 1]     # reward on action 1 pushed up

    def test_non_finite_estimates_rejected(self, mp1):
        state = self._mp_state(mp1, eta=0.05)
        bad = EstimateTriple(ell=np.array([[np.nan, 0.0]]), r=np.zeros((1, 2)),
                             rho=np.zeros(1))
        with pytest.raises(ValueError):
            ogda_step(state, bad)

    def test_increments_time_and_preserves_critic(self, mp1):
        state = self._mp_state(mp1, eta=0.05)
        zero = EstimateTriple(ell=np.zeros((1, 2)), r=np.zeros((1, 2)),
                              rho=np.zeros(1))
        nxt = ogda_step(state, zero)
        assert nxt.t == state.t + 1
        assert nxt.v is state.v


class TestInitialState:
    def test_defaults_to_uniform(self, switching_mp):
        state = initial_state(switching_mp, eta=0.01)
        np.testing.assert_array_equal(state.x_hat, np.full((2, 2), 0.5))
        np.testing.assert_array_equal(state.v, np.zeros(2))
        assert state.t == 1

    def test_explicit_initialization(self, mp1):
        state = initial_state(mp1, eta=0.01, init_x=[[0.9, 0.1]], init_y=[[0.2, 0.8]])
        np.testing.assert_array_equal(state.x_hat, [[0.9, 0.1]])
        np.testing.assert_array_equal(state.y, [[0.2, 0.8]])

    def test_rejects_bad_shapes_and_rows(self, mp1):
        with pytest.raises(ValueError):
            initial_state(mp1, eta=0.01, init_x=[[0.5, 0.3, 0.2]])
        with pytest.raises(ValueError):
            initial_state(mp1, eta=0.01, init_x=[[0.7, 0.7]])
        with pytest.raises(ValueError):
            initial_state(mp1, eta=0.01, init_y=[[-0.1, 1.1]])

    def test_policy_property_uses_anchors(self, mp1):
        state = initial_state(mp1, eta=0.01, init_x=[[0.9, 0.1]])
        pol = state.policy
        assert isinstance(pol, JointPolicy)
        np.testing.assert_array_equal(pol.x, state.x_hat)


# ---------------------------------------------------------------------------
# Opponent reduction
# ---------------------------------------------------------------------------

class TestReduceGame:
    def test_pure_opponent_slices_columns(self, switching_mp):
        y = np.array([[1.0, 0.0], [0.0, 1.0]])
        reduced = reduce_game_for_opponent(switching_mp, y)
        assert reduced.n_actions_p2 == 1
        np.testing.assert_array_equal(reduced.loss[0, :, 0], switching_mp.loss[0, :, 0])
        np.testing.assert_array_equal(reduced.loss[1, :, 0], switching_mp.loss[1, :, 1])

    def test_uniform_pennies_flattens_losses(self, mp1):
        reduced = reduce_game_for_opponent(mp1, np.array([[0.5, 0.5]]))
        np.testing.assert_allclose(reduced.loss, 0.5, atol=0)

    def test_transition_rows_still_stochastic(self):
        game = random_game(seed=77, n_states=3, n_actions_p1=2, n_actions_p2=4,
                           gamma=0.9)
        rng = np.random.default_rng(1)
        reduced = reduce_game_for_opponent(game, rng.dirichlet(np.ones(4), size=3))
        np.testing.assert_allclose(reduced.transition.sum(axis=-1), 1.0, atol=1e-12)

    def test_rejects_wrong_shape(self, mp1):
        with pytest.raises(ValueError):
            reduce_game_for_opponent(mp1, np.array([[0.5, 0.3, 0.2]]))


# ---------------------------------------------------------------------------
# Full runs
# ---------------------------------------------------------------------------

class TestRunSelfplay:
    def test_critic_converges_on_const_game(self, const_game):
        result = run_selfplay(const_game, RunConfig(iterations=500, eta=0.05))
        assert result.state.v[0] == pytest.approx(0.7999974578187705, rel=1e-12)

    def test_critic_monotone_on_const_game(self, const_game):
        seen = []
        run_selfplay(const_game, RunConfig(iterations=200, eta=0.05),
                     iteration_hook=lambda t, s: seen.append(s.v[0]))
        arr = np.array(seen)
        assert np.all(np.diff(arr) >= -1e-15)
        assert arr[0] == 0.4          # alpha_1 = 1 replaces V with the stage loss
        assert np.all(arr <= 0.8 + 1e-12)

    def test_row_cadence_divisible(self, mp1):
        result = run_selfplay(mp1, RunConfig(iterations=100, eta=0.05, cadence=10))
        assert [row.t for row in result.rows] == list(range(10, 101, 10))

    def test_row_cadence_non_divisible(self, mp1):
        result = run_selfplay(mp1, RunConfig(iterations=100, eta=0.05, cadence=7))
        assert len(result.rows) == 14
        assert result.rows[-1].t == 98

    def test_cadence_zero_produces_no_rows(self, mp1):
        result = run_selfplay(mp1, RunConfig(iterations=50, eta=0.05, cadence=0))
        assert result.rows == []
        assert result.ground_truth is None

    def test_deterministic_repeat_exact(self, switching_mp):
        cfg = RunConfig(iterations=300, eta=0.05, cadence=50)
        a = run_selfplay(switching_mp, cfg)
        b = run_selfplay(switching_mp, cfg)
        assert np.array_equal(a.state.x_hat, b.state.x_hat)
        assert np.array_equal(a.state.v, b.state.v)
        for ra, rb in zip(a.rows, b.rows):
            # wall_clock is a genuine timing measurement; everything else must match.
            assert replace(ra, wall_clock=None) == replace(rb, wall_clock=None)

    def test_deterministic_with_sampled_estimator(self, mp1):
        cfg = RunConfig(iterations=50, eta=0.05, estimator="sampled",
                        rollout_len=40, seed=3)
        a = run_selfplay(mp1, cfg)
        b = run_selfplay(mp1, cfg)
        assert np.array_equal(a.state.x_hat, b.state.x_hat)
        assert np.array_equal(a.state.v, b.state.v)

    def test_auto_eta_resolves_to_cap(self, mp1):
        result = run_selfplay(mp1, RunConfig(iterations=5, eta="auto"))
        assert result.eta == eta_max(0.9, 1)
        assert result.state.eta == result.eta

    def test_strict_mode_rejects_large_eta(self, mp1):
        with pytest.raises(ValueError):
            run_selfplay(mp1, RunConfig(iterations=5, eta=0.05, strict=True))

    def test_strict_mode_rejects_bad_epsilon(self, mp1):
        cap = eta_max(0.9, 1)
        with pytest.raises(ValueError):
            run_selfplay(mp1, RunConfig(iterations=5, eta=cap, epsilon=11.0,
                                        strict=True))

    def test_strict_mode_accepts_planned_run(self, mp1):
        cap = eta_max(0.9, 1)
        result = run_selfplay(mp1, RunConfig(iterations=5, eta=cap, epsilon=0.5,
                                             strict=True))
        assert result.state.t == 6

    def test_gamma_override(self, mp1):
        result = run_selfplay(mp1, RunConfig(iterations=5, eta=0.05, gamma=0.8))
        assert result.game.gamma == 0.8

    def test_sink_receives_rows_incrementally(self, mp1):
        seen = []
        result = run_selfplay(mp1, RunConfig(iterations=30, eta=0.05, cadence=10),
                              sink=seen.append)
        assert seen == result.rows

    def test_iteration_hook_sees_every_step(self, mp1):
        ts = []
        run_selfplay(mp1, RunConfig(iterations=25, eta=0.05),
                     iteration_hook=lambda t, s: ts.append((t, s.t)))
        assert ts[0] == (1, 2)
        assert ts[-1] == (25, 26)

    def test_learns_to_avoid_dominated_row(self):
        # Action 0 is strictly better for the minimizer regardless of the
        # opponent, so nearly all mass should land on it.
        loss = np.array([[[0.1, 0.1], [0.9, 0.9]]])
        game = MarkovGame(loss=loss, transition=np.ones((1, 2, 2, 1)), gamma=0.9)
        result = run_selfplay(game, RunConfig(iterations=2000, eta=0.05))
        assert result.state.x_hat[0, 0] >= 0.99

    def test_sampled_critic_stays_in_value_range(self, mp1):
        upper = 1.0 / (1.0 - mp1.gamma)
        def check(t, state):
            assert np.all(state.v >= 0.0)
            assert np.all(state.v <= upper + 1e-9)
        run_selfplay(mp1, RunConfig(iterations=60, eta=0.05, estimator="sampled",
                                    rollout_len=30, seed=5),
                     iteration_hook=check)

    def test_critic_drift_bounded_by_schedule(self, mp1):
        # ||Q_t - Q_{t-1}|| <= gamma * alpha_{t-1} / (1 - gamma), with the
        # convention alpha_0 = 1 for the first logged step.
        result = run_selfplay(mp1, RunConfig(iterations=200, eta=0.05, cadence=1))
        gamma = mp1.gamma
        for row in result.rows:
            alpha_prev = 1.0 if row.t < 2 else alpha_schedule(row.t - 1, gamma)
            assert row.q_step_max <= gamma * alpha_prev / (1.0 - gamma) + 1e-12


class TestRunSinglePlayer:
    def test_zero_loss_reduced_game_reaches_zero_gap(self):
        # An opponent column that zeroes out every loss makes any policy optimal.
        loss = np.zeros((1, 2, 2))
        game = MarkovGame(loss=loss, transition=np.ones((1, 2, 2, 1)), gamma=0.9)
        result = run_single_player(game, np.array([[0.5, 0.5]]),
                                   RunConfig(iterations=10, eta=0.05))
        v = evaluate_policy_pair(result.game, JointPolicy(
            x=result.state.x_hat, y=np.ones((1, 1))))
        assert abs(v[0]) <= 1e-12

    def test_exploits_fixed_pennies_opponent(self, mp1):
        # Against a column player fixed on action 0 the learner should settle
        # on row 1 and pay nothing.
        result = run_single_player(mp1, np.array([[1.0, 0.0]]),
                                   RunConfig(iterations=3000, eta=0.05))
        assert result.state.x_hat[0, 1] >= 0.99

    def test_reduced_game_has_single_column(self, mp1):
        result = run_single_player(mp1, np.array([[0.5, 0.5]]),
                                   RunConfig(iterations=5, eta=0.05))
        assert result.game.n_actions_p2 == 1
