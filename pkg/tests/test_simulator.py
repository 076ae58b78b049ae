"""Episode rollouts: target sequencing, learner dynamics, policy arms, summaries."""

import dataclasses

import numpy as np
import pytest

from hapticnudge import bomi, iohmm, policy, simulator
from hapticnudge.iohmm import IohmmModel
from hapticnudge.simulator import (
    CENTER_TARGET,
    ExperimentConfig,
    compare_policies,
    ladder_learner,
    mastery_trial,
    prepare_runtime,
    run_episode,
    sample_target_sequence,
    tune_policy,
)


def sticky_two_state_model(means, stay_logit=2.944):
    """Two latent states with input-independent emissions and symmetric
    sticky switching; uniform initial distribution."""
    d = iohmm.INPUT_DIM
    # ref-zero rows: row 0 favors staying in 0, row 1 disfavors leaving 1
    m = IohmmModel(
        n_states=2,
        init_w=np.zeros((2, d)),
        init_b=np.zeros(2),
        trans_w=np.zeros((2, 2, d)),
        trans_b=np.array([[stay_logit, 0.0], [-stay_logit, 0.0]]),
        emit_V=np.zeros((2, 2, d)),
        emit_c=np.asarray(means, dtype=float),
        emit_cov=np.stack([np.eye(2) * 0.05**2] * 2),
    )
    m.validate()
    return m


def small_config(**overrides):
    kw = dict(learner_model=ladder_learner(3), policy_kind="control",
              blocks=1, trials_per_block=60, seed=0)
    kw.update(overrides)
    return ExperimentConfig(**kw)


class TestTargetSequence:
    def test_no_consecutive_duplicates(self):
        rng = np.random.default_rng(0)
        seq = sample_target_sequence((1, 2, 3, 4), 5000, rng)
        assert np.all(seq[1:] != seq[:-1])
        assert set(np.unique(seq)) <= {1, 2, 3, 4}

    def test_follower_frequencies_uniform_over_others(self):
        rng = np.random.default_rng(1)
        seq = sample_target_sequence((1, 2, 3, 4), 100000, rng)
        for t in (1, 2, 3, 4):
            followers = seq[1:][seq[:-1] == t]
            others = [u for u in (1, 2, 3, 4) if u != t]
            freq = np.array([(followers == u).mean() for u in others])
            assert np.max(np.abs(freq - 1 / 3)) < 0.01

    def test_first_trial_uniform(self):
        firsts = np.array([
            sample_target_sequence((1, 2, 3, 4), 1, np.random.default_rng(s))[0]
            for s in range(20000)])
        freq = np.array([(firsts == t).mean() for t in (1, 2, 3, 4)])
        assert np.max(np.abs(freq - 0.25)) < 0.02

    def test_two_targets_alternate(self):
        rng = np.random.default_rng(2)
        seq = sample_target_sequence((1, 3), 100, rng)
        assert np.all(seq[1:] != seq[:-1])
        assert set(np.unique(seq)) == {1, 3}

    def test_rejects_fewer_than_two_targets(self):
        with pytest.raises(ValueError):
            sample_target_sequence((1,), 10, np.random.default_rng(0))


class TestLadderLearner:
    def test_model_is_valid_and_already_ordered(self):
        m = ladder_learner(5)
        m.validate()
        grid = iohmm.default_ordering_grid()
        assert list(iohmm.order_states(m, grid)) == [0, 1, 2, 3, 4]

    def test_initial_mass_on_worst_state(self):
        m = ladder_learner(4)
        p0 = m.initial_probs(iohmm.encode_input(0.0, 0))
        assert p0[-1] > 0.99

    def test_transition_rows_match_softmax_oracle(self):
        # recompute the middle-state rows from the documented logit layout
        m = ladder_learner(4, helpful_nudge=3, help_gain=3.5,
                           improve_logit=-2.4, regress_logit=-3.5)
        i = 2
        for a, help_on in ((3, True), (0, False), (5, False)):
            logits = np.full(4, -30.0)
            logits[i] = 0.0
            logits[i - 1] = -2.4 + (3.5 if help_on else 0.0)
            logits[i + 1] = -3.5
            expect = np.exp(logits - logits.max())
            expect /= expect.sum()
            row = m.transition_matrix(iohmm.encode_input(0.7, a))[i]
            assert np.max(np.abs(row - expect)) < 1e-12

    def test_helpful_nudge_raises_improvement_probability(self):
        m = ladder_learner(3, helpful_nudge=2)
        x_help = iohmm.encode_input(0.0, 2)
        x_none = iohmm.encode_input(0.0, 0)
        p_help = m.transition_matrix(x_help)[2, 1]
        p_none = m.transition_matrix(x_none)[2, 1]
        assert p_help > 0.6
        assert p_none < 0.15

    def test_slope_does_not_affect_dynamics(self):
        m = ladder_learner(3)
        a = m.transition_matrix(iohmm.encode_input(-1.5, 1))
        b = m.transition_matrix(iohmm.encode_input(2.0, 1))
        assert np.array_equal(a, b)


class TestConfig:
    def test_trial_count_and_planner_default(self):
        cfg = ExperimentConfig(learner_model=ladder_learner(3))
        assert cfg.n_trials == 480
        rt = prepare_runtime(cfg)
        assert rt.planner.model is cfg.learner_model

    def test_validation(self):
        m = ladder_learner(3)
        with pytest.raises(ValueError):
            ExperimentConfig(learner_model=m, policy_kind="bogus")
        with pytest.raises(ValueError):
            ExperimentConfig(learner_model=m, blocks=0)
        with pytest.raises(ValueError):
            ExperimentConfig(learner_model=m, targets=(1,))


class TestRunEpisode:
    def test_record_shapes_and_count(self):
        cfg = small_config(blocks=2, trials_per_block=30)
        res = run_episode(cfg)
        n, N = 60, 3
        assert res.cur_targets.shape == (n,)
        assert res.prev_targets.shape == (n,)
        assert res.nudges.shape == (n,)
        assert res.states.shape == (n,)
        assert res.observations.shape == (n, 2)
        assert res.costs.shape == (n,)
        assert res.beliefs.shape == (n, N)
        assert res.expected_states.shape == (n,)

    def test_control_never_nudges(self):
        res = run_episode(small_config(policy_kind="control"))
        assert np.all(res.nudges == 0)

    def test_random_nudges_cover_fingers(self):
        res = run_episode(small_config(policy_kind="random", blocks=2))
        assert set(np.unique(res.nudges)) == {1, 2, 3, 4, 5}

    def test_heuristic_arm_is_uniform_alias_in_simulation(self):
        a = run_episode(small_config(policy_kind="random"))
        b = run_episode(small_config(policy_kind="heuristic"))
        assert np.array_equal(a.nudges, b.nudges)

    def test_qmdp_first_trial_has_no_nudge(self):
        res = run_episode(small_config(policy_kind="qmdp"))
        assert res.nudges[0] == 0
        assert np.all((res.nudges >= 0) & (res.nudges <= 5))

    def test_target_bookkeeping(self):
        res = run_episode(small_config(seed=3))
        assert res.prev_targets[0] == CENTER_TARGET
        assert np.array_equal(res.prev_targets[1:], res.cur_targets[:-1])
        assert np.all(res.cur_targets[1:] != res.cur_targets[:-1])

    def test_slopes_match_geometry(self):
        res = run_episode(small_config(seed=4))
        center = np.asarray(bomi.WINDOW_CENTER)
        for k in range(len(res.slopes)):
            p = (center if res.prev_targets[k] == CENTER_TARGET
                 else bomi.target_position(int(res.prev_targets[k])))
            q = bomi.target_position(int(res.cur_targets[k]))
            if np.allclose(p, q):
                expect = 0.0   # trial 1 toward the center target
            else:
                expect = bomi.slope_from_positions(p, q)
            assert res.slopes[k] == pytest.approx(expect, abs=1e-12)

    def test_beliefs_are_distributions(self):
        res = run_episode(small_config(policy_kind="qmdp", seed=5))
        sums = res.beliefs.sum(axis=1)
        assert np.max(np.abs(sums - 1.0)) < 1e-9
        assert np.all(res.beliefs >= 0)
        expect = res.beliefs @ np.arange(3)
        assert np.allclose(res.expected_states, expect, atol=1e-12)

    def test_costs_match_learner_emission_means(self):
        cfg = small_config(policy_kind="random", seed=6)
        res = run_episode(cfg)
        m = cfg.learner_model
        for k in range(60):
            x = iohmm.encode_input(float(res.slopes[k]), int(res.nudges[k]))
            mu = m.emission_mean(int(res.states[k]), x)
            assert res.costs[k] == pytest.approx(mu[0] + 2.0 * mu[1], abs=1e-12)

    def test_observations_are_clipped_nonnegative(self):
        m = sticky_two_state_model([[-2.0, 0.0], [2.0, 0.5]])
        cfg = ExperimentConfig(learner_model=m, policy_kind="control",
                               blocks=1, trials_per_block=80, seed=7)
        res = run_episode(cfg)
        assert np.all(res.observations >= 0.0)
        low_trials = res.states == 0
        assert low_trials.sum() > 5
        assert np.all(res.observations[low_trials, 0] == 0.0)

    def test_belief_uses_raw_observations_not_clipped(self):
        # state 0 emits around (-2, 0): only the raw value identifies it,
        # the clipped record (0) would look 40 sigmas away from either mean
        m = sticky_two_state_model([[-2.0, 0.0], [2.0, 0.5]])
        cfg = ExperimentConfig(learner_model=m, policy_kind="control",
                               blocks=1, trials_per_block=120, seed=8)
        res = run_episode(cfg)
        assert len(set(res.states)) == 2
        guesses = res.beliefs.argmax(axis=1)
        acc = float((guesses[5:] == res.states[5:]).mean())
        assert acc > 0.85

    def test_belief_tracks_true_state_with_sharp_emissions(self):
        m = ladder_learner(3, noise_sd=0.02)
        cfg = ExperimentConfig(learner_model=m, policy_kind="qmdp",
                               blocks=2, trials_per_block=60, seed=9)
        res = run_episode(cfg)
        acc = float((res.beliefs.argmax(axis=1) == res.states).mean())
        assert acc > 0.9

    def test_bit_identical_replay(self):
        cfg = small_config(policy_kind="qmdp", seed=10)
        a = run_episode(cfg, episode=2)
        b = run_episode(cfg, episode=2)
        for name in ("cur_targets", "nudges", "states", "observations",
                     "costs", "beliefs", "expected_states", "slopes"):
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_episode_index_changes_draws(self):
        cfg = small_config(policy_kind="random", seed=11)
        a = run_episode(cfg, episode=0)
        b = run_episode(cfg, episode=1)
        assert not np.array_equal(a.cur_targets, b.cur_targets)

    def test_arms_share_target_sequences(self):
        base = small_config(seed=12)
        arms = [dataclasses.replace(base, policy_kind=k)
                for k in ("control", "random", "qmdp")]
        seqs = [run_episode(c, episode=1).cur_targets for c in arms]
        assert np.array_equal(seqs[0], seqs[1])
        assert np.array_equal(seqs[0], seqs[2])

    def test_degenerate_observation_falls_back_to_prediction(self):
        learner = sticky_two_state_model([[500.0, 500.0], [502.0, 502.0]])
        planner = sticky_two_state_model([[0.1, 0.1], [0.3, 0.3]])
        cfg = ExperimentConfig(learner_model=learner, planner_model=planner,
                               policy_kind="control", blocks=1,
                               trials_per_block=20, seed=13)
        res = run_episode(cfg)
        assert len(res.warnings) > 0
        assert np.max(np.abs(res.beliefs.sum(axis=1) - 1.0)) < 1e-9


class TestMasteryTrial:
    def test_constant_below_hits_at_window(self):
        assert mastery_trial(np.full(50, 2.0), threshold=3.0, window=10) == 10

    def test_constant_above_never_hits(self):
        assert mastery_trial(np.full(50, 5.0), threshold=3.0, window=10) is None

    def test_boundary_is_strict(self):
        assert mastery_trial(np.full(50, 3.0), threshold=3.0, window=10) is None

    def test_decreasing_series_matches_scan_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            series = 6.0 - 0.02 * np.arange(300) + rng.normal(0, 0.3, 300)
            got = mastery_trial(series, threshold=3.0, window=10)
            oracle = None
            for k in range(10, 301):
                if np.mean(series[k - 10:k]) < 3.0:
                    oracle = k
                    break
            assert got == oracle


class TestComparePolicies:
    def test_summary_shapes_and_shared_targets(self):
        cfg = small_config(seed=20, blocks=1, trials_per_block=40)
        out = compare_policies(cfg, ("control", "qmdp"), n_episodes=3)
        assert set(out) == {"control", "qmdp"}
        for arm in out.values():
            assert arm.re_mean.shape == (40,)
            assert arm.sot_mean.shape == (40,)
            assert arm.expected_state_mean.shape == (40,)
            assert arm.cumulative_costs.shape == (3,)
            assert len(arm.episodes) == 3
        for e in range(3):
            assert np.array_equal(out["control"].episodes[e].cur_targets,
                                  out["qmdp"].episodes[e].cur_targets)

    def test_identical_arms_identical_summaries(self):
        cfg = small_config(seed=21, trials_per_block=30)
        a = compare_policies(cfg, ("control",), n_episodes=2)["control"]
        b = compare_policies(cfg, ("control",), n_episodes=2)["control"]
        assert np.array_equal(a.re_mean, b.re_mean)
        assert np.array_equal(a.cumulative_costs, b.cumulative_costs)
        assert a.mean_cumulative_cost == b.mean_cumulative_cost

    def test_dominant_nudge_benchmark_orders_arms(self):
        cfg = ExperimentConfig(learner_model=ladder_learner(3),
                               policy_kind="control", blocks=2,
                               trials_per_block=60, seed=22)
        out = compare_policies(cfg, ("control", "random", "qmdp"),
                               n_episodes=8, thresholds=(0.5,))
        assert (out["qmdp"].mean_cumulative_cost
                < out["random"].mean_cumulative_cost
                < out["control"].mean_cumulative_cost)
        # the helpful arm also reaches the RE threshold sooner on average
        def mean_hit(arm):
            hits = arm.trials_to_threshold[0.5]
            return np.nanmean(np.where(np.isnan(hits), 121.0, hits))
        assert mean_hit(out["qmdp"]) < mean_hit(out["control"])

    def test_mastery_earlier_under_qmdp(self):
        cfg = ExperimentConfig(learner_model=ladder_learner(7),
                               policy_kind="control", blocks=2,
                               trials_per_block=60, seed=23)
        out = compare_policies(cfg, ("control", "qmdp"), n_episodes=4,
                               mastery_threshold=3.0)
        q = out["qmdp"].mastery_trials
        c = out["control"].mastery_trials
        assert np.all(np.isfinite(q))
        q_med = np.median(q)
        c_med = np.median(np.where(np.isnan(c), 121.0, c))
        assert q_med < c_med

    def test_ci_zero_with_single_episode(self):
        cfg = small_config(seed=24, trials_per_block=20)
        arm = compare_policies(cfg, ("control",), n_episodes=1)["control"]
        assert np.all(arm.re_halfwidth == 0.0)


class TestTunePolicy:
    def test_grid_covers_combinations_and_picks_minimum(self):
        cfg = ExperimentConfig(learner_model=ladder_learner(3),
                               policy_kind="qmdp", blocks=1,
                               trials_per_block=30, seed=30)
        res = tune_policy(cfg, alphas=(0.1, 0.5), gammas=(0.9, 0.98),
                          n_episodes=2)
        assert len(res.table) == 4
        costs = {(row.alpha, row.gamma): row.mean_cost for row in res.table}
        assert set(costs) == {(0.1, 0.9), (0.1, 0.98), (0.5, 0.9), (0.5, 0.98)}
        best = min(res.table, key=lambda r: r.mean_cost)
        assert (res.alpha, res.gamma) == (best.alpha, best.gamma)
        assert res.mean_cost == best.mean_cost

    def test_deterministic(self):
        cfg = ExperimentConfig(learner_model=ladder_learner(3),
                               policy_kind="qmdp", blocks=1,
                               trials_per_block=20, seed=31)
        a = tune_policy(cfg, alphas=(0.2,), gammas=(0.95,), n_episodes=2)
        b = tune_policy(cfg, alphas=(0.2,), gammas=(0.95,), n_episodes=2)
        assert a.mean_cost == b.mean_cost
