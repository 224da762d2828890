"""Sampling rules, stopping rule, decision rule, and whole-run equivalence.

The last test class replays complete runs step by step through the public
per-step operations and checks that the compiled trial runner reaches the
same stopping time and recommendation.
"""

import math

import numpy as np
import pytest

from threshband import (
    Algorithm,
    BanditInstance,
    BetaKind,
    GaussianEnv,
    RunState,
    Setting,
    StoppingConfig,
    TrialConfig,
    apt_sample,
    bc_sample,
    beta_threshold,
    dt_sample,
    forced_exploration_set,
    glr_statistic,
    racing_eliminate,
    racing_step,
    recommend,
    run_for,
    run_trial,
    should_stop,
    solve_complexity,
    tracking_weights,
)
from threshband.policies import TrialOutcome

PROBLEM1 = np.array([0.5, 1.1, 1.2, 1.3, 1.4, 5.0])
PROBLEM2 = np.array([1.0, 2.0, 2.5])


def state_of(counts, sums=None):
    counts = np.asarray(counts, dtype=np.int64)
    if sums is None:
        sums = np.zeros(len(counts))
    s = RunState.fresh(len(counts))
    s.counts = counts.copy()
    s.sums = np.asarray(sums, dtype=float).copy()
    s.t = int(counts.sum())
    return s


class TestForcedExploration:
    def test_small_t_is_empty(self):
        s = state_of([1, 0, 0, 0])
        assert forced_exploration_set(s, 4) == set()

    def test_undersampled_arm_detected(self):
        s = state_of([1, 5, 5, 5])
        assert s.t == 16
        assert forced_exploration_set(s, 4) == {0}

    def test_t_zero_is_empty(self):
        s = state_of([0, 0, 0, 0])
        assert forced_exploration_set(s, 4) == set()


class TestDtSample:
    def test_initial_tie_breaks_to_first_arm(self):
        s = state_of([0, 0, 0])
        assert dt_sample(s, np.full(3, 1 / 3)) == 0

    def test_forced_exploration_wins(self):
        s = state_of([40, 40, 40, 1])
        assert forced_exploration_set(s, 4) == {3}
        assert dt_sample(s, np.array([0.9, 0.05, 0.04, 0.01])) == 3

    def test_count_deficit_argmax(self):
        s = state_of([30, 40, 30])
        assert dt_sample(s, np.array([0.2, 0.5, 0.3])) == 1


class TestGlrAndBeta:
    def test_two_arm_anchor(self):
        s = state_of([10, 10], sums=[20.0, 40.0])
        cfg = StoppingConfig(delta=0.1, setting=Setting.NONMONOTONIC)
        assert glr_statistic(s, 2.5, cfg) == pytest.approx(2.5)

    def test_tied_empirical_optimum_is_zero(self):
        s = state_of([10, 10], sums=[10.0, 30.0])
        cfg = StoppingConfig(delta=0.1, setting=Setting.NONMONOTONIC)
        assert glr_statistic(s, 2.0, cfg) == 0.0

    def test_scaling_monotone(self):
        cfg = StoppingConfig(delta=0.1, setting=Setting.NONMONOTONIC)
        s1 = state_of([10, 10], sums=[20.0, 40.0])
        s2 = state_of([30, 30], sums=[60.0, 120.0])
        assert glr_statistic(s2, 2.5, cfg) >= glr_statistic(s1, 2.5, cfg)

    def test_zero_count_rejected(self):
        s = state_of([10, 0], sums=[20.0, 0.0])
        cfg = StoppingConfig(delta=0.1)
        with pytest.raises(ValueError):
            glr_statistic(s, 2.5, cfg)

    def test_practical_beta_anchor(self):
        cfg = StoppingConfig(delta=0.1, beta_kind=BetaKind.PRACTICAL)
        assert beta_threshold(1, cfg, 2) == pytest.approx(math.log(10.0))

    def test_theoretical_constant_scale(self):
        from threshband._kernels import theoretical_constant

        assert theoretical_constant(2) == pytest.approx(1.23e9, rel=0.01)

    def test_beta_monotonicity(self):
        cfg1 = StoppingConfig(delta=0.1)
        cfg2 = StoppingConfig(delta=0.05)
        values = [beta_threshold(t, cfg1, 3) for t in (1, 10, 100, 1000)]
        assert values == sorted(values)
        assert beta_threshold(100, cfg2, 3) > beta_threshold(100, cfg1, 3)

    def test_beta_requires_positive_t(self):
        with pytest.raises(ValueError):
            beta_threshold(0, StoppingConfig(delta=0.1), 3)


class TestStopAndRecommend:
    def test_stop_is_threshold_comparison(self):
        cfg = StoppingConfig(delta=0.1, setting=Setting.NONMONOTONIC)
        s = state_of([10, 10], sums=[20.0, 40.0])
        expected = glr_statistic(s, 2.5, cfg) > beta_threshold(s.t, cfg, 2)
        assert should_stop(s, 2.5, cfg) == expected

    def test_tied_never_stops(self):
        cfg = StoppingConfig(delta=0.1, setting=Setting.NONMONOTONIC)
        s = state_of([50, 50], sums=[50.0, 150.0])
        assert not should_stop(s, 2.0, cfg)

    def test_recommend_closest(self):
        s = state_of([10, 10], sums=[9.0, 13.0])
        assert recommend(s, 1.0, Setting.NONMONOTONIC) == 0

    def test_recommend_below_restricts(self):
        s = state_of([10, 10], sums=[9.0, 10.5])
        # empirical means 0.9 and 1.05; only 0.9 is under the threshold
        assert recommend(s, 1.0, Setting.BELOW_THRESHOLD) == 0

    def test_recommend_below_transient_uses_smallest_mean(self):
        s = state_of([10, 10], sums=[15.0, 20.0])
        assert recommend(s, 1.0, Setting.BELOW_THRESHOLD) == 0


class TestBcSample:
    def test_forced_exploration_matches_dt(self):
        s = state_of([40, 40, 40, 1], sums=[40.0, 80.0, 100.0, 1.0])
        assert bc_sample(s, 1.55, Setting.NONMONOTONIC) == dt_sample(
            s, np.full(4, 0.25)
        )

    def test_pulls_less_sampled_of_best_and_challenger(self):
        # empirical best arm 1 heavily sampled; challenger should be drawn
        s = state_of([4, 100, 100], sums=[4.0, 200.0, 250.0])
        arm = bc_sample(s, 1.55, Setting.NONMONOTONIC)
        assert arm == 0

    def test_tie_goes_to_best(self):
        s = state_of([100, 100, 100], sums=[100.0, 200.0, 250.0])
        arm = bc_sample(s, 1.55, Setting.NONMONOTONIC)
        assert arm == 1


class TestRacing:
    def test_round_pulls_every_active_arm(self):
        s = state_of([5, 5, 5])
        assert racing_step(s) == [0, 1, 2]
        s.active[1] = False
        assert racing_step(s) == [0, 2]

    def test_eliminates_clearly_worst_arm(self):
        cfg = StoppingConfig(delta=0.1, setting=Setting.NONMONOTONIC)
        counts = [200, 200, 200]
        sums = [200 * 1.0, 200 * 2.0, 200 * 2.5]
        s = state_of(counts, sums)
        racing_eliminate(s, 1.55, cfg)
        assert bool(s.active[1])  # empirical best always survives
        assert not bool(s.active[2])  # farthest arm eliminated

    def test_never_empties_the_race(self):
        cfg = StoppingConfig(delta=0.1, setting=Setting.NONMONOTONIC)
        s = state_of([500, 500], sums=[500 * 1.0, 500 * 3.0])
        racing_eliminate(s, 1.2, cfg)
        assert s.active.sum() >= 1


class TestAptSample:
    def test_distance_ordering(self):
        s = state_of([10, 10], sums=[11.0, 15.0])
        assert apt_sample(s, 1.0, 0.0) == 0

    def test_large_epsilon_prefers_least_pulled(self):
        s = state_of([9, 4], sums=[9.0, 8.0])
        assert apt_sample(s, 1.0, 1e9) == 1

    def test_epsilon_breaks_toward_fewer_pulls(self):
        s = state_of([4, 1], sums=[4 * 1.1, 1.1])
        assert apt_sample(s, 1.0, 0.01) == 1

    def test_negative_epsilon_rejected(self):
        s = state_of([1, 1], sums=[1.0, 2.0])
        with pytest.raises(ValueError):
            apt_sample(s, 1.0, -0.1)


def python_reference_run(env, replication, algorithm, config, max_steps=200_000):
    """Replay one run through the public per-step operations only."""
    instance = env.instance
    n = instance.n_arms
    setting = instance.setting
    s = instance.threshold
    cfg = StoppingConfig(
        delta=config.delta, beta_kind=config.beta_kind, setting=setting
    )
    state = RunState.fresh(n)
    w = np.full(n, 1.0 / n)
    noise = env.standard_normals(replication, max_steps)

    if algorithm is Algorithm.RACING:
        while True:
            for arm in racing_step(state):
                state.record(arm, instance.mu[arm] + noise[state.t])
            if state.t >= n:
                racing_eliminate(state, s, cfg)
                alive = racing_step(state)
                if len(alive) == 1:
                    return TrialOutcome(
                        tau=state.t, recommended=alive[0], correct=True
                    )

    while True:
        if state.t < n:
            arm = state.t
        elif algorithm is Algorithm.DT:
            arm = dt_sample(state, w)
        elif algorithm is Algorithm.BC:
            arm = bc_sample(state, s, setting)
        else:
            arm = apt_sample(state, s, config.apt_epsilon)
        state.record(arm, instance.mu[arm] + noise[state.t])
        if state.t < n:
            continue
        if algorithm is Algorithm.DT:
            w = tracking_weights(
                state.mu_hat(), s, setting, w, config.inner_iters
            )
        if should_stop(state, s, cfg):
            return TrialOutcome(
                tau=state.t,
                recommended=recommend(state, s, setting),
                correct=True,
            )


class TestRunEquivalence:
    @pytest.mark.parametrize(
        "algorithm,epsilon",
        [
            (Algorithm.DT, 0.0),
            (Algorithm.BC, 0.0),
            (Algorithm.RACING, 0.0),
            (Algorithm.APT, 0.01),
        ],
    )
    def test_compiled_runner_matches_ops(self, algorithm, epsilon):
        instance = BanditInstance(PROBLEM1, 1.0, Setting.INCREASING)
        env = GaussianEnv(instance, 42)
        config = TrialConfig(delta=0.2, apt_epsilon=epsilon)
        for replication in range(3):
            fast = run_trial(env, replication, algorithm, config)
            slow = python_reference_run(env, replication, algorithm, config)
            assert fast.tau == slow.tau
            assert fast.recommended == slow.recommended

    def test_below_threshold_runs(self):
        instance = BanditInstance(PROBLEM2, 1.55, Setting.BELOW_THRESHOLD)
        env = GaussianEnv(instance, 3)
        config = TrialConfig(delta=0.1)
        for replication in range(3):
            fast = run_trial(env, replication, Algorithm.DT, config)
            slow = python_reference_run(env, replication, Algorithm.DT, config)
            assert fast.tau == slow.tau
            assert fast.recommended == slow.recommended
            assert fast.correct == (fast.recommended == 0)


class TestRunBehaviour:
    def test_runs_are_deterministic(self):
        instance = BanditInstance(PROBLEM2, 1.55, Setting.INCREASING)
        env = GaussianEnv(instance, 11)
        config = TrialConfig(delta=0.1)
        a = run_trial(env, 4, Algorithm.DT, config)
        b = run_trial(env, 4, Algorithm.DT, config)
        assert a == b

    def test_tau_has_initialization_floor(self):
        instance = BanditInstance(PROBLEM2, 1.55, Setting.INCREASING)
        env = GaussianEnv(instance, 11)
        out = run_trial(env, 0, Algorithm.DT, TrialConfig(delta=0.1))
        assert out.tau >= instance.n_arms

    def test_proportion_convergence(self):
        instance = BanditInstance(PROBLEM2, 1.55, Setting.INCREASING)
        env = GaussianEnv(instance, 5)
        state = run_for(env, 0, Algorithm.DT, TrialConfig(delta=0.1), 50_000)
        assert state.t == 50_000
        target = solve_complexity(instance).weights
        props = state.counts / state.t
        assert np.max(np.abs(props - target)) <= 0.05

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrialConfig(delta=0.0)
        with pytest.raises(ValueError):
            TrialConfig(delta=0.1, apt_epsilon=-1.0)
        with pytest.raises(ValueError):
            TrialConfig(delta=0.1, recompute_every=0)
