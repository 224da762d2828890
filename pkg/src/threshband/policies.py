"""Sequential identification policies with a likelihood-ratio stopping rule.

Four sampling rules — Direct-Tracking, Best Challenger, Racing, APT — share
the same stopping statistic (the alternative-set transportation infimum
evaluated at the raw counts) and the same decision rule (empirical
threshold-closest arm). Two stopping thresholds are provided: a practical
one, log((log t + 1)/delta), and a conservative theoretical one.

The step-by-step operations here are the reference implementations; whole
runs are executed by a compiled kernel (`run_trial`) that is exercised
against these operations in the test suite.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import BanditInstance, GaussianEnv, Setting, optimal_arm


class BetaKind(enum.Enum):
    """Which stopping threshold beta(t, delta) to use."""

    PRACTICAL = "Practical"
    THEORETICAL = "Theoretical"

    @property
    def code(self) -> int:
        return {
            BetaKind.PRACTICAL: _kernels.BETA_PRACTICAL,
            BetaKind.THEORETICAL: _kernels.BETA_THEORETICAL,
        }[self]

    @classmethod
    def parse(cls, name: str) -> "BetaKind":
        for k in cls:
            if k.value == name or k.name == name:
                return k
        raise ValueError(f"unknown beta kind {name!r}")


class Algorithm(enum.Enum):
    """Sampling rules available to the runner."""

    DT = "DT"
    BC = "BC"
    RACING = "Racing"
    APT = "APT"

    @property
    def code(self) -> int:
        return {
            Algorithm.DT: _kernels.ALGO_DT,
            Algorithm.BC: _kernels.ALGO_BC,
            Algorithm.RACING: _kernels.ALGO_RACING,
            Algorithm.APT: _kernels.ALGO_APT,
        }[self]

    @classmethod
    def parse(cls, name: str) -> "Algorithm":
        for a in cls:
            if a.value == name or a.name == name:
                return a
        raise ValueError(f"unknown algorithm {name!r}")


@dataclass
class RunState:
    """Mutable per-run statistics: pull counts, reward sums, total pulls.

    `active` and `racing_pos` belong to Racing's round-robin bookkeeping and
    are ignored by the other rules.
    """

    counts: np.ndarray
    sums: np.ndarray
    t: int = 0
    active: np.ndarray = None  # type: ignore[assignment]
    racing_pos: int = 0

    def __post_init__(self):
        if self.active is None:
            self.active = np.ones(self.counts.shape[0], dtype=np.bool_)

    @classmethod
    def fresh(cls, n_arms: int) -> "RunState":
        return cls(counts=np.zeros(n_arms, dtype=np.int64), sums=np.zeros(n_arms))

    @property
    def n_arms(self) -> int:
        return int(self.counts.shape[0])

    def mu_hat(self) -> np.ndarray:
        """Empirical means; requires every arm pulled at least once."""
        if np.any(self.counts == 0):
            raise ValueError("empirical means undefined before every arm is pulled")
        return self.sums / self.counts

    def record(self, arm: int, reward: float) -> None:
        self.counts[arm] += 1
        self.sums[arm] += reward
        self.t += 1


@dataclass(frozen=True)
class StoppingConfig:
    """Risk level, threshold flavour, and structural setting of the stop rule."""

    delta: float
    beta_kind: BetaKind = BetaKind.PRACTICAL
    setting: Setting = Setting.NONMONOTONIC

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")


def forced_exploration_set(state: RunState, n_arms: int) -> set:
    """Arms sampled abnormally rarely: counts below (sqrt(t) - K/2)+."""
    h = math.sqrt(state.t) - 0.5 * n_arms
    if h <= 0.0:
        return set()
    return {a for a in range(n_arms) if state.counts[a] < h}


def tracking_weights(
    mu_hat: np.ndarray,
    threshold: float,
    setting: Setting,
    w_prev: np.ndarray | None = None,
    inner_iters: int = 8,
) -> np.ndarray:
    """Optimal-weight estimate at the empirical means for Direct-Tracking.

    Warm-started from the previous step's weights; tied empirical optimal
    arms yield the uniform-over-argmin convention.
    """
    mu_hat = np.asarray(mu_hat, dtype=float)
    if w_prev is None:
        w_prev = np.full(mu_hat.shape[0], 1.0 / mu_hat.shape[0])
    return _kernels.track_weights(
        mu_hat, float(threshold), setting.code, np.asarray(w_prev, dtype=float), inner_iters
    )


def dt_sample(state: RunState, weights: np.ndarray) -> int:
    """Direct-Tracking arm: forced exploration first, else the count deficit
    argmax_a t*w_a - N_a, smallest index on ties."""
    n = state.n_arms
    forced = forced_exploration_set(state, n)
    if forced:
        return min(forced, key=lambda a: (state.counts[a], a))
    deficit = state.t * np.asarray(weights, dtype=float) - state.counts
    return int(np.argmax(deficit))


def glr_statistic(state: RunState, threshold: float, config: StoppingConfig) -> float:
    """Stopping statistic: the alternative-set infimum of the count-weighted
    half squared deviation from the empirical means; 0 on ties."""
    mu_hat = state.mu_hat()
    return float(
        _kernels.glr(mu_hat, float(threshold), state.counts.astype(float), config.setting.code)
    )


def beta_threshold(t: int, config: StoppingConfig, n_arms: int) -> float:
    """Stopping threshold beta(t, delta) for the configured flavour."""
    if t < 1:
        raise ValueError("t must be at least 1")
    c = _kernels.theoretical_constant(n_arms) if config.beta_kind is BetaKind.THEORETICAL else 0.0
    return float(
        _kernels.beta_threshold_value(t, config.delta, n_arms, config.beta_kind.code, c)
    )


def should_stop(state: RunState, threshold: float, config: StoppingConfig) -> bool:
    """Stop as soon as the statistic clears the threshold."""
    return glr_statistic(state, threshold, config) > beta_threshold(
        state.t, config, state.n_arms
    )


def recommend(state: RunState, threshold: float, setting: Setting) -> int:
    """Decision rule: smallest-index empirical threshold-closest arm (below
    threshold: restricted to empirical means <= S, else the smallest mean)."""
    return int(_kernels.recommend_arm(state.mu_hat(), float(threshold), setting.code))


def bc_sample(state: RunState, threshold: float, setting: Setting) -> int:
    """Best-Challenger arm: forced exploration first; otherwise the less
    sampled of the empirical best and its cheapest challenger (tie: best)."""
    n = state.n_arms
    forced = forced_exploration_set(state, n)
    if forced:
        return min(forced, key=lambda a: (state.counts[a], a))
    mu_hat = state.mu_hat()
    astar, _ = _kernels.argmin_distance(mu_hat, float(threshold), setting.code)
    if astar < 0:
        astar = _kernels.recommend_arm(mu_hat, float(threshold), setting.code)
    _, costs, _ = _kernels.F_value(
        mu_hat, float(threshold), state.counts.astype(float), setting.code, astar
    )
    challengers = [b for b in range(n) if b != astar]
    bhat = min(challengers, key=lambda b: (costs[b], b))
    return int(astar if state.counts[astar] <= state.counts[bhat] else bhat)


def racing_step(state: RunState) -> list:
    """Arms Racing pulls in the upcoming round: every active arm, in order."""
    return [a for a in range(state.n_arms) if state.active[a]]


def racing_eliminate(state: RunState, threshold: float, config: StoppingConfig) -> None:
    """End-of-round elimination: drop active arms whose restricted
    alternative cost exceeds beta(t, delta), always retaining the
    cheapest-cost arm so the race cannot empty itself."""
    mu_hat = state.mu_hat()
    cf = state.counts.astype(float)
    beta = beta_threshold(state.t, config, state.n_arms)
    arms = racing_step(state)
    costs = {
        b: float(_kernels.restricted_cost(mu_hat, float(threshold), cf, config.setting.code, b))
        for b in arms
    }
    keep = min(arms, key=lambda b: (costs[b], b))
    for b in arms:
        if b != keep and costs[b] > beta:
            state.active[b] = False


def apt_sample(state: RunState, threshold: float, epsilon: float) -> int:
    """APT arm: argmin_a sqrt(N_a) * (|mu_hat_a - S| + epsilon)."""
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    mu_hat = state.mu_hat()
    index = np.sqrt(state.counts.astype(float)) * (
        np.abs(mu_hat - float(threshold)) + float(epsilon)
    )
    return int(np.argmin(index))


@dataclass(frozen=True)
class TrialConfig:
    """Per-run parameters shared by all sampling rules."""

    delta: float
    beta_kind: BetaKind = BetaKind.PRACTICAL
    apt_epsilon: float = 0.0
    inner_iters: int = 8
    recompute_every: int = 1
    max_steps: int = 5_000_000
    initial_block: int = 8192

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.apt_epsilon < 0.0:
            raise ValueError("apt_epsilon must be nonnegative")
        if self.recompute_every < 1 or self.inner_iters < 1:
            raise ValueError("inner_iters and recompute_every must be positive")


@dataclass(frozen=True)
class TrialOutcome:
    """One completed identification run."""

    tau: int
    recommended: int
    correct: bool


def _advance(env: GaussianEnv, replication: int, algorithm: Algorithm,
             config: TrialConfig, max_steps: int, stop_enabled: bool = True):
    """Drive the compiled run kernel, growing the noise stream on demand."""
    inst = env.instance
    n = inst.n_arms
    counts = np.zeros(n, dtype=np.int64)
    sums = np.zeros(n)
    w = np.full(n, 1.0 / n)
    active = np.ones(n, dtype=np.bool_)
    t = 0
    racing_pos = 0
    c_theo = _kernels.theoretical_constant(n)
    rng = np.random.Generator(np.random.PCG64(env.seed_sequence(replication)))
    noise = rng.standard_normal(min(config.initial_block, max_steps))
    while True:
        status, t, racing_pos, rec = _kernels.run_trial_chunk(
            inst.mu,
            inst.threshold,
            inst.setting.code,
            algorithm.code,
            config.delta,
            config.beta_kind.code,
            c_theo,
            config.apt_epsilon,
            config.inner_iters,
            config.recompute_every,
            1 if stop_enabled else 0,
            noise,
            counts,
            sums,
            t,
            w,
            active,
            racing_pos,
            max_steps,
        )
        if status != 0:
            state = RunState(counts=counts, sums=sums, t=int(t), active=active,
                             racing_pos=int(racing_pos))
            return status, state, int(rec)
        grow = min(noise.shape[0], max_steps - noise.shape[0])
        noise = np.concatenate([noise, rng.standard_normal(max(grow, 1))])


def run_trial(
    env: GaussianEnv, replication: int, algorithm: Algorithm, config: TrialConfig
) -> TrialOutcome:
    """Run one seeded replication until the stopping rule fires.

    The run is a pure function of (instance, master_seed, replication,
    algorithm, config): the reward noise is a per-replication stream shared
    across arms, consumed one innovation per pull.
    """
    status, state, rec = _advance(env, replication, algorithm, config, config.max_steps)
    if status == 2:
        raise RuntimeError(f"run exceeded {config.max_steps} steps without stopping")
    target = optimal_arm(env.instance).index
    return TrialOutcome(tau=state.t, recommended=rec, correct=rec == target)


def run_for(
    env: GaussianEnv, replication: int, algorithm: Algorithm, config: TrialConfig,
    horizon: int,
) -> RunState:
    """Run for exactly `horizon` pulls with the stopping rule disabled and
    return the final statistics. Used to study sampling proportions at a
    fixed budget."""
    _, state, _ = _advance(env, replication, algorithm, config, horizon, stop_enabled=False)
    return state
