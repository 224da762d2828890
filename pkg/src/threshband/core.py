"""Domain types: bandit instances, the Gaussian environment, seeded streams.

Arms are 0-indexed throughout the package.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _kernels


class Setting(enum.Enum):
    """Structural assumption on the arm means."""

    NONMONOTONIC = "NonMonotonic"
    INCREASING = "Increasing"
    BELOW_THRESHOLD = "BelowThreshold"

    @property
    def code(self) -> int:
        return _SETTING_CODES[self]

    @classmethod
    def parse(cls, name: str) -> "Setting":
        for s in cls:
            if s.value == name or s.name == name:
                return s
        raise ValueError(f"unknown setting {name!r}")


_SETTING_CODES = {
    Setting.NONMONOTONIC: _kernels.SETTING_NONMONOTONIC,
    Setting.INCREASING: _kernels.SETTING_INCREASING,
    Setting.BELOW_THRESHOLD: _kernels.SETTING_BELOW,
}


@dataclass(frozen=True)
class BanditInstance:
    """A unit-variance Gaussian bandit with a threshold on the means."""

    mu: np.ndarray
    threshold: float
    setting: Setting

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if mu.ndim != 1 or mu.shape[0] < 2:
            raise ValueError("need at least two arms")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "threshold", float(self.threshold))
        if self.setting in (Setting.INCREASING, Setting.BELOW_THRESHOLD):
            if not np.all(np.diff(mu) > 0):
                raise ValueError(f"{self.setting.value} requires strictly increasing means")
        if self.setting is Setting.BELOW_THRESHOLD and not np.any(mu <= self.threshold):
            raise ValueError("below-threshold setting needs at least one arm under the threshold")

    @property
    def n_arms(self) -> int:
        return int(self.mu.shape[0])


@dataclass(frozen=True)
class OptimalArm:
    """Smallest-index threshold-closest arm and the argmin cardinality."""

    index: int
    tie_count: int


def optimal_arm_of_means(mu: np.ndarray, threshold: float, setting: Setting):
    """(index, tie_count) for an arbitrary mean vector; index -1 if undefined."""
    return _kernels.argmin_distance(np.asarray(mu, dtype=float), threshold, setting.code)


def optimal_arm(instance: BanditInstance) -> OptimalArm:
    """The arm whose mean is closest to the threshold (restricted to means
    under the threshold in the below-threshold setting), smallest index on ties."""
    idx, ties = optimal_arm_of_means(instance.mu, instance.threshold, instance.setting)
    if idx < 0:
        raise ValueError("no arm below the threshold")
    return OptimalArm(index=int(idx), tie_count=int(ties))


@dataclass(frozen=True)
class Weights:
    """A point on the probability simplex (or raw counts when normalized=False)."""

    w: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if self.normalized and abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("simplex weights must sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class GaussianEnv:
    """Deterministic unit-variance Gaussian reward streams.

    The innovation at (replication, step) is a pure function of
    (master_seed, replication, step): replication streams are independent
    PCG64 generators keyed by (master_seed, replication) and consumed
    sequentially in step order. All arms share the step innovation, so a
    draw from arm a at step s is mu[a] + z[replication, s].
    """

    instance: BanditInstance
    master_seed: int = 0

    def standard_normals(self, replication: int, n: int) -> np.ndarray:
        """First n innovations of a replication's stream."""
        rng = np.random.Generator(np.random.PCG64(self.seed_sequence(replication)))
        return rng.standard_normal(n)

    def seed_sequence(self, replication: int) -> np.random.SeedSequence:
        return np.random.SeedSequence((self.master_seed, replication))

    def replication_seed(self, replication: int) -> int:
        """A recordable 64-bit seed identifying the replication stream."""
        state = self.seed_sequence(replication).generate_state(2, dtype=np.uint64)
        return int(state[0])

    def draw(self, replication: int, step: int, arm: int) -> float:
        """The reward arm would yield at a given step of a replication."""
        if not 0 <= arm < self.instance.n_arms:
            raise IndexError(f"arm {arm} out of range")
        z = self.standard_normals(replication, step + 1)[step]
        return float(self.instance.mu[arm] + z)
