"""Thresholding-bandit identification: exact sample complexity, optimal
sampling weights, order-restricted projections, sequential algorithms with a
likelihood-ratio stopping rule, and a reproducible Monte-Carlo harness."""

from .complexity import (
    ComplexitySolution,
    Projection,
    below_threshold_closed_form,
    characteristic_time_bounds,
    lower_bound_samples,
    project_alternative_increasing,
    solve_complexity,
    three_point_characteristic_time,
    two_arm_closed_form,
)
from .core import (
    BanditInstance,
    GaussianEnv,
    OptimalArm,
    Setting,
    Weights,
    optimal_arm,
    optimal_arm_of_means,
)
from .harness import (
    AlgorithmSpec,
    ConfigError,
    ExperimentConfig,
    ExperimentResult,
    Summary,
    TrialRecord,
    complexity_report,
    curve_sweep,
    parse_config,
    run_experiment,
)
from .isotonic import (
    OrderedFit,
    isotonic_bounded_split,
    isotonic_decreasing,
    isotonic_increasing,
    unimodal_bounded,
    unimodal_fixed_mode,
)
from .policies import (
    Algorithm,
    BetaKind,
    RunState,
    StoppingConfig,
    TrialConfig,
    TrialOutcome,
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
    tracking_weights,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
