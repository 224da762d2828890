"""Experiment harness: JSON configs, seeded Monte-Carlo runs, CSV/JSON output.

The CLI front end (`threshband`) exposes complexity reports, optimal-weight
queries, Monte-Carlo experiment runs, threshold sweeps, and the built-in
benchmark table. Experiment outputs are a pure function of the configuration
(including the master seed) and do not depend on the parallelism degree.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from .complexity import (
    characteristic_time_bounds,
    lower_bound_samples,
    solve_complexity,
)
from .core import BanditInstance, GaussianEnv, Setting, optimal_arm
from .policies import Algorithm, BetaKind, TrialConfig, run_trial

PARALLELISM_ENV_VAR = "THRESHBAND_PARALLELISM"

SUMMARY_HEADER = (
    "algorithm,setting,problem_id,delta,replications,"
    "mean_tau,stderr_tau,error_rate,master_seed"
)
RAW_HEADER = "algorithm,replication,tau,recommended,correct,seed"


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configurations."""


@dataclass(frozen=True)
class AlgorithmSpec:
    """One algorithm entry of a configuration (APT carries its epsilon)."""

    algorithm: Algorithm
    epsilon: float = 0.0

    @property
    def tag(self) -> str:
        return self.algorithm.value


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully specified Monte-Carlo experiment."""

    instance: BanditInstance
    algorithms: tuple
    delta: float
    beta_kind: BetaKind = BetaKind.PRACTICAL
    replications: int = 1
    master_seed: int = 0
    parallelism: int = 1
    problem_id: str = ""

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ConfigError("delta must lie in (0, 1)")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be at least 1")


@dataclass(frozen=True)
class TrialRecord:
    """One completed replication."""

    algorithm: str
    replication: int
    tau: int
    recommended: int
    correct: bool
    seed: int


@dataclass(frozen=True)
class Summary:
    """Aggregate over the replications of one algorithm."""

    mean_tau: float
    stderr_tau: float
    error_rate: float
    replications: int


@dataclass(frozen=True)
class AlgorithmResult:
    spec: AlgorithmSpec
    records: tuple
    summary: Summary


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    results: tuple


# ---------------------------------------------------------------------------
# configuration parsing (strict: unknown keys rejected at every level)
# ---------------------------------------------------------------------------


def _reject_unknown(obj: dict, allowed, where: str) -> None:
    extra = set(obj) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(extra))}")


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"missing key {key!r} in {where}")
    return obj[key]


def parse_instance(obj) -> BanditInstance:
    if not isinstance(obj, dict):
        raise ConfigError("instance must be an object")
    _reject_unknown(obj, {"mu", "threshold", "setting"}, "instance")
    mu = _require(obj, "mu", "instance")
    threshold = _require(obj, "threshold", "instance")
    setting = _require(obj, "setting", "instance")
    try:
        return BanditInstance(
            np.asarray(mu, dtype=float), float(threshold), Setting.parse(str(setting))
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_algorithm_spec(obj) -> AlgorithmSpec:
    if not isinstance(obj, dict):
        raise ConfigError("algorithm entries must be objects")
    _reject_unknown(obj, {"name", "epsilon"}, "algorithm entry")
    try:
        algo = Algorithm.parse(str(_require(obj, "name", "algorithm entry")))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    eps = obj.get("epsilon")
    if eps is not None and algo is not Algorithm.APT:
        raise ConfigError("epsilon is only meaningful for APT")
    eps = float(eps) if eps is not None else 0.0
    if eps < 0.0:
        raise ConfigError("epsilon must be nonnegative")
    return AlgorithmSpec(algorithm=algo, epsilon=eps)


def parse_config(obj, default_parallelism: int | None = None) -> ExperimentConfig:
    """Build an ExperimentConfig from a decoded JSON document."""
    if not isinstance(obj, dict):
        raise ConfigError("configuration must be a JSON object")
    allowed = {
        "instance",
        "algorithms",
        "delta",
        "beta_kind",
        "replications",
        "master_seed",
        "parallelism",
        "problem_id",
    }
    _reject_unknown(obj, allowed, "configuration")
    instance = parse_instance(_require(obj, "instance", "configuration"))
    algorithms = obj.get("algorithms", [])
    if not isinstance(algorithms, list):
        raise ConfigError("algorithms must be a list")
    specs = tuple(parse_algorithm_spec(a) for a in algorithms)
    try:
        beta_kind = BetaKind.parse(str(obj.get("beta_kind", "Practical")))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if default_parallelism is None:
        default_parallelism = default_parallelism_from_env()
    return ExperimentConfig(
        instance=instance,
        algorithms=specs,
        delta=float(_require(obj, "delta", "configuration")),
        beta_kind=beta_kind,
        replications=int(obj.get("replications", 1)),
        master_seed=int(obj.get("master_seed", 0)),
        parallelism=int(obj.get("parallelism", default_parallelism)),
        problem_id=str(obj.get("problem_id", "")),
    )


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_config(doc)


def default_parallelism_from_env() -> int:
    raw = os.environ.get(PARALLELISM_ENV_VAR)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{PARALLELISM_ENV_VAR} must be an integer") from exc
    return max(value, 1)


# ---------------------------------------------------------------------------
# experiment runner
# ---------------------------------------------------------------------------


def _run_block(payload):
    """Run a block of replications in a worker process.

    The payload is plain data so the block is picklable; every replication
    is a pure function of (instance, master_seed, replication), which makes
    the result independent of how replications are distributed.
    """
    (mu, threshold, setting, master_seed, algo, delta, beta_kind, eps, reps) = payload
    instance = BanditInstance(np.asarray(mu, dtype=float), threshold, Setting.parse(setting))
    env = GaussianEnv(instance, master_seed)
    algorithm = Algorithm.parse(algo)
    cfg = TrialConfig(delta=delta, beta_kind=BetaKind.parse(beta_kind), apt_epsilon=eps)
    out = []
    for r in reps:
        o = run_trial(env, r, algorithm, cfg)
        out.append((r, o.tau, o.recommended, o.correct, env.replication_seed(r)))
    return out


def _blocks(n: int, parts: int):
    """Split range(n) into at most `parts` contiguous blocks."""
    parts = min(parts, n)
    size = -(-n // parts)
    return [list(range(i, min(i + size, n))) for i in range(0, n, size)]


def summarize(records) -> Summary:
    taus = np.array([r.tau for r in records], dtype=float)
    errors = np.array([not r.correct for r in records], dtype=float)
    n = taus.shape[0]
    stderr = float(taus.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return Summary(
        mean_tau=float(taus.mean()),
        stderr_tau=stderr,
        error_rate=float(errors.mean()),
        replications=int(n),
    )


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every configured algorithm over the configured replications.

    Replications are distributed over a process pool when parallelism > 1;
    records are gathered and sorted by replication index, so the output is
    identical at any parallelism degree.
    """
    if not config.algorithms:
        raise ConfigError("configuration lists no algorithms to run")
    inst = config.instance
    results = []
    for spec in config.algorithms:
        base = (
            list(map(float, inst.mu)),
            inst.threshold,
            inst.setting.value,
            config.master_seed,
            spec.tag,
            config.delta,
            config.beta_kind.value,
            spec.epsilon,
        )
        blocks = _blocks(config.replications, config.parallelism)
        if config.parallelism > 1 and len(blocks) > 1:
            with concurrent.futures.ProcessPoolExecutor(
                max_workers=config.parallelism
            ) as pool:
                chunks = list(pool.map(_run_block, [base + (b,) for b in blocks]))
        else:
            chunks = [_run_block(base + (b,)) for b in blocks]
        rows = sorted(row for chunk in chunks for row in chunk)
        records = tuple(
            TrialRecord(
                algorithm=spec.tag,
                replication=r,
                tau=tau,
                recommended=rec,
                correct=bool(ok),
                seed=seed,
            )
            for (r, tau, rec, ok, seed) in rows
        )
        results.append(
            AlgorithmResult(spec=spec, records=records, summary=summarize(records))
        )
    return ExperimentResult(config=config, results=tuple(results))


# ---------------------------------------------------------------------------
# reports and tables
# ---------------------------------------------------------------------------


def complexity_report(instance: BanditInstance, delta: float) -> dict:
    """Characteristic time, optimal weights, and sample-size bounds as a
    JSON-ready record."""
    sol = solve_complexity(instance)
    report = {
        "mu": list(map(float, instance.mu)),
        "threshold": instance.threshold,
        "setting": instance.setting.value,
        "optimal_arm": optimal_arm(instance).index,
        "t_star": sol.t_star,
        "inverse_time": sol.f_value,
        "weights": list(map(float, sol.weights)),
        "t_star_log_inv_delta": sol.t_star * math.log(1.0 / delta),
        "lower_bound_samples": lower_bound_samples(instance, delta)
        if delta <= 0.5 and math.isfinite(sol.t_star)
        else None,
    }
    if instance.setting is Setting.INCREASING:
        idx = optimal_arm(instance).index
        if 0 < idx < instance.n_arms - 1:
            lo, hi = characteristic_time_bounds(instance)
            report["bounds"] = {"lower": float(lo), "upper": float(hi)}
    return report


@dataclass(frozen=True)
class SweepRow:
    threshold: float
    inverse_time: float
    weights: tuple


def curve_sweep(mu, setting: Setting, s_grid) -> list:
    """Per-threshold complexity solve over a grid; degenerate thresholds
    (tied closest arms) emit inverse time 0."""
    mu = np.asarray(mu, dtype=float)
    rows = []
    for s in s_grid:
        inst = BanditInstance(mu, float(s), setting)
        sol = solve_complexity(inst)
        rows.append(
            SweepRow(
                threshold=float(s),
                inverse_time=sol.f_value,
                weights=tuple(map(float, sol.weights)),
            )
        )
    return rows


def summary_csv_lines(result: ExperimentResult) -> list:
    cfg = result.config
    lines = [SUMMARY_HEADER]
    for ar in result.results:
        s = ar.summary
        lines.append(
            f"{ar.spec.tag},{cfg.instance.setting.value},{cfg.problem_id},"
            f"{cfg.delta:.6g},{s.replications},{s.mean_tau:.6f},"
            f"{s.stderr_tau:.6f},{s.error_rate:.6f},{cfg.master_seed}"
        )
    return lines


def raw_csv_lines(result: ExperimentResult) -> list:
    lines = [RAW_HEADER]
    for ar in result.results:
        for r in ar.records:
            lines.append(
                f"{r.algorithm},{r.replication},{r.tau},{r.recommended},"
                f"{int(r.correct)},{r.seed}"
            )
    return lines


# ---------------------------------------------------------------------------
# built-in benchmark table
# ---------------------------------------------------------------------------

_BENCHMARKS = (
    ("problem1", [0.5, 1.1, 1.2, 1.3, 1.4, 5.0], 1.0, 0.01),
    ("problem2", [1.0, 2.0, 2.5], 1.55, 0.045),
)


def benchmark_configs(
    replications: int = 10_000, master_seed: int = 0, parallelism: int = 1
) -> list:
    """The built-in benchmark: both reference problems, both structural
    settings, all four algorithms, delta = 0.1, practical threshold. The APT
    epsilon is a tenth of each problem's smallest threshold distance."""
    configs = []
    for problem_id, mu, s, eps in _BENCHMARKS:
        for setting in (Setting.NONMONOTONIC, Setting.INCREASING):
            configs.append(
                ExperimentConfig(
                    instance=BanditInstance(np.asarray(mu), s, setting),
                    algorithms=(
                        AlgorithmSpec(Algorithm.DT),
                        AlgorithmSpec(Algorithm.BC),
                        AlgorithmSpec(Algorithm.RACING),
                        AlgorithmSpec(Algorithm.APT, epsilon=eps),
                    ),
                    delta=0.1,
                    beta_kind=BetaKind.PRACTICAL,
                    replications=replications,
                    master_seed=master_seed,
                    parallelism=parallelism,
                    problem_id=problem_id,
                )
            )
    return configs


def run_benchmarks(
    replications: int = 10_000, master_seed: int = 0, parallelism: int = 1
) -> list:
    return [run_experiment(c) for c in benchmark_configs(replications, master_seed, parallelism)]


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def _emit(lines, out_path):
    text = "\n".join(lines) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8") as f:
            f.write(text)


def _cmd_complexity(args) -> int:
    config = load_config(args.config)
    report = complexity_report(config.instance, config.delta)
    _emit([json.dumps(report, indent=2)], args.out)
    return 0


def _cmd_weights(args) -> int:
    config = load_config(args.config)
    sol = solve_complexity(config.instance)
    _emit([json.dumps({"weights": list(map(float, sol.weights))}, indent=2)], args.out)
    return 0


def _cmd_run(args) -> int:
    config = load_config(args.config)
    result = run_experiment(config)
    _emit(summary_csv_lines(result), args.out)
    if args.raw is not None:
        _emit(raw_csv_lines(result), args.raw)
    return 0


def _cmd_sweep(args) -> int:
    setting = Setting.parse(args.setting)
    if args.step <= 0 or args.smax < args.smin:
        raise ConfigError("sweep grid requires smin <= smax and step > 0")
    n_steps = int(math.floor((args.smax - args.smin) / args.step + 1e-9)) + 1
    grid = [args.smin + i * args.step for i in range(n_steps)]
    rows = curve_sweep(np.asarray(args.mu, dtype=float), setting, grid)
    k = len(args.mu)
    lines = ["threshold,inverse_time," + ",".join(f"w_{a}" for a in range(k))]
    for row in rows:
        ws = ",".join(f"{w:.8f}" for w in row.weights)
        lines.append(f"{row.threshold:.8f},{row.inverse_time:.8f},{ws}")
    _emit(lines, args.out)
    return 0


def _cmd_table1(args) -> int:
    results = run_benchmarks(args.replications, args.seed, args.parallelism)
    lines = [SUMMARY_HEADER]
    for result in results:
        lines.extend(summary_csv_lines(result)[1:])
    _emit(lines, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="threshband",
        description="Thresholding-bandit sample complexity and identification runs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("complexity", help="characteristic time and bounds as JSON")
    p.add_argument("config")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_complexity)

    p = sub.add_parser("weights", help="optimal sampling weights as JSON")
    p.add_argument("config")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_weights)

    p = sub.add_parser("run", help="run a Monte-Carlo experiment config")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="summary CSV path (default stdout)")
    p.add_argument("--raw", default=None, help="also write per-replication CSV here")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="complexity curve over a threshold grid")
    p.add_argument("--mu", nargs="+", type=float, required=True)
    p.add_argument("--setting", required=True)
    p.add_argument("--smin", type=float, required=True)
    p.add_argument("--smax", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("table1", help="run the built-in benchmark table")
    p.add_argument("--replications", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parallelism", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_table1)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "parallelism", None) is None and args.command == "table1":
        args.parallelism = default_parallelism_from_env()
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
