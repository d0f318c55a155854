"""Command-line front end.

Exit codes: 0 success/converged, 1 fatal error, 2 bad configuration or
arguments, 3 finished without reaching the cost threshold (best-effort
result written), 4 replay fixture exhausted mid-run.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .errors import (AllIterationsRejected, ConfigError, FixtureExhausted,
                     FixtureMismatch, ManeuverForgeError)
from .llm_client import LlmConfig
from .metrics import CostWeights, MetricThresholds, TrialMetrics
from .orchestrator import (DEFAULT_TASK, BackendKind, LoopConfig, metric_table,
                           run_batch, run_loop, velocity_statistics)
from .reporting import (atomic_write_text, batch_iteration_rows, batch_json,
                        iteration_csv, learning_progress_csv,
                        parameter_execution_table, result_json,
                        run_iteration_rows, trajectory_csv, velocity_ci_csv)
from .validation import ConstraintSet

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_CONFIG = 2
EXIT_BEST_EFFORT = 3
EXIT_FIXTURE_EXHAUSTED = 4

_TOP_KEYS = {"task", "k_max", "epsilon", "weights", "constraints", "vehicle",
             "world", "backend", "seed", "initial_speed", "dt", "thresholds",
             "out_dir", "export", "llm", "fixture_path", "record_path"}
_WEIGHT_KEYS = {"alpha1", "alpha2", "alpha3"}
_THRESHOLD_KEYS = {"optimal_deg", "acceptable_deg"}
_EXPORT_KEYS = {"trajectory_csv", "velocity_ci_csv", "iteration_log"}
_LLM_KEYS = {"endpoint_url", "model_name", "api_key_env_var", "timeout",
             "max_retries", "temperature"}
_CONSTRAINT_KEYS = {"safety_steering_cap", "max_total_duration",
                    "require_final_brake", "max_speed_estimate",
                    "drive_accel"}


def _reject_unknown(doc: dict, allowed: set, where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown key {sorted(unknown)[0]!r} in {where}")


def load_run_config(path: str | Path) -> tuple[LoopConfig, dict]:
    """Parse a run configuration file with strict key checking.

    Returns the loop config plus output options (task, out_dir, export
    toggles). API keys are never read from the file, only from the
    environment variable the llm section names.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "top level")

    weights = CostWeights()
    if "weights" in doc:
        _reject_unknown(doc["weights"], _WEIGHT_KEYS, "weights")
        weights = CostWeights(**doc["weights"])

    thresholds = MetricThresholds()
    if "thresholds" in doc:
        _reject_unknown(doc["thresholds"], _THRESHOLD_KEYS, "thresholds")
        thresholds = MetricThresholds(**doc["thresholds"])

    constraints = None
    if "constraints" in doc:
        _reject_unknown(doc["constraints"], _CONSTRAINT_KEYS, "constraints")
        constraints = ConstraintSet(**doc["constraints"])

    llm = None
    if "llm" in doc:
        _reject_unknown(doc["llm"], _LLM_KEYS, "llm")
        llm = LlmConfig(**doc["llm"])

    export = {"trajectory_csv": True, "velocity_ci_csv": True,
              "iteration_log": True}
    if "export" in doc:
        _reject_unknown(doc["export"], _EXPORT_KEYS, "export")
        export.update(doc["export"])

    try:
        backend = BackendKind(doc.get("backend", "scripted"))
    except ValueError:
        raise ConfigError(f"unknown backend {doc.get('backend')!r}") from None
    if backend is BackendKind.LLM and llm is None:
        raise ConfigError("backend 'llm' needs an llm section")
    if backend is BackendKind.REPLAY and not doc.get("fixture_path"):
        raise ConfigError("backend 'replay' needs fixture_path")

    try:
        config = LoopConfig(
            k_max=doc.get("k_max", 30),
            epsilon=doc.get("epsilon", 3.0),
            weights=weights,
            constraints=constraints,
            vehicle=doc.get("vehicle", "sedan"),
            world=doc.get("world", "open"),
            backend=backend,
            seed=doc.get("seed", 0),
            initial_speed=doc.get("initial_speed", 0.0),
            dt=doc.get("dt", 0.01),
            thresholds=thresholds,
            fixture_path=doc.get("fixture_path"),
            record_path=doc.get("record_path"),
            llm=llm,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from None

    options = {
        "task": doc.get("task", DEFAULT_TASK),
        "out_dir": doc.get("out_dir", "."),
        "export": export,
    }
    return config, options


def _override_backend(config: LoopConfig, backend: str | None) -> LoopConfig:
    if not backend:
        return config
    kind = BackendKind(backend)
    config = replace(config, backend=kind)
    if kind is BackendKind.REPLAY and not config.fixture_path:
        raise ConfigError("backend 'replay' needs fixture_path")
    if kind is BackendKind.LLM and config.llm is None:
        raise ConfigError("backend 'llm' needs an llm section")
    return config


def _write_run_outputs(result, out_dir: Path, export: dict) -> None:
    atomic_write_text(out_dir / "run_result.json", result_json(result))
    if export["iteration_log"]:
        atomic_write_text(out_dir / "iterations.csv",
                          iteration_csv(run_iteration_rows(result)))
    if export["trajectory_csv"] and result.best_trajectory is not None:
        atomic_write_text(out_dir / "best_trajectory.csv",
                          trajectory_csv(result.best_trajectory))


def cmd_run(config_path: str, task: str | None = None,
            out_dir: str | None = None, backend: str | None = None) -> int:
    try:
        config, options = load_run_config(config_path)
        config = _override_backend(config, backend)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(out_dir or options["out_dir"])
    try:
        result = run_loop(config, task or options["task"])
    except FixtureExhausted as exc:
        print(f"fixture exhausted: {exc}", file=sys.stderr)
        return EXIT_FIXTURE_EXHAUSTED
    except (FixtureMismatch, AllIterationsRejected, ManeuverForgeError,
            OSError, ValueError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return EXIT_FATAL

    _write_run_outputs(result, out, options["export"])
    print(f"{'converged' if result.converged else 'best-effort'} after "
          f"{result.iterations_used} iteration(s), best cost "
          f"{result.best_cost:.3f}")
    return EXIT_OK if result.converged else EXIT_BEST_EFFORT


def cmd_batch(config_path: str, n_trials: int, batch_size: int, jobs: int,
              task: str | None = None, out_dir: str | None = None,
              backend: str | None = None) -> int:
    if n_trials < 1 or batch_size < 1 or jobs < 1:
        print("config error: trials, batch-size, and jobs must be >= 1",
              file=sys.stderr)
        return EXIT_CONFIG
    try:
        config, options = load_run_config(config_path)
        config = _override_backend(config, backend)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(out_dir or options["out_dir"])
    try:
        report = run_batch(config, n_trials, batch_size, jobs=jobs,
                           task_text=task or options["task"])
    except FixtureExhausted as exc:
        print(f"fixture exhausted: {exc}", file=sys.stderr)
        return EXIT_FIXTURE_EXHAUSTED
    except (ManeuverForgeError, OSError, ValueError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return EXIT_FATAL

    atomic_write_text(out / "batch_report.json", batch_json(report))
    atomic_write_text(out / "table_parameter_execution.txt",
                      parameter_execution_table(report))
    metrics = report.trial_metrics()
    if metrics:
        table = metric_table({config.vehicle: metrics},
                             config.thresholds.acceptable_deg)
        atomic_write_text(out / "table_metrics.txt", table.render() + "\n")
    atomic_write_text(out / "learning_progress.csv",
                      learning_progress_csv(report))
    if options["export"]["velocity_ci_csv"]:
        rows = velocity_statistics(report.trajectories)
        atomic_write_text(out / "velocity_ci.csv", velocity_ci_csv(rows))
    if options["export"]["iteration_log"]:
        atomic_write_text(out / "iterations.csv",
                          iteration_csv(batch_iteration_rows(report)))

    print(f"{report.implemented}/{report.total} trials implemented "
          f"({report.implemented_pct:.1f}%)")
    return EXIT_OK


def cmd_replay(fixture_path: str, config_path: str, task: str | None = None,
               out_dir: str | None = None) -> int:
    if not Path(fixture_path).exists():
        print(f"config error: fixture not found: {fixture_path}",
              file=sys.stderr)
        return EXIT_CONFIG
    try:
        config, options = load_run_config(config_path)
        config = replace(config, backend=BackendKind.REPLAY,
                         fixture_path=fixture_path)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(out_dir or options["out_dir"])
    try:
        result = run_loop(config, task or options["task"])
    except FixtureExhausted as exc:
        print(f"fixture exhausted: {exc}", file=sys.stderr)
        return EXIT_FIXTURE_EXHAUSTED
    except FixtureMismatch as exc:
        print(f"fixture schema mismatch: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except (AllIterationsRejected, ManeuverForgeError, OSError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return EXIT_FATAL

    _write_run_outputs(result, out, options["export"])
    print(f"{'converged' if result.converged else 'best-effort'} after "
          f"{result.iterations_used} iteration(s), best cost "
          f"{result.best_cost:.3f}")
    return EXIT_OK if result.converged else EXIT_BEST_EFFORT


def cmd_report(report_paths: list[str], labels: list[str] | None,
               out_path: str | None) -> int:
    if not 1 <= len(report_paths) <= 2:
        print("config error: report takes one or two batch_report.json files",
              file=sys.stderr)
        return EXIT_CONFIG
    names = labels or [Path(p).stem for p in report_paths]
    if len(names) != len(report_paths):
        print("config error: --labels must match the number of reports",
              file=sys.stderr)
        return EXIT_CONFIG

    sets = {}
    for name, path in zip(names, report_paths):
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
            metrics = [TrialMetrics.from_dict(t["metrics"])
                       for t in doc["trials"] if t.get("metrics")]
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            print(f"fatal: cannot read {path}: {exc}", file=sys.stderr)
            return EXIT_FATAL
        if not metrics:
            print(f"fatal: {path} has no measured trials", file=sys.stderr)
            return EXIT_FATAL
        sets[name] = metrics

    text = metric_table(sets).render() + "\n"
    if out_path:
        atomic_write_text(out_path, text)
    else:
        print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maneuverforge",
        description="Closed-loop phase-based maneuver synthesis")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one refinement loop")
    run.add_argument("--config", required=True)
    run.add_argument("--task", default=None)
    run.add_argument("--out", default=None)
    run.add_argument("--backend", default=None,
                     choices=[k.value for k in BackendKind])

    batch = sub.add_parser("batch", help="run independent trials and aggregate")
    batch.add_argument("--config", required=True)
    batch.add_argument("--trials", type=int, required=True)
    batch.add_argument("--batch-size", type=int, default=20)
    batch.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    batch.add_argument("--task", default=None)
    batch.add_argument("--out", default=None)
    batch.add_argument("--backend", default=None,
                       choices=[k.value for k in BackendKind])

    rep = sub.add_parser("replay", help="re-run a loop from a recorded fixture")
    rep.add_argument("fixture")
    rep.add_argument("--config", required=True)
    rep.add_argument("--task", default=None)
    rep.add_argument("--out", default=None)

    report = sub.add_parser("report", help="render metric tables from batch "
                                           "reports")
    report.add_argument("reports", nargs="+")
    report.add_argument("--labels", nargs="*", default=None)
    report.add_argument("--out", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.task, args.out, args.backend)
    if args.command == "batch":
        return cmd_batch(args.config, args.trials, args.batch_size, args.jobs,
                         args.task, args.out, args.backend)
    if args.command == "replay":
        return cmd_replay(args.fixture, args.config, args.task, args.out)
    return cmd_report(args.reports, args.labels, args.out)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
