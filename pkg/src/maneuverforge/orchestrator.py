"""The closed refinement loop: enrich, propose, validate, simulate, score,
feed back; plus batch evaluation and cross-vehicle comparison tables."""

from __future__ import annotations

import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

from .agents import (AgentBackend, LlmBackend, Query, RecordingBackend,
                     ReplayBackend, ScriptedBackend, compose_feedback,
                     compose_rejection_feedback, enrich, propose_plan)
from .dynamics import DEFAULT_DT, VehicleParams, VehicleState, load_vehicle
from .errors import (AllIterationsRejected, BackendUnavailable,
                     EnrichmentFailed, SchemaViolation, SimulationDiverged,
                     Timeout)
from .fixtures import FixtureReader, FixtureWriter
from .llm_client import LlmConfig
from .metrics import (CostWeights, MetricThresholds, TrialMetrics,
                      compute_metrics, confidence_interval, cost)
from .plan import ManeuverPlan, compile_plan
from .simulate import Trajectory, rollout
from .validation import ConstraintSet, ValidationReport, Verdict, validate
from .world import WorldModel, load_world

DEFAULT_TASK = "Execute a J-turn maneuver."


class BackendKind(str, Enum):
    LLM = "llm"
    SCRIPTED = "scripted"
    REPLAY = "replay"


@dataclass(frozen=True)
class LoopConfig:
    k_max: int = 30
    epsilon: float = 3.0
    weights: CostWeights = CostWeights()
    constraints: ConstraintSet | None = None
    vehicle: str = "sedan"
    world: str = "open"
    backend: BackendKind = BackendKind.SCRIPTED
    seed: int = 0
    initial_speed: float = 0.0
    dt: float = DEFAULT_DT
    thresholds: MetricThresholds = MetricThresholds()
    fixture_path: str | None = None
    record_path: str | None = None
    llm: LlmConfig | None = None

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


@dataclass
class LoopContext:
    """Resolved runtime objects for one loop; built once per trial."""

    params: VehicleParams
    world: WorldModel
    constraints: ConstraintSet
    backend: AgentBackend
    weights: CostWeights
    thresholds: MetricThresholds
    dt: float
    initial_speed: float

    @classmethod
    def from_config(cls, config: LoopConfig,
                    backend: AgentBackend | None = None) -> "LoopContext":
        params = load_vehicle(config.vehicle)
        constraints = config.constraints or ConstraintSet.for_vehicle(params)
        return cls(
            params=params,
            world=load_world(config.world),
            constraints=constraints,
            backend=backend or make_backend(config),
            weights=config.weights,
            thresholds=config.thresholds,
            dt=config.dt,
            initial_speed=config.initial_speed,
        )


def make_backend(config: LoopConfig) -> AgentBackend:
    backend: AgentBackend
    if config.backend is BackendKind.SCRIPTED:
        backend = ScriptedBackend()
    elif config.backend is BackendKind.REPLAY:
        if not config.fixture_path:
            raise ValueError("replay backend needs fixture_path")
        return ReplayBackend(FixtureReader(config.fixture_path))
    else:
        if config.llm is None:
            raise ValueError("llm backend needs an LlmConfig")
        backend = LlmBackend(config.llm)
    if config.record_path:
        backend = RecordingBackend(backend, FixtureWriter(config.record_path))
    return backend


@dataclass
class IterationRecord:
    """One loop iteration: what was asked, proposed, validated, and measured."""

    k: int
    query: Query
    raw_plan: ManeuverPlan | None = None
    validated_plan: ManeuverPlan | None = None
    validation: ValidationReport | None = None
    metrics: TrialMetrics | None = None
    cost: float | None = None
    implemented: bool = False
    error: str | None = None
    wall_ms: float = 0.0
    trajectory: Trajectory | None = None

    def to_dict(self) -> dict:
        # wall_ms and the raw trajectory stay out so serialized results are
        # reproducible byte-for-byte across runs
        return {
            "k": self.k,
            "query": self.query.to_dict(),
            "raw_plan": self.raw_plan.to_dict() if self.raw_plan else None,
            "validated_plan": (self.validated_plan.to_dict()
                               if self.validated_plan else None),
            "validation": self.validation.to_dict() if self.validation else None,
            "metrics": self.metrics.to_dict() if self.metrics else None,
            "cost": self.cost,
            "implemented": self.implemented,
            "error": self.error,
        }


@dataclass
class RunResult:
    records: list[IterationRecord]
    best_plan: ManeuverPlan
    best_cost: float
    converged: bool
    iterations_used: int
    best_metrics: TrialMetrics | None = None
    best_trajectory: Trajectory | None = None

    def to_dict(self) -> dict:
        return {
            "records": [r.to_dict() for r in self.records],
            "best_plan": self.best_plan.to_dict(),
            "best_cost": self.best_cost,
            "converged": self.converged,
            "iterations_used": self.iterations_used,
            "best_metrics": (self.best_metrics.to_dict()
                             if self.best_metrics else None),
        }


def _run_iteration(k: int, query: Query, ctx: LoopContext,
                   history: list[IterationRecord]) -> IterationRecord:
    started = time.perf_counter()
    record = IterationRecord(k=k, query=query)
    try:
        enriched = enrich(query, ctx.constraints, history)
        record.raw_plan = propose_plan(enriched, ctx.backend)
    except (SchemaViolation, BackendUnavailable, Timeout,
            EnrichmentFailed) as exc:
        record.error = f"{type(exc).__name__}: {exc}"
        record.wall_ms = (time.perf_counter() - started) * 1000.0
        return record

    record.validation = validate(record.raw_plan, ctx.constraints)
    if record.validation.verdict is Verdict.REJECTED:
        record.wall_ms = (time.perf_counter() - started) * 1000.0
        return record

    record.validated_plan = (record.validation.repaired_plan
                             if record.validation.verdict is Verdict.REPAIRED
                             else record.raw_plan)
    record.implemented = True
    try:
        trajectory = rollout(
            VehicleState(v_long=ctx.initial_speed),
            compile_plan(record.validated_plan),
            ctx.params, ctx.dt, ctx.world)
    except SimulationDiverged as exc:
        record.implemented = False
        record.error = f"SimulationDiverged: {exc}"
        record.wall_ms = (time.perf_counter() - started) * 1000.0
        return record

    record.trajectory = trajectory
    record.metrics = compute_metrics(trajectory, ctx.thresholds)
    record.cost = cost(record.metrics, ctx.weights)
    record.wall_ms = (time.perf_counter() - started) * 1000.0
    return record


def run_iteration(k: int, query: Query, config: LoopConfig,
                  context: LoopContext | None = None) -> IterationRecord:
    """Run a single enrich/propose/validate/simulate/score pass."""
    if k < 1:
        raise ValueError("iteration index starts at 1")
    ctx = context or LoopContext.from_config(config)
    return _run_iteration(k, query, ctx, [])


def run_loop(config: LoopConfig, task_text: str = DEFAULT_TASK,
             backend: AgentBackend | None = None) -> RunResult:
    """Iterate until the cost threshold is met or k_max is exhausted.

    The best (lowest-cost, ties going to the later iteration) validated plan
    is tracked throughout, so a non-converged run still returns the
    best-effort parameters. Raises :class:`AllIterationsRejected` if no
    iteration produced metrics at all.
    """
    ctx = LoopContext.from_config(config, backend)
    query = Query(
        text=task_text,
        iteration=1,
        context={
            "task": task_text,
            "vehicle": config.vehicle,
            "vehicle_params": asdict(ctx.params),
        },
    )

    records: list[IterationRecord] = []
    best: IterationRecord | None = None
    converged = False
    for k in range(1, config.k_max + 1):
        record = _run_iteration(k, query, ctx, records)
        records.append(record)
        if record.cost is not None:
            if best is None or record.cost <= best.cost:
                best = record
            if record.cost <= config.epsilon:
                converged = True
                break
        if k < config.k_max:
            if record.metrics is not None:
                query = compose_feedback(query, record.metrics)
            elif record.validation is not None:
                query = compose_rejection_feedback(query, record.validation)
            else:
                query = Query(
                    text=(f"{query.context.get('task', task_text)}\n\n"
                          f"The previous attempt failed: {record.error}. "
                          "Propose a fresh plan."),
                    iteration=query.iteration + 1,
                    context=dict(query.context),
                )

    if best is None:
        raise AllIterationsRejected(
            f"no iteration out of {len(records)} produced metrics")
    return RunResult(
        records=records,
        best_plan=best.validated_plan,
        best_cost=best.cost,
        converged=converged,
        iterations_used=len(records),
        best_metrics=best.metrics,
        best_trajectory=best.trajectory,
    )


@dataclass
class TrialSummary:
    trial: int
    seed: int
    converged: bool
    iterations_used: int
    implemented: bool
    best_cost: float | None
    metrics: TrialMetrics | None

    def to_dict(self) -> dict:
        return {
            "trial": self.trial,
            "seed": self.seed,
            "converged": self.converged,
            "iterations_used": self.iterations_used,
            "implemented": self.implemented,
            "best_cost": self.best_cost,
            "metrics": self.metrics.to_dict() if self.metrics else None,
        }


@dataclass
class BatchStats:
    index: int
    trials: int
    implemented: int
    rejected: int
    mean_angle_error: float | None
    min_angle_error: float | None
    success_rate: float

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "trials": self.trials,
            "implemented": self.implemented,
            "rejected": self.rejected,
            "mean_angle_error": self.mean_angle_error,
            "min_angle_error": self.min_angle_error,
            "success_rate": self.success_rate,
        }


@dataclass
class BatchReport:
    trials: list[TrialSummary]
    batches: list[BatchStats]
    total: int
    implemented: int
    rejected: int
    implemented_pct: float
    records: list[list[IterationRecord]] = field(default_factory=list)
    trajectories: list[Trajectory | None] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "trials": [t.to_dict() for t in self.trials],
            "batches": [b.to_dict() for b in self.batches],
            "total": self.total,
            "implemented": self.implemented,
            "rejected": self.rejected,
            "implemented_pct": self.implemented_pct,
        }

    def trial_metrics(self) -> list[TrialMetrics]:
        return [t.metrics for t in self.trials if t.metrics is not None]


def _run_trial(args: tuple[LoopConfig, int, str]) -> tuple[int, RunResult | None, str | None]:
    config, trial, task_text = args
    trial_config = replace(config, seed=config.seed + trial)
    try:
        return trial, run_loop(trial_config, task_text), None
    except AllIterationsRejected as exc:
        return trial, None, str(exc)


def run_batch(config: LoopConfig, n_trials: int, batch_size: int,
              jobs: int = 1, task_text: str = DEFAULT_TASK) -> BatchReport:
    """Run independent trials (seed + trial index each) and aggregate them
    into fixed-size batches. Trials may run in parallel; aggregation always
    follows trial order so outputs are reproducible.

    A replay-backed batch replays the same fixture from its start for every
    trial (each trial builds a fresh cursor); replaying and recording both
    force sequential execution so the fixture stream stays ordered.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")

    sequential_backend = (config.backend is BackendKind.REPLAY
                          or config.record_path is not None)
    args = [(config, i, task_text) for i in range(n_trials)]
    if jobs > 1 and not sequential_backend:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_trial, args))
    else:
        outcomes = [_run_trial(a) for a in args]

    trials: list[TrialSummary] = []
    all_records: list[list[IterationRecord]] = []
    trajectories: list[Trajectory | None] = []
    for trial, result, error in outcomes:
        if result is None:
            trials.append(TrialSummary(trial, config.seed + trial, False, 0,
                                       False, None, None))
            all_records.append([])
            trajectories.append(None)
            continue
        trials.append(TrialSummary(
            trial=trial,
            seed=config.seed + trial,
            converged=result.converged,
            iterations_used=result.iterations_used,
            implemented=result.best_metrics is not None,
            best_cost=result.best_cost,
            metrics=result.best_metrics,
        ))
        all_records.append(result.records)
        trajectories.append(result.best_trajectory)

    batches: list[BatchStats] = []
    for start in range(0, n_trials, batch_size):
        chunk = trials[start:start + batch_size]
        errors = [t.metrics.angle_error for t in chunk if t.metrics]
        implemented = sum(1 for t in chunk if t.implemented)
        successes = sum(1 for t in chunk if t.metrics and t.metrics.success)
        batches.append(BatchStats(
            index=len(batches),
            trials=len(chunk),
            implemented=implemented,
            rejected=len(chunk) - implemented,
            mean_angle_error=(sum(errors) / len(errors)) if errors else None,
            min_angle_error=min(errors) if errors else None,
            success_rate=100.0 * successes / len(chunk),
        ))

    implemented_total = sum(1 for t in trials if t.implemented)
    return BatchReport(
        trials=trials,
        batches=batches,
        total=n_trials,
        implemented=implemented_total,
        rejected=n_trials - implemented_total,
        implemented_pct=100.0 * implemented_total / n_trials,
        records=all_records,
        trajectories=trajectories,
    )


@dataclass
class ComparisonTable:
    labels: tuple[str, ...]
    rows: list[tuple[str, tuple[float, ...]]]

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "rows": [{"metric": name, "values": list(values)}
                     for name, values in self.rows],
        }

    def render(self) -> str:
        width = max(len(name) for name, _ in self.rows) + 2
        header = "Metric".ljust(width) + "".join(
            label.rjust(16) for label in self.labels)
        lines = [header, "-" * len(header)]
        for name, values in self.rows:
            lines.append(name.ljust(width) + "".join(
                f"{v:16.2f}" for v in values))
        return "\n".join(lines)


def _metric_column(metrics: list[TrialMetrics],
                   acceptable_deg: float) -> list[float]:
    errors = [m.angle_error for m in metrics]
    n = len(errors)
    return [
        sum(errors) / n,
        statistics.median(errors),
        min(errors),
        max(errors),
        statistics.pstdev(errors) if n > 1 else 0.0,
        100.0 * sum(1 for m in metrics
                    if m.angle_error <= acceptable_deg and not m.collision) / n,
        sum(m.mean_jerk for m in metrics) / n,
        sum(m.max_jerk for m in metrics) / n,
        sum(m.mean_yaw_rate for m in metrics) / n,
        sum(m.steering_smoothness for m in metrics) / n,
        sum(m.execution_time for m in metrics) / n,
        100.0 * sum(1 for e in errors if e <= 3.0) / n,
        100.0 * sum(1 for e in errors if e <= 7.0) / n,
    ]


_METRIC_ROW_NAMES = (
    "Mean Angle Error (deg)",
    "Median Angle Error (deg)",
    "Min Angle Error (deg)",
    "Max Angle Error (deg)",
    "Standard Deviation",
    "Success Rate (%)",
    "Mean Jerk (m/s^3)",
    "Avg Max Jerk (m/s^3)",
    "Mean Yaw Rate (deg/s)",
    "Steering Smoothness",
    "Avg Execution Time (s)",
    "Share <= 3 deg (%)",
    "Share <= 7 deg (%)",
)


def metric_table(sets: dict[str, list[TrialMetrics]],
                 acceptable_deg: float = 10.0) -> ComparisonTable:
    """Per-metric summary columns for one or more labelled result sets."""
    if not sets or any(not v for v in sets.values()):
        raise ValueError("every result set must be non-empty")
    labels = tuple(sets.keys())
    columns = [_metric_column(sets[label], acceptable_deg) for label in labels]
    rows = [(name, tuple(col[i] for col in columns))
            for i, name in enumerate(_METRIC_ROW_NAMES)]
    return ComparisonTable(labels, rows)


def summarize_comparison(results_a: list[TrialMetrics],
                         results_b: list[TrialMetrics],
                         labels: tuple[str, str] = ("A", "B"),
                         acceptable_deg: float = 10.0) -> ComparisonTable:
    """Side-by-side metric comparison of two result sets."""
    return metric_table({labels[0]: results_a, labels[1]: results_b},
                        acceptable_deg)


def velocity_statistics(trajectories: list[Trajectory]) -> list[dict]:
    """Per-timestep mean and 95% CI of the body-frame velocities across
    trials, truncated to the shortest trajectory."""
    usable = [t for t in trajectories if t is not None and len(t.samples) > 0]
    if not usable:
        return []
    length = min(len(t.samples) for t in usable)
    rows = []
    for i in range(length):
        vx = [t.samples[i].state.v_long for t in usable]
        vy = [t.samples[i].state.v_lat for t in usable]
        vrot = [math.degrees(t.samples[i].state.yaw_rate) for t in usable]
        n = len(usable)

        def ci(vals: list[float]) -> float:
            return confidence_interval(vals) if n >= 2 else 0.0

        rows.append({
            "time_s": usable[0].samples[i].time,
            "vx_mean": sum(vx) / n, "vx_ci": ci(vx),
            "vy_mean": sum(vy) / n, "vy_ci": ci(vy),
            "vrot_mean_degps": sum(vrot) / n, "vrot_ci": ci(vrot),
        })
    return rows
