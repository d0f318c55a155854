"""Closed-loop phase-based stunt maneuver synthesis on a planar simulator."""

from .agents import (LlmBackend, Query, ReplayBackend, ScriptedBackend,
                     compose_feedback, enrich, propose_plan, scripted_refine)
from .dynamics import (ControlInput, VehicleParams, VehicleState,
                       clamp_control, derivatives, load_vehicle, step)
from .metrics import (CostWeights, MetricThresholds, TrialMetrics,
                      angle_error, compute_metrics, confidence_interval, cost,
                      jerk_metrics, reward, smoothness_and_yaw)
from .orchestrator import (BackendKind, LoopConfig, RunResult, run_batch,
                           run_iteration, run_loop, summarize_comparison)
from .plan import (ControlSchedule, ManeuverPlan, ManeuverType, Phase,
                   compile_plan, control_at, jturn_template)
from .simulate import Trajectory, rollout
from .validation import ConstraintSet, ValidationReport, Verdict, enforce, validate
from .world import WorldModel, collision_check, corridor_world, open_world

__version__ = "0.1.0"

__all__ = [
    "BackendKind", "ControlInput", "ControlSchedule", "ConstraintSet",
    "CostWeights", "LlmBackend", "LoopConfig", "ManeuverPlan", "ManeuverType",
    "MetricThresholds", "Phase", "Query", "ReplayBackend", "RunResult",
    "ScriptedBackend", "Trajectory", "TrialMetrics", "ValidationReport",
    "VehicleParams", "VehicleState", "Verdict", "WorldModel", "angle_error",
    "clamp_control", "collision_check", "compile_plan", "compose_feedback",
    "compute_metrics", "confidence_interval", "control_at", "corridor_world",
    "cost", "derivatives", "enforce", "enrich", "jerk_metrics",
    "jturn_template", "load_vehicle", "open_world", "propose_plan", "reward",
    "rollout", "run_batch", "run_iteration", "run_loop", "scripted_refine",
    "smoothness_and_yaw", "step", "summarize_comparison", "validate",
]
