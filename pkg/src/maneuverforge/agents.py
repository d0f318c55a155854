"""Agent roles around a pluggable text-generation backend.

Three backends satisfy the same ``generate(messages, output_schema)``
contract: an HTTP client for a live model, a fixture replayer, and a
deterministic scripted heuristic. The pipeline code is identical for all
three; the scripted backend reads the machine-readable context block that
the enricher embeds in every prompt and ignores the prose around it.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .dynamics import clamp_control
from .errors import EnrichmentFailed, SchemaViolation
from .fixtures import FixtureReader, FixtureWriter
from .llm_client import LlmConfig, complete_structured
from .metrics import TrialMetrics
from .plan import (MANEUVER_PLAN_SCHEMA, MAX_PHASE_DURATION, ManeuverPlan,
                   Phase, jturn_template, plan_from_dict)
from .validation import ConstraintSet

# Scripted refinement: proportional gain and per-step relative change cap.
REFINE_GAIN = 0.5
REFINE_STEP_CAP = 0.2
COLLISION_THROTTLE_SCALE = 0.85
COLLISION_BRAKE_SCALE = 1.10

CONTEXT_HEADER = "Machine-readable context:"
_CONTEXT_RE = re.compile(r"```json\n(.*?)\n```", re.DOTALL)

DRIVER_SYSTEM_PROMPT = (
    "You are the driver agent of a stunt-maneuver planner. Produce a "
    "phase-based control plan as a single JSON object matching the given "
    "schema. Use the feedback in the prompt to improve on earlier attempts."
)


@dataclass(frozen=True)
class Query:
    """One instruction to the pipeline, with structured side context."""

    text: str
    iteration: int = 1
    context: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"text": self.text, "iteration": self.iteration,
                "context": self.context}


@dataclass(frozen=True)
class EnrichedQuery:
    original: Query
    enriched_text: str
    injected_facts: tuple[tuple[str, str], ...]


class AgentBackend(Protocol):
    def generate(self, messages: list[dict], output_schema: dict) -> dict: ...


class ScriptedBackend:
    """Deterministic heuristic driver: template first, then proportional
    refinement from the context block's last plan and metrics."""

    def generate(self, messages: list[dict], output_schema: dict) -> dict:
        context = _extract_context(messages)
        last_plan = context.get("last_plan")
        last_metrics = context.get("last_metrics")
        if not last_plan or not last_metrics:
            return jturn_template().to_dict()
        plan = plan_from_dict(last_plan)
        metrics = TrialMetrics.from_dict(last_metrics)
        return scripted_refine(plan, metrics).to_dict()


class ReplayBackend:
    """Replays a recorded fixture in call order; no network is involved."""

    def __init__(self, reader: FixtureReader):
        self.reader = reader

    def generate(self, messages: list[dict], output_schema: dict) -> dict:
        return self.reader.next(output_schema)


class LlmBackend:
    """Live HTTP backend; optionally records every call to a fixture."""

    def __init__(self, config: LlmConfig, transport=None,
                 recorder: FixtureWriter | None = None):
        self.config = config
        self.transport = transport
        self.recorder = recorder

    def generate(self, messages: list[dict], output_schema: dict) -> dict:
        return complete_structured(self.config, messages, output_schema,
                                   transport=self.transport,
                                   recorder=self.recorder)


class RecordingBackend:
    """Wraps any backend and appends its outputs to a fixture."""

    def __init__(self, inner: AgentBackend, writer: FixtureWriter):
        self.inner = inner
        self.writer = writer

    def generate(self, messages: list[dict], output_schema: dict) -> dict:
        doc = self.inner.generate(messages, output_schema)
        self.writer.append(messages, output_schema, doc)
        return doc


def _extract_context(messages: list[dict]) -> dict:
    for message in reversed(messages):
        content = message.get("content", "")
        if CONTEXT_HEADER not in content:
            continue
        blocks = _CONTEXT_RE.findall(content)
        if blocks:
            try:
                return json.loads(blocks[-1])
            except json.JSONDecodeError:
                return {}
    return {}


def _last_measured(history: Sequence) -> tuple[ManeuverPlan | None,
                                               TrialMetrics | None]:
    for record in reversed(list(history)):
        if getattr(record, "metrics", None) is not None:
            return getattr(record, "validated_plan", None), record.metrics
    return None, None


def enrich(query: Query, constraints: ConstraintSet,
           history: Sequence = ()) -> EnrichedQuery:
    """Expand an instruction with vehicle facts, bounds, last metrics, and
    the output schema. Pure template fill; the original text is kept
    verbatim as a leading substring."""
    if not query.text:
        raise EnrichmentFailed("query text is empty")

    facts: list[tuple[str, str]] = []
    lines = [query.text, ""]

    vehicle = query.context.get("vehicle")
    vehicle_params = query.context.get("vehicle_params") or {}
    if vehicle:
        detail = ""
        if vehicle_params:
            detail = (" (mass {mass:.0f} kg, wheelbase {wb:.2f} m, max steer "
                      "{steer:.2f} rad, drive force {drive:.0f} N)").format(
                mass=vehicle_params.get("mass", float("nan")),
                wb=(vehicle_params.get("dist_front_axle", 0.0)
                    + vehicle_params.get("dist_rear_axle", 0.0)),
                steer=vehicle_params.get("max_steer_angle", float("nan")),
                drive=vehicle_params.get("max_drive_force", float("nan")))
        lines.append(f"Vehicle preset: {vehicle}{detail}")
        facts.append(("vehicle", str(vehicle)))

    lines.append(
        "Control bounds: throttle [{:.1f}, {:.1f}], brake [{:.1f}, {:.1f}], "
        "steering [{:.1f}, {:.1f}]; phase duration (0, {:.0f}] s; "
        "{}-{} phases; total duration <= {:.0f} s.".format(
            constraints.throttle_min, constraints.throttle_max,
            constraints.brake_min, constraints.brake_max,
            constraints.steering_min, constraints.steering_max,
            constraints.duration_max, constraints.phase_count_min,
            constraints.phase_count_max, constraints.max_total_duration))
    facts.append(("constraints", json.dumps(constraints.to_dict(),
                                            sort_keys=True)))

    last_plan, last_metrics = _last_measured(history)
    if last_metrics is not None:
        direction = ("overshoot" if last_metrics.signed_heading_error > 0
                     else "undershoot")
        lines.append(
            "Previous attempt: heading error {:+.2f} deg ({}), collision: "
            "{}, mean jerk {:.3f} m/s^3.".format(
                last_metrics.signed_heading_error, direction,
                "yes" if last_metrics.collision else "no",
                last_metrics.mean_jerk))
        facts.append(("last_signed_error_deg",
                      f"{last_metrics.signed_heading_error:+.2f}"))

    lines.append("Respond with a single JSON object matching this maneuver "
                 "plan schema:")
    lines.append(json.dumps(MANEUVER_PLAN_SCHEMA, sort_keys=True))

    context_doc = {
        "iteration": query.iteration,
        "vehicle": vehicle,
        "last_plan": last_plan.to_dict() if last_plan is not None else None,
        "last_metrics": (last_metrics.to_dict()
                         if last_metrics is not None else None),
    }
    lines.append("")
    lines.append(CONTEXT_HEADER)
    lines.append("```json\n" + json.dumps(context_doc, sort_keys=True)
                 + "\n```")

    return EnrichedQuery(query, "\n".join(lines), tuple(facts))


def build_messages(enriched: EnrichedQuery) -> list[dict]:
    return [
        {"role": "system", "content": DRIVER_SYSTEM_PROMPT},
        {"role": "user", "content": enriched.enriched_text},
    ]


def propose_plan(enriched: EnrichedQuery, backend: AgentBackend) -> ManeuverPlan:
    """Ask the backend for a plan document and parse it, unvalidated."""
    doc = backend.generate(build_messages(enriched), MANEUVER_PLAN_SCHEMA)
    try:
        return plan_from_dict(doc)
    except Exception as exc:
        raise SchemaViolation(f"backend output is not a plan: {exc}") from exc


def _sign_or_one(x: float) -> float:
    return 1.0 if x >= 0.0 else -1.0


def scripted_refine(prev_plan: ManeuverPlan,
                    metrics: TrialMetrics) -> ManeuverPlan:
    """Deterministic proportional update toward a clean 180 deg rotation.

    After a collision the priority is energy: every throttle drops 15% and
    the final brake rises 10%. Otherwise the signed heading error rescales
    the spin phase's duration and nudges the spin/counter-steer magnitudes,
    both capped at a 20% change per step. A zero-error, collision-free
    trial is a fixed point.
    """
    phases = list(prev_plan.phases)
    n = len(phases)

    if metrics.collision:
        new_phases = []
        for i, p in enumerate(phases):
            throttle = p.throttle * COLLISION_THROTTLE_SCALE
            brake = p.brake * COLLISION_BRAKE_SCALE if i == n - 1 else p.brake
            new_phases.append(Phase(p.name, p.duration, throttle, p.steering,
                                    brake, p.reverse))
        phases = new_phases
    else:
        error = metrics.signed_heading_error
        if error != 0.0:
            idx_spin = 1 if n >= 2 else 0
            idx_counter = 2 if n >= 3 else idx_spin

            duration_scale = min(max(1.0 - REFINE_GAIN * error / 180.0,
                                     1.0 - REFINE_STEP_CAP),
                                 1.0 + REFINE_STEP_CAP)
            nudge = -REFINE_GAIN * math.copysign(
                min(abs(error) / 180.0, REFINE_STEP_CAP), error)

            spin = phases[idx_spin]
            phases[idx_spin] = Phase(
                spin.name, spin.duration * duration_scale, spin.throttle,
                _steer_nudged(spin.steering, nudge), spin.brake, spin.reverse)
            if idx_counter != idx_spin:
                counter = phases[idx_counter]
                phases[idx_counter] = Phase(
                    counter.name, counter.duration, counter.throttle,
                    _steer_nudged(counter.steering, nudge), counter.brake,
                    counter.reverse)

    clamped = []
    for p in phases:
        control = clamp_control(p.throttle, p.steering, p.brake, p.reverse)
        duration = min(p.duration, MAX_PHASE_DURATION)
        clamped.append(Phase(p.name, duration, control.throttle,
                             control.steering, control.brake, control.reverse))
    return ManeuverPlan(prev_plan.maneuver_type, tuple(clamped),
                        prev_plan.metadata)


def _steer_nudged(steering: float, nudge: float) -> float:
    magnitude = max(abs(steering) + nudge, 0.0)
    return _sign_or_one(steering) * magnitude


def compose_feedback(prev: Query, metrics: TrialMetrics) -> Query:
    """Build the next-iteration query from the measured outcome."""
    task = prev.context.get("task", prev.text.splitlines()[0])
    error = metrics.signed_heading_error

    summary = ("Result of iteration {}: signed heading error {:+.2f} deg, "
               "collision: {}, mean jerk {:.3f} m/s^3.".format(
                   prev.iteration, error,
                   "yes" if metrics.collision else "no", metrics.mean_jerk))

    if metrics.collision:
        hint = ("A collision terminated the trial. Reduce speed: lower the "
                "throttle values and brake earlier.")
    elif error > 0:
        hint = (f"The vehicle is overshooting by {error:.1f} degrees. Reduce "
                "the steering magnitude or shorten phase II.")
    elif error < 0:
        hint = (f"The vehicle is undershooting by {-error:.1f} degrees. "
                "Increase the steering magnitude or lengthen phase II.")
    else:
        hint = ("The maneuver met the target exactly. Reproduce the same "
                "parameters.")

    return Query(
        text=f"{task}\n\n{summary}\n{hint}",
        iteration=prev.iteration + 1,
        context=dict(prev.context),
    )


def compose_rejection_feedback(prev: Query, report) -> Query:
    """Next-iteration query after the validator refused the plan outright."""
    task = prev.context.get("task", prev.text.splitlines()[0])
    described = "; ".join(
        f"{v.channel}={v.observed:g} (bound {v.bound:g}, {v.constraint_class})"
        for v in report.violations) or "structural violation"
    return Query(
        text=(f"{task}\n\nParameters rejected: {described}. Propose a plan "
              "within the stated bounds."),
        iteration=prev.iteration + 1,
        context=dict(prev.context),
    )
