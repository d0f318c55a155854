"""Phase-based maneuver plans and their compilation to control schedules.

A plan is a short ordered list of constant-control phases; compilation is a
zero-order hold, so each phase becomes one piecewise-constant segment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

from .dynamics import ControlInput, clamp_control
from .errors import MalformedPlan, OutOfRange

MAX_PHASES = 10
MAX_PHASE_DURATION = 30.0
MAX_TOTAL_DURATION = 60.0


class ManeuverType(str, Enum):
    J_TURN = "j_turn"


@dataclass(frozen=True)
class Phase:
    """One constant-control stretch of a maneuver."""

    name: str
    duration: float
    throttle: float = 0.0
    steering: float = 0.0
    brake: float = 0.0
    reverse: bool = False

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "duration": self.duration,
            "throttle": self.throttle,
            "steering": self.steering,
            "brake": self.brake,
            "reverse": self.reverse,
        }


@dataclass(frozen=True)
class ManeuverPlan:
    maneuver_type: ManeuverType
    phases: tuple[Phase, ...]
    metadata: str = ""

    def to_dict(self) -> dict:
        return {
            "maneuver_type": self.maneuver_type.value,
            "phases": [p.to_dict() for p in self.phases],
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


_PHASE_KEYS = {"name", "duration", "throttle", "steering", "brake", "reverse"}
_PLAN_KEYS = {"maneuver_type", "phases", "metadata"}

# Schema handed to generation backends; mirrors plan_from_dict exactly.
MANEUVER_PLAN_SCHEMA = {
    "type": "object",
    "properties": {
        "maneuver_type": {"type": "string", "enum": ["j_turn"]},
        "phases": {
            "type": "array",
            "minItems": 1,
            "maxItems": MAX_PHASES,
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string"},
                    "duration": {"type": "number"},
                    "throttle": {"type": "number"},
                    "steering": {"type": "number"},
                    "brake": {"type": "number"},
                    "reverse": {"type": "boolean"},
                },
                "required": ["name", "duration", "throttle", "steering",
                             "brake", "reverse"],
                "additionalProperties": False,
            },
        },
        "metadata": {"type": "string"},
    },
    "required": ["maneuver_type", "phases"],
    "additionalProperties": False,
}


def plan_from_dict(doc: dict) -> ManeuverPlan:
    """Parse a plan document; raises :class:`MalformedPlan` on bad shape.

    Shape and types are checked strictly; numeric *values* are not — range
    enforcement belongs to the validator.
    """
    if not isinstance(doc, dict):
        raise MalformedPlan(f"plan must be an object, got {type(doc).__name__}")
    unknown = set(doc) - _PLAN_KEYS
    if unknown:
        raise MalformedPlan(f"unknown plan keys: {sorted(unknown)}")
    try:
        maneuver_type = ManeuverType(doc["maneuver_type"])
    except (KeyError, ValueError) as exc:
        raise MalformedPlan(f"bad maneuver_type: {exc}") from None

    raw_phases = doc.get("phases")
    if not isinstance(raw_phases, list) or not raw_phases:
        raise MalformedPlan("phases must be a non-empty array")

    phases = []
    for i, raw in enumerate(raw_phases):
        if not isinstance(raw, dict):
            raise MalformedPlan(f"phase {i} must be an object")
        unknown = set(raw) - _PHASE_KEYS
        if unknown:
            raise MalformedPlan(f"phase {i} has unknown keys: {sorted(unknown)}")
        missing = _PHASE_KEYS - set(raw)
        if missing:
            raise MalformedPlan(f"phase {i} is missing keys: {sorted(missing)}")
        if not isinstance(raw["name"], str):
            raise MalformedPlan(f"phase {i} name must be a string")
        if not isinstance(raw["reverse"], bool):
            raise MalformedPlan(f"phase {i} reverse must be a boolean")
        for key in ("duration", "throttle", "steering", "brake"):
            if isinstance(raw[key], bool) or not isinstance(raw[key], (int, float)):
                raise MalformedPlan(f"phase {i} {key} must be a number")
        phases.append(Phase(
            name=raw["name"],
            duration=float(raw["duration"]),
            throttle=float(raw["throttle"]),
            steering=float(raw["steering"]),
            brake=float(raw["brake"]),
            reverse=raw["reverse"],
        ))

    metadata = doc.get("metadata", "")
    if not isinstance(metadata, str):
        raise MalformedPlan("metadata must be a string")
    return ManeuverPlan(maneuver_type, tuple(phases), metadata)


def plan_from_json(text: str) -> ManeuverPlan:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedPlan(f"plan is not valid JSON: {exc}") from None
    return plan_from_dict(doc)


def jturn_template() -> ManeuverPlan:
    """The canonical five-phase turnaround seed plan.

    Phase I: straight reverse run-up. Phase II: hard steering while still in
    reverse, which starts the spin. Phase III: forward counter-steer in the
    opposite direction to carry the rotation through. Phase IV: straighten
    and accelerate. Phase V: brake to a stop. Numeric values live in
    ``data/jturn_template.json`` so the seed can be retuned without touching
    code.
    """
    raw = resources.files("maneuverforge").joinpath(
        "data/jturn_template.json").read_text()
    return plan_from_dict(json.loads(raw))


@dataclass(frozen=True)
class Segment:
    start_time: float
    end_time: float
    control: ControlInput


@dataclass(frozen=True)
class ControlSchedule:
    """Contiguous piecewise-constant control, half-open segments from t=0."""

    segments: tuple[Segment, ...] = field(default_factory=tuple)

    @property
    def total_duration(self) -> float:
        return self.segments[-1].end_time if self.segments else 0.0


def compile_plan(plan: ManeuverPlan) -> ControlSchedule:
    """Compile a plan into a schedule, one clamped segment per phase."""
    if not 1 <= len(plan.phases) <= MAX_PHASES:
        raise MalformedPlan(
            f"plan must have 1..{MAX_PHASES} phases, got {len(plan.phases)}")
    segments = []
    t = 0.0
    for i, phase in enumerate(plan.phases):
        if not 0.0 < phase.duration <= MAX_PHASE_DURATION:
            raise MalformedPlan(
                f"phase {i} duration {phase.duration} outside "
                f"(0, {MAX_PHASE_DURATION}]")
        control = clamp_control(phase.throttle, phase.steering, phase.brake,
                                phase.reverse)
        end = t + phase.duration
        segments.append(Segment(t, end, control))
        t = end
    if t > MAX_TOTAL_DURATION:
        raise MalformedPlan(
            f"total duration {t:.2f} exceeds {MAX_TOTAL_DURATION} s")
    return ControlSchedule(tuple(segments))


def control_at(schedule: ControlSchedule, t: float) -> ControlInput:
    """Control active at time ``t``.

    Segments are half-open ``[start, end)``; the exact final instant belongs
    to the last segment.
    """
    if not schedule.segments:
        raise OutOfRange("schedule has no segments")
    total = schedule.total_duration
    if not 0.0 <= t <= total:
        raise OutOfRange(f"t={t} outside [0, {total}]")
    if t == total:
        return schedule.segments[-1].control
    # linear scan is fine: plans are capped at 10 phases
    for seg in schedule.segments:
        if seg.start_time <= t < seg.end_time:
            return seg.control
    return schedule.segments[-1].control
