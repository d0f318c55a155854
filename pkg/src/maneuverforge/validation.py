"""Deterministic plan validation: repair what can be clamped, reject the rest.

Operational checks cover the per-channel control bounds and plan structure;
safety checks cover the steering cap, total duration, the required final
brake phase, and a coarse closed-form top-speed estimate. The validator is
simulation-free so it can gate plans before any physics runs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .dynamics import VehicleParams
from .errors import Rejected
from .plan import MAX_PHASES, MAX_PHASE_DURATION, MAX_TOTAL_DURATION, ManeuverPlan, Phase

OPERATIONAL = "operational"
SAFETY = "safety"


@dataclass(frozen=True)
class ConstraintSet:
    """Operational channel bounds plus safety caps for candidate plans."""

    throttle_min: float = 0.0
    throttle_max: float = 1.0
    brake_min: float = 0.0
    brake_max: float = 1.0
    steering_min: float = -1.0
    steering_max: float = 1.0
    duration_max: float = MAX_PHASE_DURATION
    phase_count_min: int = 1
    phase_count_max: int = MAX_PHASES
    safety_steering_cap: float = 1.0
    max_total_duration: float = MAX_TOTAL_DURATION
    require_final_brake: bool = True
    max_speed_estimate: float = 40.0
    # full-throttle acceleration scale for the closed-form speed bound, m/s^2
    drive_accel: float = 4.0

    def __post_init__(self):
        if self.safety_steering_cap > max(abs(self.steering_min),
                                          abs(self.steering_max)):
            raise ValueError("safety steering cap must lie within the "
                             "operational steering bounds")

    @classmethod
    def for_vehicle(cls, params: VehicleParams, **overrides) -> "ConstraintSet":
        return cls(drive_accel=params.max_drive_force / params.mass,
                   **overrides)

    def to_dict(self) -> dict:
        return {
            "throttle": [self.throttle_min, self.throttle_max],
            "brake": [self.brake_min, self.brake_max],
            "steering": [self.steering_min, self.steering_max],
            "duration_max": self.duration_max,
            "phase_count": [self.phase_count_min, self.phase_count_max],
            "safety_steering_cap": self.safety_steering_cap,
            "max_total_duration": self.max_total_duration,
            "require_final_brake": self.require_final_brake,
            "max_speed_estimate": self.max_speed_estimate,
        }


class Verdict(str, Enum):
    ACCEPTED = "accepted"
    REPAIRED = "repaired"
    REJECTED = "rejected"


@dataclass(frozen=True)
class Violation:
    phase_index: int          # -1 for plan-level violations
    channel: str
    observed: float
    bound: float
    constraint_class: str     # "operational" or "safety"

    def to_dict(self) -> dict:
        return {
            "phase_index": self.phase_index,
            "channel": self.channel,
            "observed": self.observed,
            "bound": self.bound,
            "class": self.constraint_class,
        }


@dataclass(frozen=True)
class ValidationReport:
    verdict: Verdict
    violations: tuple[Violation, ...]
    repaired_plan: ManeuverPlan | None = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "violations": [v.to_dict() for v in self.violations],
            "repaired_plan": (self.repaired_plan.to_dict()
                              if self.repaired_plan else None),
        }


def _clip(value: float, lo: float, hi: float) -> float:
    return min(max(value, lo), hi)


def validate(plan: ManeuverPlan, constraints: ConstraintSet) -> ValidationReport:
    """Check a plan; out-of-range numeric channels are repaired by clamping,
    structural problems reject the plan outright. Never mutates its input."""
    violations: list[Violation] = []
    rejected = False

    n = len(plan.phases)
    if not constraints.phase_count_min <= n <= constraints.phase_count_max:
        bound = (constraints.phase_count_max if n > constraints.phase_count_max
                 else constraints.phase_count_min)
        violations.append(Violation(-1, "phase_count", float(n), float(bound),
                                    OPERATIONAL))
        rejected = True

    repaired_phases: list[Phase] = []
    for i, phase in enumerate(plan.phases):
        fixed = phase
        if phase.duration <= 0.0:
            violations.append(Violation(i, "duration", phase.duration, 0.0,
                                        OPERATIONAL))
            rejected = True
        elif phase.duration > constraints.duration_max:
            violations.append(Violation(i, "duration", phase.duration,
                                        constraints.duration_max, OPERATIONAL))
            fixed = replace(fixed, duration=constraints.duration_max)

        for channel, lo, hi in (
                ("throttle", constraints.throttle_min, constraints.throttle_max),
                ("steering", constraints.steering_min, constraints.steering_max),
                ("brake", constraints.brake_min, constraints.brake_max)):
            value = getattr(fixed, channel)
            if not lo <= value <= hi:
                bound = hi if value > hi else lo
                violations.append(Violation(i, channel, value, bound,
                                            OPERATIONAL))
                fixed = replace(fixed, **{channel: _clip(value, lo, hi)})

        cap = constraints.safety_steering_cap
        if abs(fixed.steering) > cap:
            violations.append(Violation(i, "steering", fixed.steering,
                                        cap if fixed.steering > 0 else -cap,
                                        SAFETY))
            fixed = replace(fixed, steering=_clip(fixed.steering, -cap, cap))

        repaired_phases.append(fixed)

    if not rejected:
        total = sum(p.duration for p in repaired_phases)
        if total > constraints.max_total_duration:
            violations.append(Violation(-1, "total_duration", total,
                                        constraints.max_total_duration, SAFETY))
            rejected = True

        if constraints.require_final_brake and repaired_phases and \
                repaired_phases[-1].brake <= 0.0:
            violations.append(Violation(len(repaired_phases) - 1,
                                        "final_brake",
                                        repaired_phases[-1].brake, 0.0, SAFETY))
            rejected = True

        speed = sum(constraints.drive_accel * p.throttle * p.duration
                    for p in repaired_phases)
        if speed > constraints.max_speed_estimate:
            violations.append(Violation(-1, "speed_estimate", speed,
                                        constraints.max_speed_estimate, SAFETY))
            rejected = True

    violations.sort(key=lambda v: (v.phase_index, v.channel))
    if rejected:
        return ValidationReport(Verdict.REJECTED, tuple(violations))
    if violations:
        repaired = replace(plan, phases=tuple(repaired_phases))
        return ValidationReport(Verdict.REPAIRED, tuple(violations), repaired)
    return ValidationReport(Verdict.ACCEPTED, ())


def enforce(plan: ManeuverPlan, constraints: ConstraintSet) -> ManeuverPlan:
    """Map a candidate plan into the safe set, or raise :class:`Rejected`."""
    report = validate(plan, constraints)
    if report.verdict is Verdict.REJECTED:
        raise Rejected(report)
    if report.verdict is Verdict.REPAIRED:
        return report.repaired_plan
    return plan
