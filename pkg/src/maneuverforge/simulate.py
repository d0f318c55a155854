"""Rollout of a control schedule into a sampled trajectory."""

from __future__ import annotations

from dataclasses import dataclass

from .dynamics import (DEFAULT_DT, ControlInput, VehicleParams, VehicleState,
                       step)
from .errors import SimulationDiverged
from .plan import ControlSchedule, control_at
from .world import WorldModel, collision_check


@dataclass(frozen=True)
class TrajectorySample:
    time: float
    state: VehicleState
    control: ControlInput


@dataclass(frozen=True)
class Trajectory:
    """Fixed-step log of one rollout.

    ``samples[i].control`` is the input that produced sample ``i`` (the
    first sample carries the control active at t=0). ``truncated_at`` is
    set when the rollout stopped early on impact.
    """

    samples: tuple[TrajectorySample, ...]
    collision: bool = False
    truncated_at: float | None = None

    @property
    def duration(self) -> float:
        return self.samples[-1].time - self.samples[0].time

    @property
    def dt(self) -> float:
        if len(self.samples) < 2:
            return 0.0
        return self.samples[1].time - self.samples[0].time


def rollout(initial: VehicleState, schedule: ControlSchedule,
            params: VehicleParams, dt: float = DEFAULT_DT,
            world: WorldModel | None = None) -> Trajectory:
    """Integrate the schedule from ``initial``, checking collisions each step.

    Returns the complete trajectory; on impact the log is truncated at the
    colliding sample and the collision flag is set. A zero-duration schedule
    yields a single-sample trajectory.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if world is None:
        world = WorldModel()

    n_steps = int(round(schedule.total_duration / dt))
    idle = ControlInput()
    first_control = control_at(schedule, 0.0) if schedule.segments else idle
    samples = [TrajectorySample(initial.time, initial, first_control)]

    state = initial
    collision = False
    truncated_at = None
    for i in range(n_steps):
        control = control_at(schedule, min(i * dt, schedule.total_duration))
        try:
            state = step(state, control, params, dt)
        except SimulationDiverged as exc:
            exc.trajectory = Trajectory(tuple(samples), collision, truncated_at)
            raise
        samples.append(TrajectorySample(state.time, state, control))
        if collision_check(state, params, world):
            collision = True
            truncated_at = state.time
            break

    return Trajectory(tuple(samples), collision, truncated_at)
