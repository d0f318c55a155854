"""Planar vehicle dynamics: a dynamic bicycle model with saturating tires.

The state couples body-frame velocities: longitudinal acceleration picks up
a ``-yaw_rate * v_lat`` term and lateral acceleration a ``+yaw_rate * v_long``
term, while yaw acceleration comes from the front/rear axle force balance.
Axle forces are linear in slip angle and capped by a per-axle friction
budget; below ``V_EPS`` longitudinal speed they fade linearly to zero so
standstill is an exact fixed point.

Everything here is a pure function over frozen value types, so stepping is
deterministic (bit-identical outputs for identical inputs) and thread-safe.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources

from .errors import InvalidControl, SimulationDiverged

GRAVITY = 9.81

# Longitudinal speed floor for slip-angle geometry; also the speed below
# which lateral tire force is blended out to avoid chatter at standstill.
V_EPS = 0.5

DEFAULT_DT = 0.01


@dataclass(frozen=True)
class VehicleState:
    """Planar pose plus body-frame velocities.

    ``heading`` accumulates without wrapping so the total rotation of a
    maneuver stays recoverable; wrap only when computing metrics.
    """

    x_pos: float = 0.0
    y_pos: float = 0.0
    heading: float = 0.0
    v_long: float = 0.0
    v_lat: float = 0.0
    yaw_rate: float = 0.0
    time: float = 0.0

    def is_finite(self) -> bool:
        return all(
            math.isfinite(v)
            for v in (self.x_pos, self.y_pos, self.heading,
                      self.v_long, self.v_lat, self.yaw_rate, self.time)
        )


@dataclass(frozen=True)
class ControlInput:
    """One control sample: throttle/brake in [0,1], steering in [-1,1]."""

    throttle: float = 0.0
    steering: float = 0.0
    brake: float = 0.0
    reverse: bool = False


@dataclass(frozen=True)
class VehicleParams:
    """Physical parameters of one vehicle, SI units."""

    mass: float
    yaw_inertia: float
    dist_front_axle: float
    dist_rear_axle: float
    cornering_stiff_front: float
    cornering_stiff_rear: float
    max_drive_force: float
    max_brake_force: float
    max_steer_angle: float
    drag_coeff: float
    rolling_coeff: float
    friction_coeff: float
    body_length: float
    body_width: float

    def __post_init__(self):
        positive = (
            "mass", "yaw_inertia", "dist_front_axle", "dist_rear_axle",
            "cornering_stiff_front", "cornering_stiff_rear",
            "max_drive_force", "max_brake_force", "max_steer_angle",
            "body_length", "body_width",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.drag_coeff < 0 or self.rolling_coeff < 0:
            raise ValueError("drag_coeff and rolling_coeff must be >= 0")
        if not 0 < self.friction_coeff <= 2.0:
            raise ValueError("friction_coeff must lie in (0, 2]")

    @property
    def wheelbase(self) -> float:
        return self.dist_front_axle + self.dist_rear_axle


@dataclass(frozen=True)
class StateDerivative:
    d_x_pos: float
    d_y_pos: float
    d_heading: float
    accel_long: float
    accel_lat: float
    d_yaw_rate: float


@dataclass(frozen=True)
class ForceBalance:
    """Force terms feeding the coupled acceleration equations."""

    drive_accel: float      # net longitudinal force / mass, m/s^2
    front_lateral: float    # N, in the front tire plane
    rear_lateral: float     # N
    steer_angle: float      # rad


def clamp_control(throttle: float, steering: float, brake: float,
                  reverse: bool = False) -> ControlInput:
    """Clamp raw channels into their legal intervals; reverse passes through.

    Idempotent. Raises :class:`InvalidControl` on non-finite input.
    """
    for name, value in (("throttle", throttle), ("steering", steering),
                        ("brake", brake)):
        if not math.isfinite(value):
            raise InvalidControl(f"{name} is not finite: {value!r}")
    return ControlInput(
        throttle=min(max(float(throttle), 0.0), 1.0),
        steering=min(max(float(steering), -1.0), 1.0),
        brake=min(max(float(brake), 0.0), 1.0),
        reverse=bool(reverse),
    )


def _sign(x: float) -> float:
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


def _axle_force(v_ref: float, v_side: float, steer: float,
                stiffness: float, cap: float, fade: float) -> float:
    """Lateral tire force for one axle.

    The slip angle is measured in the tire frame between the rolling
    direction and the contact-point velocity, which keeps the geometry
    valid when the wheel rolls backwards (a plain ``delta - atan2(vy, vx)``
    jumps by pi there and would saturate a straight-reversing tire).
    For forward rolling the two formulations coincide.
    """
    cos_d = math.cos(steer)
    sin_d = math.sin(steer)
    v_roll = v_ref * cos_d + v_side * sin_d
    v_slip = v_side * cos_d - v_ref * sin_d
    slip_angle = math.atan2(-v_slip, abs(v_roll))
    force = stiffness * slip_angle
    if force > cap:
        force = cap
    elif force < -cap:
        force = -cap
    return force * fade


def compute_forces(state: VehicleState, control: ControlInput,
                   params: VehicleParams) -> ForceBalance:
    """Drive/resistance and tire forces for one state/control pair.

    Expects an already-clamped control.
    """
    v = state.v_long
    direction = -1.0 if control.reverse else 1.0
    f_x = (direction * control.throttle * params.max_drive_force
           - _sign(v) * control.brake * params.max_brake_force
           - params.drag_coeff * v * abs(v)
           - params.rolling_coeff * v)

    steer = control.steering * params.max_steer_angle
    v_ref = max(abs(v), V_EPS) * (1.0 if v >= 0.0 else -1.0)
    fade = min(abs(v) / V_EPS, 1.0)

    weight = params.friction_coeff * params.mass * GRAVITY / params.wheelbase
    front = _axle_force(
        v_ref, state.v_lat + params.dist_front_axle * state.yaw_rate, steer,
        params.cornering_stiff_front, weight * params.dist_rear_axle, fade)
    rear = _axle_force(
        v_ref, state.v_lat - params.dist_rear_axle * state.yaw_rate, 0.0,
        params.cornering_stiff_rear, weight * params.dist_front_axle, fade)

    return ForceBalance(f_x / params.mass, front, rear, steer)


def assemble_derivative(state: VehicleState, forces: ForceBalance,
                        params: VehicleParams) -> StateDerivative:
    """Combine forces with the velocity coupling terms and pose kinematics."""
    cos_d = math.cos(forces.steer_angle)
    accel_long = forces.drive_accel - state.yaw_rate * state.v_lat
    accel_lat = ((forces.front_lateral * cos_d + forces.rear_lateral)
                 / params.mass + state.yaw_rate * state.v_long)
    d_yaw = (params.dist_front_axle * forces.front_lateral * cos_d
             - params.dist_rear_axle * forces.rear_lateral) / params.yaw_inertia

    cos_h = math.cos(state.heading)
    sin_h = math.sin(state.heading)
    return StateDerivative(
        d_x_pos=state.v_long * cos_h - state.v_lat * sin_h,
        d_y_pos=state.v_long * sin_h + state.v_lat * cos_h,
        d_heading=state.yaw_rate,
        accel_long=accel_long,
        accel_lat=accel_lat,
        d_yaw_rate=d_yaw,
    )


def derivatives(state: VehicleState, control: ControlInput,
                params: VehicleParams) -> StateDerivative:
    """Full state derivative under the bicycle model."""
    return assemble_derivative(state, compute_forces(state, control, params),
                               params)


def _rhs(y: tuple, control: ControlInput, params: VehicleParams) -> tuple:
    # same math as derivatives(), on a bare 6-tuple for the integrator
    state = VehicleState(y[0], y[1], y[2], y[3], y[4], y[5])
    d = derivatives(state, control, params)
    return (d.d_x_pos, d.d_y_pos, d.d_heading,
            d.accel_long, d.accel_lat, d.d_yaw_rate)


def step(state: VehicleState, control: ControlInput, params: VehicleParams,
         dt: float = DEFAULT_DT) -> VehicleState:
    """Advance one fixed timestep with classical 4th-order Runge-Kutta."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")

    y0 = (state.x_pos, state.y_pos, state.heading,
          state.v_long, state.v_lat, state.yaw_rate)
    k1 = _rhs(y0, control, params)
    k2 = _rhs(tuple(y0[i] + 0.5 * dt * k1[i] for i in range(6)), control, params)
    k3 = _rhs(tuple(y0[i] + 0.5 * dt * k2[i] for i in range(6)), control, params)
    k4 = _rhs(tuple(y0[i] + dt * k3[i] for i in range(6)), control, params)
    y1 = tuple(
        y0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        for i in range(6)
    )

    new_state = VehicleState(*y1, time=state.time + dt)
    if not new_state.is_finite():
        raise SimulationDiverged(
            f"non-finite state after step at t={state.time:.3f}")
    return new_state


def _load_preset_file(name: str) -> dict:
    path = resources.files("maneuverforge").joinpath(f"data/vehicles/{name}.json")
    try:
        raw = path.read_text()
    except FileNotFoundError:
        raise KeyError(f"unknown vehicle preset: {name!r}") from None
    return json.loads(raw)


def load_vehicle(name: str) -> VehicleParams:
    """Load a named vehicle preset from the bundled JSON documents."""
    return VehicleParams(**_load_preset_file(name))


VEHICLE_PRESETS = ("sedan", "sports_coupe")
