import math

import pytest

from maneuverforge.dynamics import VehicleParams, VehicleState
from maneuverforge.plan import (ControlSchedule, ManeuverPlan, ManeuverType,
                                Phase, compile_plan, jturn_template)
from maneuverforge.simulate import rollout
from maneuverforge.world import Obstacle, WorldModel, open_world


def frictionless_sedan():
    return VehicleParams(
        mass=1500.0, yaw_inertia=2400.0, dist_front_axle=1.35,
        dist_rear_axle=1.45, cornering_stiff_front=85000.0,
        cornering_stiff_rear=95000.0, max_drive_force=6000.0,
        max_brake_force=12000.0, max_steer_angle=0.6, drag_coeff=0.0,
        rolling_coeff=0.0, friction_coeff=0.9, body_length=4.6,
        body_width=1.85)


class TestRollout:
    def test_zero_duration_schedule(self, sedan):
        traj = rollout(VehicleState(), ControlSchedule(), sedan, 0.01,
                       open_world())
        assert len(traj.samples) == 1
        assert traj.collision is False
        assert traj.truncated_at is None

    def test_sample_count_and_spacing(self, sedan):
        plan = ManeuverPlan(ManeuverType.J_TURN, (Phase("a", 1.0),))
        traj = rollout(VehicleState(), compile_plan(plan), sedan, 0.01,
                       open_world())
        assert len(traj.samples) == 101
        gaps = [b.time - a.time
                for a, b in zip(traj.samples, traj.samples[1:])]
        assert all(g == pytest.approx(0.01, abs=1e-12) for g in gaps)

    def test_wall_impact_truncates(self):
        params = frictionless_sedan()
        # wall face positioned so the front bumper reaches it at t = 0.5 s
        wall_x = 5.0 + params.body_length / 2.0
        world = WorldModel("wall", (Obstacle(wall_x, wall_x + 1.0, -5.0, 5.0),))
        plan = ManeuverPlan(ManeuverType.J_TURN, (Phase("coast", 2.0),))
        traj = rollout(VehicleState(v_long=10.0), compile_plan(plan), params,
                       0.01, world)
        assert traj.collision is True
        assert traj.truncated_at == pytest.approx(0.51, abs=0.021)
        assert traj.samples[-1].time == traj.truncated_at
        assert len(traj.samples) < 201

    def test_template_rollout_turns_around(self, sedan):
        traj = rollout(VehicleState(), compile_plan(jturn_template()), sedan,
                       0.01, open_world())
        assert traj.collision is False
        rotation = math.degrees(traj.samples[-1].state.heading
                                - traj.samples[0].state.heading)
        assert abs(abs(rotation) - 180.0) <= 10.0

    def test_deterministic(self, sedan):
        schedule = compile_plan(jturn_template())
        a = rollout(VehicleState(), schedule, sedan, 0.01, open_world())
        b = rollout(VehicleState(), schedule, sedan, 0.01, open_world())
        assert a == b

    def test_bad_dt(self, sedan):
        with pytest.raises(ValueError):
            rollout(VehicleState(), ControlSchedule(), sedan, 0.0,
                    open_world())

    def test_controls_logged_per_step(self, sedan):
        plan = ManeuverPlan(ManeuverType.J_TURN,
                            (Phase("a", 0.05, throttle=0.3),
                             Phase("b", 0.05, throttle=0.9)))
        traj = rollout(VehicleState(), compile_plan(plan), sedan, 0.01,
                       open_world())
        throttles = [s.control.throttle for s in traj.samples]
        assert throttles[0] == 0.3
        assert throttles[-1] == 0.9
        assert set(throttles) == {0.3, 0.9}
